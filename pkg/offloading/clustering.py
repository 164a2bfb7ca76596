"""
K-means++ clustering of encoded edge-computer profiles, with elbow selection
of K from the distortion curve and silhouette scores for cross-checking.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .domain import FeatureCodec
from .exceptions import SchemaError

logger = logging.getLogger(__name__)

CLUSTER_VERSION = 1


@dataclass(frozen=True)
class ClusteringConfig:
    k_min: int = 2
    k_max: int = 12
    n_init: int = 4
    max_iters: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if self.k_min < 2 or self.k_max < self.k_min:
            raise ValueError('k range must satisfy 2 <= k_min <= k_max')
        if self.n_init < 1 or self.max_iters < 1:
            raise ValueError('n_init and max_iters must be at least 1')
        if self.tol < 0:
            raise ValueError('tol must be non-negative')

    @property
    def k_range(self):
        return range(self.k_min, self.k_max + 1)


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    n_iters_run: int
    inertia_history: tuple[float, ...] = ()
    codec: FeatureCodec | None = None

    @property
    def dim(self):
        return self.centroids.shape[1]

    def members(self, index):
        return np.flatnonzero(self.assignments == index)

    def to_dict(self):
        return {
            'cluster_version': CLUSTER_VERSION,
            'k': self.k,
            'centroids': self.centroids.tolist(),
            'assignments': self.assignments.tolist(),
            'inertia': self.inertia,
            'seed': self.seed,
            'n_iters_run': self.n_iters_run,
            'inertia_history': list(self.inertia_history),
            'codec': self.codec.to_dict() if self.codec is not None else None,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get('cluster_version') != CLUSTER_VERSION:
            raise SchemaError(f"cluster_version {data.get('cluster_version')!r} is not supported")
        return cls(
            k=int(data['k']),
            centroids=np.array(data['centroids'], dtype=float),
            assignments=np.array(data['assignments'], dtype=int),
            inertia=float(data['inertia']),
            seed=int(data['seed']),
            n_iters_run=int(data['n_iters_run']),
            inertia_history=tuple(data['inertia_history']),
            codec=FeatureCodec.from_dict(data['codec']) if data.get('codec') else None,
        )


def _as_points(points):
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError('empty dataset')
    return points


def _squared_distances(points, centroids):
    return cdist(points, centroids, 'sqeuclidean')


def _assign(points, centroids):
    d2 = _squared_distances(points, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def _seed_centroids(points, k, rng):
    """First center uniform, each next one drawn proportionally to squared distance."""
    centroids = [points[rng.integers(len(points))]]
    closest = _squared_distances(points, np.array(centroids))[:, 0]
    for _ in range(1, k):
        index = rng.choice(len(points), p=closest / closest.sum())
        centroids.append(points[index])
        closest = np.minimum(closest, _squared_distances(points, points[index][np.newaxis, :])[:, 0])
    return np.array(centroids)


def _update(points, labels, d2, centroids):
    updated = centroids.copy()
    counts = np.bincount(labels, minlength=len(centroids))
    for j in np.flatnonzero(counts):
        updated[j] = points[labels == j].mean(axis=0)
    # an empty cluster restarts at the point farthest from its current centroid
    taken = d2.copy()
    for j in np.flatnonzero(counts == 0):
        far = int(np.argmax(taken))
        updated[j] = points[far]
        taken[far] = -1.0
    return updated


def _lloyd(points, k, rng, max_iters, tol):
    centroids = _seed_centroids(points, k, rng)
    history = []
    iters = 0
    for iters in range(1, max_iters + 1):
        labels, d2 = _assign(points, centroids)
        history.append(float(d2.mean()))
        updated = _update(points, labels, d2, centroids)
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if shift <= tol:
            break
    labels, d2 = _assign(points, centroids)
    history.append(float(d2.mean()))
    return centroids, labels, history, iters


def kmeans_pp_fit(points, k, seed=0, max_iters=300, tol=1e-6, *, n_init=1, codec=None):
    """
    K-means++ seeding followed by Lloyd iterations.

    ``inertia`` is the mean squared distance to the assigned centroid, the same
    quantity ``distortion_score`` reports. With ``n_init`` > 1 the run with the
    lowest inertia is kept.
    """
    points = _as_points(points)
    if max_iters < 1 or tol < 0:
        raise ValueError('max_iters must be at least 1 and tol non-negative')
    if k < 1:
        raise ValueError('k must be at least 1')
    if k > len(np.unique(points, axis=0)):
        raise ValueError('k too large')

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(points, k, rng, max_iters, tol)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    centroids, labels, history, iters = best
    logger.debug('k=%d converged after %d iterations, inertia %.6g', k, iters, history[-1])
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=labels,
        inertia=history[-1],
        seed=seed,
        n_iters_run=iters,
        inertia_history=tuple(history),
        codec=codec,
    )


def _check_dim(model, points):
    if points.shape[1] != model.dim:
        raise ValueError(f'dimension mismatch: points have {points.shape[1]}, centroids {model.dim}')


def distortion_score(model, points):
    points = _as_points(points)
    _check_dim(model, points)
    _, d2 = _assign(points, model.centroids)
    return float(d2.mean())


def silhouette_score(points, assignments):
    """
    Mean of (b - a) / max(a, b) over points.

    ``a`` is the mean distance to the rest of the point's own cluster, ``b``
    the smallest mean distance to another cluster. Points alone in their
    cluster score 0.
    """
    points = _as_points(points)
    labels = np.asarray(assignments)
    if len(labels) != len(points):
        raise ValueError('one assignment per point is required')
    clusters, labels = np.unique(labels, return_inverse=True)
    if len(clusters) < 2:
        raise ValueError('silhouette undefined for k=1')

    distances = cdist(points, points)
    onehot = np.eye(len(clusters))[labels]
    sizes = onehot.sum(axis=0)
    sums = distances @ onehot
    own = sizes[labels]
    a = np.divide(sums[np.arange(len(points)), labels], own - 1, out=np.zeros(len(points)), where=own > 1)
    means = sums / sizes
    means[np.arange(len(points)), labels] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    scores = np.divide(b - a, denom, out=np.zeros(len(points)), where=(own > 1) & (denom > 0))
    return float(scores.mean())


def assign_to_cluster(model, vector):
    vector = np.asarray(vector, dtype=float).reshape(1, -1)
    _check_dim(model, vector)
    return int(np.argmin(_squared_distances(vector, model.centroids)[0]))


def knee_index(distortions, lead=None):
    """
    Position of the largest second difference of the log distortion curve.

    The bend is measured between ratios of successive distortions. ``lead`` is
    the distortion one step before the first entry, so the first entry can be
    a knee too. The last entry never is. Zero distortions are floored.
    """
    curve = np.asarray(list(distortions) if lead is None else [lead, *distortions], dtype=float)
    offset = 0 if lead is None else 1
    if len(curve) < 3:
        return 0
    floor = max(float(curve.max()) * 1e-12, np.finfo(float).tiny)
    logs = np.log(np.maximum(curve, floor))
    second = logs[:-2] - 2 * logs[1:-1] + logs[2:]
    return int(np.argmax(second)) + 1 - offset


@dataclass
class ElbowResult:
    k_star: int
    silhouette_k: int
    ks: list[int]
    distortions: list[float]
    silhouettes: list[float]
    models: dict[int, ClusterModel] = field(default_factory=dict)

    @property
    def disagreement(self):
        return self.k_star != self.silhouette_k

    def curve_rows(self):
        return [
            {'k': k, 'distortion': d, 'silhouette': s}
            for k, d, s in zip(self.ks, self.distortions, self.silhouettes)
        ]


def elbow_select_k(points, k_range=range(2, 13), seed=0, *, n_init=4, max_iters=300, tol=1e-6, jobs=1,
                   codec=None):
    points = _as_points(points)
    ks = sorted(k_range)
    if not ks or ks[0] < 2 or ks[-1] > len(points) - 1:
        raise ValueError(f'k range must lie within [2, {len(points) - 1}]')

    def fit(k):
        model = kmeans_pp_fit(points, k, seed + k, max_iters, tol, n_init=n_init, codec=codec)
        return model, silhouette_score(points, model.assignments)

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        fitted = list(pool.map(fit, ks))

    distortions = [model.inertia for model, _ in fitted]
    silhouettes = [score for _, score in fitted]
    # the curve one step below k_min; k = 1 is the spread around the mean
    lead = None
    if ks[0] - 1 == 1:
        lead = float(((points - points.mean(axis=0)) ** 2).sum(axis=1).mean())
    elif ks[0] - 1 >= 2:
        lead = kmeans_pp_fit(points, ks[0] - 1, seed + ks[0] - 1, max_iters, tol, n_init=n_init).inertia

    result = ElbowResult(
        k_star=ks[knee_index(distortions, lead)],
        silhouette_k=ks[int(np.argmax(silhouettes))],
        ks=ks,
        distortions=distortions,
        silhouettes=silhouettes,
        models={k: model for k, (model, _) in zip(ks, fitted)},
    )
    if result.disagreement:
        logger.warning('distortion elbow k=%d and silhouette optimum k=%d disagree',
                       result.k_star, result.silhouette_k)
    else:
        logger.info('selected k=%d by both distortion and silhouette', result.k_star)
    return result
