"""
The offloading flow: a task arrives, the predictor names the profile of the
edge computer that should serve it, the profile is routed to a cluster, and
the fastest eligible member of that cluster takes the task. Clusters are
refitted every ``recluster_period_s`` of simulated time.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .baselines import HYBRID, BaselineKind, BaselineRegressor
from .clustering import ClusteringConfig, assign_to_cluster, elbow_select_k, kmeans_pp_fit
from .datagen import (
    GenConfig,
    generate_interactions,
    generate_population,
    is_eligible,
    resample_dynamics,
    sample_tasks,
)
from .domain import TrainedPredictor, encode_interactions, fit_cluster_codec, fit_input_codec, fit_profile_codec
from .exceptions import NetworkSaturatedError
from .latency import LatencyBreakdown, LinkModel, argmin_latency, response_time, response_times
from .neural import HybridRegressor, TrainConfig

logger = logging.getLogger(__name__)

TASK_STREAM = 3


@dataclass(frozen=True)
class PipelineConfig:
    availability_min: float = 0.2
    recluster_period_s: float = 600.0
    load_increment: float = 0.05
    training_tasks: int = 500
    n_tasks: int = 500
    mean_interarrival_s: float = 5.0
    k: int | None = None
    predictor: str = HYBRID

    def __post_init__(self):
        if not 0.0 <= self.availability_min <= 1.0:
            raise ValueError('availability_min must lie in [0, 1]')
        if not self.recluster_period_s > 0:
            raise ValueError('recluster_period_s must be positive')
        if not 0.0 <= self.load_increment <= 1.0:
            raise ValueError('load_increment must lie in [0, 1]')
        if self.training_tasks < 2 or self.n_tasks < 1:
            raise ValueError('training_tasks must be at least 2 and n_tasks at least 1')
        if not self.mean_interarrival_s > 0:
            raise ValueError('mean_interarrival_s must be positive')
        if self.k is not None and self.k < 1:
            raise ValueError('k must be at least 1')
        if self.predictor != HYBRID and self.predictor not in BaselineKind.values:
            raise ValueError(f'unknown predictor {self.predictor!r}')


@dataclass(frozen=True)
class OffloadDecision:
    task_id: int
    timestamp: float
    requester_id: str
    predicted_profile: object
    routed_cluster: int
    cluster_index: int
    chosen_ec_id: str
    latency: LatencyBreakdown
    fallback_used: bool
    regret: float

    def as_row(self):
        return {
            'task_id': self.task_id,
            'timestamp': self.timestamp,
            'requester_id': self.requester_id,
            'routed_cluster': self.routed_cluster,
            'cluster': self.cluster_index,
            'ec_id': self.chosen_ec_id,
            'cpu_s': self.latency.cpu_time_s,
            'prop_s': self.latency.prop_time_s,
            'total_s': self.latency.total_s,
            'fallback': self.fallback_used,
            'regret': self.regret,
        }


DECISION_COLUMNS = [
    'task_id', 'timestamp', 'requester_id', 'routed_cluster', 'cluster', 'ec_id',
    'cpu_s', 'prop_s', 'total_s', 'fallback', 'regret',
]


@dataclass(eq=False)
class SimulationState:
    population: list
    ec_indices: np.ndarray
    cluster_model: object
    predictor: TrainedPredictor
    gen_config: GenConfig
    config: PipelineConfig = PipelineConfig()
    link: LinkModel = LinkModel()
    clustering: ClusteringConfig = ClusteringConfig()
    seed: int = 0
    clock_s: float = 0.0
    fitted_at_s: float = 0.0
    refit_count: int = 0
    rng: np.random.Generator = field(default=None, repr=False)
    decisions: list = field(default_factory=list)

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)
        self._by_id = {d.id: i for i, d in enumerate(self.population)}

    def device(self, device_id):
        return self.population[self._by_id[device_id]]

    @property
    def membership(self):
        return self.cluster_model.assignments


def edge_computer_points(population):
    """Indices, fitted cluster codec and encoded profiles of every edge computer."""
    ec_indices = np.array([i for i, d in enumerate(population) if d.is_edge_computer], dtype=int)
    if len(ec_indices) == 0:
        raise ValueError('no computational devices')
    profiles = [population[i].edge_profile for i in ec_indices]
    codec = fit_cluster_codec(profiles)
    return ec_indices, codec, codec.encode_rows(p.as_row() for p in profiles)


def cluster_edge_computers(population, k, seed, clustering=ClusteringConfig()):
    ec_indices, codec, points = edge_computer_points(population)
    k = min(k, len(np.unique(points, axis=0)))
    model = kmeans_pp_fit(points, k, seed, clustering.max_iters, clustering.tol, n_init=clustering.n_init,
                          codec=codec)
    return ec_indices, model


def choose_k(points, clustering=ClusteringConfig(), seed=0, jobs=1):
    """Elbow-selected K, with the range clipped to what the number of points allows."""
    distinct = len(np.unique(points, axis=0))
    k_max = min(clustering.k_max, distinct - 1)
    if k_max < clustering.k_min:
        return max(min(clustering.k_min, distinct), 1)
    result = elbow_select_k(points, range(clustering.k_min, k_max + 1), seed, n_init=clustering.n_init,
                            max_iters=clustering.max_iters, tol=clustering.tol, jobs=jobs)
    return result.k_star


def build_state(population, predictor, k, *, gen_config=GenConfig(), config=PipelineConfig(), link=LinkModel(),
                clustering=ClusteringConfig(), seed=0):
    ec_indices, model = cluster_edge_computers(population, k, seed, clustering)
    logger.info('clustered %d edge computers into %d clusters', len(ec_indices), model.k)
    return SimulationState(
        population=list(population),
        ec_indices=ec_indices,
        cluster_model=model,
        predictor=predictor,
        gen_config=gen_config,
        config=config,
        link=link,
        clustering=clustering,
        seed=seed,
    )


def offload(state, task):
    """
    Route one task and record the decision.

    The chosen edge computer's load goes up by ``load_increment``. Since
    ``advance_time`` redraws every load, the increment only gates later tasks
    with the same timestamp. Regret is the chosen total response time over the
    best total among all eligible edge computers, both taken before that update.
    """
    requester = state.device(task.requester_id)
    ecs = [state.population[i] for i in state.ec_indices]
    profiles = [d.edge_profile for d in ecs]
    eligible = np.array([is_eligible(p, state.config.availability_min) for p in profiles])
    if not eligible.any():
        raise NetworkSaturatedError()

    predicted = state.predictor.predict(task, requester)
    model = state.cluster_model
    vector = model.codec.encode_row(predicted.as_row())
    routed = assign_to_cluster(model, vector)

    distances = ((model.centroids - vector) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(model.k), distances))
    order = [routed] + [int(c) for c in order if c != routed]
    totals = response_times(task, requester.location, profiles, [d.location for d in ecs], state.link)
    for cluster in order:
        members = np.flatnonzero((model.assignments == cluster) & eligible)
        if len(members):
            break
    else:
        raise NetworkSaturatedError()

    best = members[argmin_latency(totals[members], [profiles[m].load for m in members])]
    fallback = cluster != routed
    if fallback:
        logger.warning('task %d: cluster %d has no eligible member, fell back to cluster %d',
                       task.task_id, routed, cluster)

    chosen = ecs[best]
    decision = OffloadDecision(
        task_id=task.task_id,
        timestamp=task.timestamp,
        requester_id=requester.id,
        predicted_profile=predicted,
        routed_cluster=routed,
        cluster_index=int(cluster),
        chosen_ec_id=chosen.id,
        latency=response_time(task, requester.location, chosen.edge_profile, chosen.location, state.link),
        fallback_used=fallback,
        regret=float(totals[best] / totals[eligible].min()),
    )

    bumped = replace(chosen.edge_profile, load=min(chosen.edge_profile.load + state.config.load_increment, 1.0))
    state.population[state.ec_indices[best]] = replace(chosen, edge_profile=bumped)
    state.decisions.append(decision)
    return decision


def advance_time(state, dt_s):
    """
    Move the clock forward, redraw load and availability (dropping any load
    increments from earlier decisions), and refit the clusters once if one or
    more period boundaries were crossed.
    """
    if not dt_s > 0:
        raise ValueError('dt_s must be positive')
    before = state.clock_s
    state.clock_s = before + dt_s
    state.population = resample_dynamics(state.population, state.gen_config, state.rng)
    period = state.config.recluster_period_s
    if math.floor(state.clock_s / period) > math.floor(before / period):
        state.refit_count += 1
        _, state.cluster_model = cluster_edge_computers(
            state.population, state.cluster_model.k, state.seed + state.refit_count, state.clustering,
        )
        state.fitted_at_s = state.clock_s
        logger.info('refitted clusters at t=%.1fs (refit %d)', state.clock_s, state.refit_count)
    return state


def train_predictor(interactions, name=HYBRID, *, seed=0, train_config=TrainConfig(), trunk_layers=(128, 64),
                    dropout_rate=0.2, hyperparameters=None):
    """Fit the named predictor (the hybrid network or one baseline kind) on interaction rows."""
    input_codec = fit_input_codec(interactions)
    profiles = [i.target for i in interactions]
    target_codec = fit_profile_codec(profiles)
    if name == HYBRID:
        regressor = HybridRegressor(target_codec, trunk_layers=trunk_layers, dropout_rate=dropout_rate,
                                    train_config=train_config, seed=seed)
    else:
        regressor = BaselineRegressor(name, target_codec, (hyperparameters or {}).get(name), seed)
    regressor.fit(encode_interactions(interactions, input_codec), profiles)
    return TrainedPredictor(input_codec=input_codec, regressor=regressor)


@dataclass
class ScenarioReport:
    decisions: list[OffloadDecision]
    k: int
    refits: int
    predictor: str
    seed: int

    def to_frame(self):
        return pd.DataFrame([d.as_row() for d in self.decisions], columns=DECISION_COLUMNS)

    def summary(self):
        totals = np.array([d.latency.total_s for d in self.decisions])
        regrets = np.array([d.regret for d in self.decisions])
        return {
            'tasks': len(self.decisions),
            'k': self.k,
            'predictor': self.predictor,
            'seed': self.seed,
            'refits': self.refits,
            'latency_mean_s': float(totals.mean()),
            'latency_p50_s': float(np.percentile(totals, 50)),
            'latency_p95_s': float(np.percentile(totals, 95)),
            'latency_p99_s': float(np.percentile(totals, 99)),
            'fallback_rate': float(np.mean([d.fallback_used for d in self.decisions])),
            'regret_mean': float(regrets.mean()),
            'regret_max': float(regrets.max()),
        }


def run_scenario(gen_config=GenConfig(), config=PipelineConfig(), *, seed=0, link=LinkModel(),
                 clustering=ClusteringConfig(), train_config=TrainConfig(), trunk_layers=(128, 64),
                 dropout_rate=0.2, hyperparameters=None, jobs=1):
    """Generate a population, train the predictor in-scenario and offload ``config.n_tasks`` tasks over time."""
    gen_config = replace(gen_config, seed=seed)
    population = generate_population(gen_config)
    interactions = generate_interactions(population, config.training_tasks, seed, link=link,
                                         availability_min=config.availability_min)
    predictor = train_predictor(interactions, config.predictor, seed=seed, train_config=train_config,
                                trunk_layers=trunk_layers, dropout_rate=dropout_rate,
                                hyperparameters=hyperparameters)

    k = config.k
    if k is None:
        _, _, points = edge_computer_points(population)
        k = choose_k(points, clustering, seed, jobs)
    state = build_state(population, predictor, k, gen_config=gen_config, config=config, link=link,
                        clustering=clustering, seed=seed)

    requesters = [d for d in population if not d.is_edge_computer]
    tasks = sample_tasks(requesters, config.n_tasks, np.random.default_rng([seed, TASK_STREAM]),
                         mean_interarrival_s=config.mean_interarrival_s)
    for task in tasks:
        if task.timestamp > state.clock_s:
            advance_time(state, task.timestamp - state.clock_s)
        offload(state, task)

    report = ScenarioReport(decisions=state.decisions, k=state.cluster_model.k, refits=state.refit_count,
                            predictor=predictor.name, seed=seed)
    logger.info('scenario finished: %d tasks, %d refits', len(report.decisions), report.refits)
    return report
