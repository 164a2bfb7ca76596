"""
Baseline regressors and the cross-validation harness that ranks them against
the hybrid network.

Baselines regress the whole ordinal target vector of a profile. Categorical
entries are decoded back to classes with equal-width thresholds, so a binary
field splits at 0.5.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from django.conf import settings
from django.db import models
from sklearn.ensemble import GradientBoostingRegressor
from sklearn.linear_model import ElasticNet, Lasso, LinearRegression
from sklearn.model_selection import KFold, LeaveOneOut
from sklearn.multioutput import MultiOutputRegressor
from sklearn.neighbors import KNeighborsRegressor
from sklearn.tree import DecisionTreeRegressor

from .domain import (
    EdgeProfile,
    TrainedPredictor,
    clamp_profile_row,
    encode_interactions,
    fit_input_codec,
    fit_profile_codec,
    ordinal_targets,
)
from .exceptions import ConfigError, CrossValidationError, EdgecastError
from .metrics import per_sample_squared_errors

logger = logging.getLogger(__name__)

HYBRID = 'HybridNetwork'
DEFAULT_FOLDS = 10


class BaselineKind(models.TextChoices):
    LINEAR_REGRESSION = 'LinearRegression'
    LASSO = 'Lasso'
    ELASTIC_NET = 'ElasticNet'
    DECISION_TREE = 'DecisionTree'
    K_NEIGHBORS = 'KNeighbors'
    MULTI_OUTPUT = 'MultiOutputWrapper'
    GRADIENT_BOOSTING = 'GradientBoosting'


DEFAULT_HYPERPARAMETERS = {
    BaselineKind.LINEAR_REGRESSION: {},
    BaselineKind.LASSO: {'alpha': 0.1},
    BaselineKind.ELASTIC_NET: {'alpha': 0.1, 'l1_ratio': 0.5},
    BaselineKind.DECISION_TREE: {'max_depth': 8, 'min_samples_leaf': 5},
    BaselineKind.K_NEIGHBORS: {'n_neighbors': 5},
    BaselineKind.MULTI_OUTPUT: {'n_estimators': 200, 'learning_rate': 0.1, 'max_depth': 3},
    BaselineKind.GRADIENT_BOOSTING: {'n_estimators': 200, 'learning_rate': 0.1, 'max_depth': 3},
}

# name -> (type, check, message)
_RULES = {
    'alpha': (float, lambda v: v > 0, 'must be positive'),
    'l1_ratio': (float, lambda v: 0 <= v <= 1, 'must lie in [0, 1]'),
    'max_depth': (int, lambda v: v >= 1, 'must be at least 1'),
    'min_samples_leaf': (int, lambda v: v >= 1, 'must be at least 1'),
    'n_neighbors': (int, lambda v: v >= 1, 'must be at least 1'),
    'n_estimators': (int, lambda v: v >= 1, 'must be at least 1'),
    'learning_rate': (float, lambda v: v > 0, 'must be positive'),
}


def validate_hyperparameters(kind, hyperparameters=None):
    """Defaults of ``kind`` overlaid with ``hyperparameters``, each value checked."""
    try:
        kind = BaselineKind(kind)
    except ValueError:
        raise ConfigError(f'unknown baseline {kind!r}') from None
    merged = dict(DEFAULT_HYPERPARAMETERS[kind])
    for name, value in (hyperparameters or {}).items():
        if name not in merged:
            raise ConfigError(f'{kind}: unknown hyperparameter {name!r}')
        cast, check, message = _RULES[name]
        try:
            value = cast(value)
        except (TypeError, ValueError):
            raise ConfigError(f'{kind}: {name} {message}') from None
        if not check(value):
            raise ConfigError(f'{kind}: {name} {message}')
        merged[name] = value
    return merged


class StagewiseBoostingRegressor:
    """
    Multi-output gradient boosting on squared loss.

    Every stage fits one regression tree to the current residuals of all
    outputs together and adds it with shrinkage. ``train_errors_`` holds the
    training MSE before the first stage and after each one.
    """

    def __init__(self, n_estimators=200, learning_rate=0.1, max_depth=3, random_state=None):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self._flat = y.ndim == 1
        targets = y.reshape(len(y), -1)
        self.init_ = targets.mean(axis=0)
        predicted = np.tile(self.init_, (len(targets), 1))
        self.trees_ = []
        self.train_errors_ = [float(np.mean((targets - predicted) ** 2))]
        for _ in range(self.n_estimators):
            tree = DecisionTreeRegressor(max_depth=self.max_depth, random_state=self.random_state)
            tree.fit(X, targets - predicted)
            predicted = predicted + self.learning_rate * tree.predict(X).reshape(targets.shape)
            self.trees_.append(tree)
            self.train_errors_.append(float(np.mean((targets - predicted) ** 2)))
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        predicted = np.tile(self.init_, (len(X), 1))
        for tree in self.trees_:
            predicted += self.learning_rate * tree.predict(X).reshape(predicted.shape)
        return predicted[:, 0] if self._flat else predicted


def make_estimator(kind, hyperparameters=None, seed=0, n_rows=None):
    """A fresh, unfitted estimator for ``kind``."""
    params = validate_hyperparameters(kind, hyperparameters)
    kind = BaselineKind(kind)
    if kind == BaselineKind.LINEAR_REGRESSION:
        return LinearRegression()
    if kind == BaselineKind.LASSO:
        return Lasso(alpha=params['alpha'], tol=1e-6, max_iter=10000)
    if kind == BaselineKind.ELASTIC_NET:
        return ElasticNet(alpha=params['alpha'], l1_ratio=params['l1_ratio'], tol=1e-6, max_iter=10000)
    if kind == BaselineKind.DECISION_TREE:
        return DecisionTreeRegressor(max_depth=params['max_depth'], min_samples_leaf=params['min_samples_leaf'],
                                     random_state=seed)
    if kind == BaselineKind.K_NEIGHBORS:
        k = params['n_neighbors'] if n_rows is None else min(params['n_neighbors'], n_rows)
        return KNeighborsRegressor(n_neighbors=k)
    if kind == BaselineKind.MULTI_OUTPUT:
        return MultiOutputRegressor(GradientBoostingRegressor(
            n_estimators=params['n_estimators'],
            learning_rate=params['learning_rate'],
            max_depth=params['max_depth'],
            random_state=seed,
        ))
    return StagewiseBoostingRegressor(
        n_estimators=params['n_estimators'],
        learning_rate=params['learning_rate'],
        max_depth=params['max_depth'],
        random_state=seed,
    )


def decode_thresholded(vector, codec):
    return EdgeProfile.from_row(clamp_profile_row(codec.decode_ordinal(vector)))


def predict_with_thresholds(estimator, inputs, codec):
    """Profile predicted by a fitted estimator for one encoded input row."""
    predicted = np.asarray(estimator.predict(np.atleast_2d(inputs)), dtype=float)
    return decode_thresholded(predicted.reshape(1, -1)[0], codec)


class BaselineRegressor:
    """A baseline estimator behind the ProfileRegressor contract."""

    def __init__(self, kind, codec, hyperparameters=None, seed=0):
        self.kind = BaselineKind(kind)
        self.codec = codec
        self.hyperparameters = validate_hyperparameters(self.kind, hyperparameters)
        self.seed = seed
        self.estimator = None

    @property
    def name(self):
        return str(self.kind)

    def fit(self, inputs, profiles):
        if len(profiles) < 2:
            raise ValueError('need at least 2 training rows')
        targets = ordinal_targets(profiles, self.codec)
        self.estimator = make_estimator(self.kind, self.hyperparameters, self.seed, n_rows=len(profiles))
        self.estimator.fit(np.asarray(inputs, dtype=float), targets)
        return self

    def predict_profiles(self, inputs):
        if self.estimator is None:
            raise ValueError(f'{self.name} is not fitted')
        predicted = np.asarray(self.estimator.predict(np.atleast_2d(inputs)), dtype=float)
        predicted = predicted.reshape(len(predicted), -1)
        return [decode_thresholded(row, self.codec) for row in predicted]


def fit_baseline(kind, interactions, *, hyperparameters=None, seed=0, input_codec=None, target_codec=None):
    """Fit one baseline on interaction rows; codecs are fitted on the same rows unless given."""
    if len(interactions) < 2:
        raise ValueError('need at least 2 training rows')
    input_codec = input_codec or fit_input_codec(interactions)
    profiles = [i.target for i in interactions]
    target_codec = target_codec or fit_profile_codec(profiles)
    regressor = BaselineRegressor(kind, target_codec, hyperparameters, seed)
    regressor.fit(encode_interactions(interactions, input_codec), profiles)
    return TrainedPredictor(input_codec=input_codec, regressor=regressor)


@dataclass(frozen=True)
class CVResult:
    mse: float
    sigma2: float
    fold_count: int
    skipped: int
    protocol: str
    errors: np.ndarray = field(repr=False)


def _protocol(n, folds, cap):
    cap = settings.EDGECAST_LOOCV_CAP if cap is None else cap
    if n < 3:
        raise ValueError(f'cross-validation needs at least 3 rows, got {n}')
    if folds is None:
        if n > cap:
            raise CrossValidationError(
                f'leave-one-out refused for {n} rows (cap {cap}); '
                f'use k-fold mode (for example --folds {DEFAULT_FOLDS})'
            )
        return LeaveOneOut(), 'LOOCV'
    if not 2 <= folds <= n:
        raise ValueError(f'folds must lie in [2, {n}]')
    return None, f'{folds}-fold'


def cross_validate(fit_predict, targets, *, seed=0, folds=None, cap=None, jobs=1):
    """
    Score ``fit_predict(train_index, test_index) -> predicted targets`` fold by fold.

    Leave-one-out unless ``folds`` is given. MSE is the mean over rows of the
    per-row squared error averaged across target dimensions; sigma2 is the
    variance of those per-row errors. Folds that fail to fit are skipped.
    """
    targets = np.asarray(targets, dtype=float)
    splitter, protocol = _protocol(len(targets), folds, cap)
    if splitter is None:
        splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(splitter.split(targets))

    def run(split):
        train, test = split
        try:
            predicted = np.asarray(fit_predict(train, test), dtype=float)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError, EdgecastError) as exc:
            logger.warning('fold with %d held-out rows skipped: %s', len(test), exc)
            return None
        return per_sample_squared_errors(targets[test], predicted.reshape(targets[test].shape))

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        results = list(pool.map(run, splits))

    kept = [errors for errors in results if errors is not None]
    if not kept:
        raise CrossValidationError('every fold failed to fit')
    errors = np.concatenate(kept)
    return CVResult(
        mse=float(np.mean(errors)),
        sigma2=float(np.var(errors)),
        fold_count=len(kept),
        skipped=len(results) - len(kept),
        protocol=protocol,
        errors=errors,
    )


@dataclass(frozen=True)
class CVRow:
    model: str
    mse: float
    sigma2: float
    fold_count: int
    skipped: int
    protocol: str


def loocv_evaluate(factory, inputs, profiles, codec, *, name=None, seed=0, folds=None, cap=None, jobs=1):
    """
    Cross-validate one ProfileRegressor.

    ``factory`` builds a fresh regressor for every fold. Predictions are
    decoded to profiles and scored against the truth in ``codec``'s ordinal
    space, the same space for every model.
    """
    inputs = np.asarray(inputs, dtype=float)
    profiles = list(profiles)
    truth = ordinal_targets(profiles, codec)

    def fit_predict(train, test):
        regressor = factory()
        regressor.fit(inputs[train], [profiles[i] for i in train])
        return ordinal_targets(regressor.predict_profiles(inputs[test]), codec)

    name = name or factory().name
    result = cross_validate(fit_predict, truth, seed=seed, folds=folds, cap=cap, jobs=jobs)
    logger.debug('%s: mse %.6g sigma2 %.6g over %d folds', name, result.mse, result.sigma2, result.fold_count)
    if result.skipped:
        logger.warning('%s: %d of %d folds skipped', name, result.skipped, result.skipped + result.fold_count)
    return CVRow(name, result.mse, result.sigma2, result.fold_count, result.skipped, result.protocol)


@dataclass
class CVReport:
    rows: list[CVRow]
    seed: int
    protocol: str
    hyperparameters: dict = field(default_factory=dict)

    @property
    def fold_count(self):
        return max((row.fold_count + row.skipped for row in self.rows), default=0)

    @property
    def best_baseline(self):
        baselines = [row for row in self.rows if row.model != HYBRID]
        return baselines[0].model if baselines else None

    def to_frame(self):
        return pd.DataFrame([
            {'model': r.model, 'mse': r.mse, 'sigma2': r.sigma2, 'folds': r.fold_count, 'skipped': r.skipped,
             'protocol': r.protocol}
            for r in self.rows
        ], columns=['model', 'mse', 'sigma2', 'folds', 'skipped', 'protocol'])

    def to_table(self):
        best = self.best_baseline
        lines = [
            f'{"Model":<20} {"MSE":>12} {"sigma2":>12}  ({self.protocol}; sigma2 = variance of per-row squared error)',
        ]
        for row in self.rows:
            note = ''
            if row.model == HYBRID:
                note = '  hybrid'
            elif row.model == best:
                note = '  best baseline'
            lines.append(f'{row.model:<20} {row.mse:>12.6f} {row.sigma2:>12.6f}{note}')
        return '\n'.join(lines) + '\n'


def baseline_factories(codec, hyperparameters=None, seed=0, kinds=None):
    hyperparameters = hyperparameters or {}
    kinds = list(BaselineKind) if kinds is None else [BaselineKind(k) for k in kinds]

    def factory(kind):
        return lambda: BaselineRegressor(kind, codec, hyperparameters.get(str(kind)), seed)

    return {str(kind): factory(kind) for kind in kinds}


def compare_all(inputs, profiles, codec, factories, *, seed=0, folds=None, cap=None, jobs=1, hyperparameters=None):
    """Cross-validate every named factory under one fold protocol; rows sorted by MSE."""
    if not factories:
        raise ValueError('no models to compare')
    rows = []
    for name, factory in factories.items():
        logger.info('cross-validating %s', name)
        rows.append(loocv_evaluate(factory, inputs, profiles, codec, name=name, seed=seed, folds=folds,
                                   cap=cap, jobs=jobs))
    rows.sort(key=lambda row: (row.mse, row.model))
    report = CVReport(rows=rows, seed=seed, protocol=rows[0].protocol, hyperparameters=dict(hyperparameters or {}))
    logger.info('best baseline: %s', report.best_baseline)
    return report
