"""
The hybrid multi-head network.

A shared ReLU trunk feeds three heads: two softmax classifiers (manufacturer
and privileges class of the edge computer) and one ReLU multi-output
regressor for the numeric profile fields. Training is plain mini-batch SGD on
the weighted sum of the per-head losses, with dropout between trunk layers and
early stopping on a validation loss.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .domain import EdgeProfile, FeatureCodec, TrainedPredictor, clamp_profile_row
from .exceptions import DivergenceError, SchemaError
from .metrics import multiclass_f1, mse

logger = logging.getLogger(__name__)

MODEL_VERSION = 1
REGRESSION_BIAS_INIT = 0.5


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    head1_classes: int
    head2_classes: int
    regression_dim: int
    trunk_layers: tuple[int, ...] = (128, 64)
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.regression_dim < 1:
            raise ValueError('input_dim and regression_dim must be at least 1')
        if not self.trunk_layers or min(self.trunk_layers) < 1:
            raise ValueError('trunk layer widths must be at least 1')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError('dropout_rate must lie in [0, 1)')
        if self.head1_classes < 2 or self.head2_classes < 2:
            raise ValueError('each classification head needs at least 2 classes')


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 0.05
    early_stop_patience: int = 5
    validation_fraction: float = 0.2
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 10.0)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError('epochs and batch_size must be at least 1')
        if not self.learning_rate > 0:
            raise ValueError('learning_rate must be positive')
        if self.early_stop_patience < 1:
            raise ValueError('early_stop_patience must be at least 1')
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError('validation_fraction must lie in [0, 1)')
        if len(self.loss_weights) != 3 or min(self.loss_weights) <= 0:
            raise ValueError('loss_weights must be three positive numbers')


class Targets(NamedTuple):
    head1: np.ndarray
    head2: np.ndarray
    regression: np.ndarray

    def subset(self, index):
        return Targets(self.head1[index], self.head2[index], self.regression[index])

    def __len__(self):
        return len(self.head1)


class Losses(NamedTuple):
    head1: float
    head2: float
    regression: float
    total: float


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    head1_loss: float
    head2_loss: float
    regression_loss: float
    total: float
    val_total: float


@dataclass(eq=False)
class HybridModel:
    spec: NetworkSpec
    params: dict[str, np.ndarray]
    codec: FeatureCodec | None = None
    history: list[EpochStats] = field(default_factory=list)

    @property
    def n_trunk(self):
        return len(self.spec.trunk_layers)

    def copy_params(self):
        return {name: value.copy() for name, value in self.params.items()}

    def to_dict(self):
        return {
            'model_version': MODEL_VERSION,
            'spec': {**asdict(self.spec), 'trunk_layers': list(self.spec.trunk_layers)},
            'params': {name: value.tolist() for name, value in self.params.items()},
            'codec': self.codec.to_dict() if self.codec is not None else None,
            'history': [asdict(stats) for stats in self.history],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get('model_version') != MODEL_VERSION:
            raise SchemaError(f"model_version {data.get('model_version')!r} is not supported")
        spec = NetworkSpec(**{**data['spec'], 'trunk_layers': tuple(data['spec']['trunk_layers'])})
        return cls(
            spec=spec,
            params={name: np.array(value, dtype=float) for name, value in data['params'].items()},
            codec=FeatureCodec.from_dict(data['codec']) if data.get('codec') else None,
            history=[EpochStats(**stats) for stats in data['history']],
        )


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(spec, codec=None):
    rng = np.random.default_rng(spec.seed)
    params = {}
    width = spec.input_dim
    for i, out in enumerate(spec.trunk_layers):
        params[f'trunk{i}_W'] = _glorot(rng, width, out)
        params[f'trunk{i}_b'] = np.zeros(out)
        width = out
    for head, size in (('head1', spec.head1_classes), ('head2', spec.head2_classes), ('reg', spec.regression_dim)):
        params[f'{head}_W'] = _glorot(rng, width, size)
        params[f'{head}_b'] = np.zeros(size)
    # targets are MinMax-scaled into [0, 1]; starting mid-range keeps the ReLU output alive
    params['reg_b'][:] = REGRESSION_BIAS_INIT
    return HybridModel(spec=spec, params=params, codec=codec)


def draw_masks(spec, n_rows, rng):
    """Inverted-dropout masks, one per trunk layer."""
    if spec.dropout_rate == 0:
        return None
    keep = 1.0 - spec.dropout_rate
    return [(rng.random((n_rows, width)) < keep) / keep for width in spec.trunk_layers]


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _forward(model, inputs, masks):
    p = model.params
    activations = [inputs]
    pre = []
    hidden = inputs
    for i in range(model.n_trunk):
        z = hidden @ p[f'trunk{i}_W'] + p[f'trunk{i}_b']
        pre.append(z)
        hidden = np.maximum(z, 0.0)
        if masks is not None:
            hidden = hidden * masks[i]
        activations.append(hidden)
    probs1 = _softmax(hidden @ p['head1_W'] + p['head1_b'])
    probs2 = _softmax(hidden @ p['head2_W'] + p['head2_b'])
    z_reg = hidden @ p['reg_W'] + p['reg_b']
    regression = np.maximum(z_reg, 0.0)
    cache = {'activations': activations, 'pre': pre, 'z_reg': z_reg}
    return (probs1, probs2, regression), cache


def _as_batch(model, inputs):
    inputs = np.asarray(inputs, dtype=float)
    single = inputs.ndim == 1
    batch = inputs[np.newaxis, :] if single else inputs
    if batch.shape[1] != model.spec.input_dim:
        raise ValueError(f'dimension mismatch: input has {batch.shape[1]} features, '
                         f'network expects {model.spec.input_dim}')
    return batch, single


def forward(model, inputs, training_mode=False, rng=None, masks=None):
    """
    Head outputs for one input vector or a batch of rows.

    Dropout is active only in training mode, with masks drawn from ``rng``
    unless given explicitly.
    """
    batch, single = _as_batch(model, inputs)
    if training_mode and masks is None:
        masks = draw_masks(model.spec, len(batch), rng if rng is not None else np.random.default_rng())
    outputs, _ = _forward(model, batch, masks if training_mode else None)
    if single:
        return tuple(out[0] for out in outputs)
    return outputs


def _check_classes(labels, n_classes, head):
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f'{head}: class index out of range [0, {n_classes})')
    return labels


def loss(outputs, targets, loss_weights=(1.0, 1.0, 1.0)):
    """Cross-entropy per classification head, MSE on the regression head, and their weighted sum."""
    probs1, probs2, regression = (np.atleast_2d(out) for out in outputs)
    y1 = _check_classes(np.atleast_1d(targets.head1), probs1.shape[1], 'head1')
    y2 = _check_classes(np.atleast_1d(targets.head2), probs2.shape[1], 'head2')
    rows = np.arange(len(probs1))
    l1 = float(-np.mean(np.log(np.maximum(probs1[rows, y1], 1e-12))))
    l2 = float(-np.mean(np.log(np.maximum(probs2[rows, y2], 1e-12))))
    l3 = float(np.mean((regression - np.atleast_2d(targets.regression)) ** 2))
    w1, w2, w3 = loss_weights
    return Losses(l1, l2, l3, w1 * l1 + w2 * l2 + w3 * l3)


def loss_and_gradients(model, inputs, targets, loss_weights=(1.0, 1.0, 1.0), masks=None):
    batch, _ = _as_batch(model, inputs)
    (probs1, probs2, regression), cache = _forward(model, batch, masks)
    losses = loss((probs1, probs2, regression), targets, loss_weights)

    p = model.params
    n = len(batch)
    w1, w2, w3 = loss_weights
    rows = np.arange(n)
    g1 = probs1.copy()
    g1[rows, targets.head1] -= 1.0
    g1 *= w1 / n
    g2 = probs2.copy()
    g2[rows, targets.head2] -= 1.0
    g2 *= w2 / n
    g_reg = w3 * 2.0 * (regression - targets.regression) / regression.size
    g_reg = g_reg * (cache['z_reg'] > 0)

    hidden = cache['activations'][-1]
    grads = {
        'head1_W': hidden.T @ g1, 'head1_b': g1.sum(axis=0),
        'head2_W': hidden.T @ g2, 'head2_b': g2.sum(axis=0),
        'reg_W': hidden.T @ g_reg, 'reg_b': g_reg.sum(axis=0),
    }
    d_hidden = g1 @ p['head1_W'].T + g2 @ p['head2_W'].T + g_reg @ p['reg_W'].T
    for i in reversed(range(model.n_trunk)):
        if masks is not None:
            d_hidden = d_hidden * masks[i]
        dz = d_hidden * (cache['pre'][i] > 0)
        grads[f'trunk{i}_W'] = cache['activations'][i].T @ dz
        grads[f'trunk{i}_b'] = dz.sum(axis=0)
        d_hidden = dz @ p[f'trunk{i}_W'].T
    return losses, grads


def evaluate_losses(model, inputs, targets, loss_weights=(1.0, 1.0, 1.0)):
    return loss(forward(model, inputs), targets, loss_weights)


def _split_validation(inputs, targets, config, rng):
    n = len(inputs)
    n_val = min(int(round(n * config.validation_fraction)), n - config.batch_size)
    if n_val < 1:
        return inputs, targets, inputs, targets
    order = rng.permutation(n)
    val, fit = order[:n_val], order[n_val:]
    return inputs[fit], targets.subset(fit), inputs[val], targets.subset(val)


def train(inputs, targets, spec, config=TrainConfig(), *, validation=None, codec=None):
    """
    Fit a fresh network with mini-batch SGD.

    Without explicit ``validation`` data, ``validation_fraction`` of the rows
    is held out (the training rows themselves when that leaves nothing). The
    returned model carries the weights of the best validation epoch.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise ValueError(f'inputs must be rows of {spec.input_dim} features')
    if len(inputs) < config.batch_size:
        raise ValueError(f'need at least {config.batch_size} training rows, got {len(inputs)}')
    targets = Targets(np.asarray(targets.head1, dtype=int), np.asarray(targets.head2, dtype=int),
                      np.asarray(targets.regression, dtype=float))
    _check_classes(targets.head1, spec.head1_classes, 'head1')
    _check_classes(targets.head2, spec.head2_classes, 'head2')

    rng = np.random.default_rng(spec.seed)
    model = init_model(spec, codec)
    if validation is not None:
        fit_x, fit_t = inputs, targets
        val_x = np.asarray(validation[0], dtype=float)
        val_t = validation[1]
    else:
        fit_x, fit_t, val_x, val_t = _split_validation(inputs, targets, config, rng)

    weights = config.loss_weights
    best_val = np.inf
    best_params = model.copy_params()
    waited = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(fit_x))
        for start in range(0, len(order), config.batch_size):
            rows = order[start:start + config.batch_size]
            masks = draw_masks(spec, len(rows), rng)
            losses, grads = loss_and_gradients(model, fit_x[rows], fit_t.subset(rows), weights, masks)
            if not np.isfinite(losses.total):
                raise DivergenceError(epoch)
            for name, grad in grads.items():
                model.params[name] -= config.learning_rate * grad

        fit_losses = evaluate_losses(model, fit_x, fit_t, weights)
        val_total = evaluate_losses(model, val_x, val_t, weights).total
        if not (np.isfinite(fit_losses.total) and np.isfinite(val_total)):
            raise DivergenceError(epoch)
        model.history.append(EpochStats(epoch, *fit_losses, val_total))
        logger.debug('epoch %d: l1=%.4f l2=%.4f l3=%.4f total=%.4f val=%.4f', epoch, *fit_losses, val_total)

        if val_total < best_val:
            best_val = val_total
            best_params = model.copy_params()
            waited = 0
        else:
            waited += 1
            if waited >= config.early_stop_patience:
                logger.info('early stop after epoch %d, best validation loss %.4f', epoch, best_val)
                break

    model.params = best_params
    return model


def profile_targets(codec, profiles):
    """Split profiles into (manufacturer class, privileges class, scaled numerics) for training."""
    first, second = codec.categorical_fields[:2]
    head1 = np.array([codec.category_index(first, getattr(p, first)) for p in profiles], dtype=int)
    head2 = np.array([codec.category_index(second, getattr(p, second)) for p in profiles], dtype=int)
    regression = np.array([[codec.scale(name, getattr(p, name)) for name in codec.numeric_fields]
                           for p in profiles], dtype=float).reshape(len(profiles), len(codec.numeric_fields))
    return Targets(head1, head2, regression)


def predict_profiles(model, inputs, codec=None):
    codec = codec or model.codec
    probs1, probs2, regression = forward(model, np.atleast_2d(inputs))
    first, second = codec.categorical_fields[:2]
    profiles = []
    for c1, c2, values in zip(probs1.argmax(axis=1), probs2.argmax(axis=1), regression):
        row = {
            first: codec.categorical_maps[first][int(c1)],
            second: codec.categorical_maps[second][int(c2)],
            **codec.decode_numeric_block(values),
        }
        profiles.append(EdgeProfile.from_row(clamp_profile_row(row)))
    return profiles


def predict_profile(model, inputs, codec=None):
    return predict_profiles(model, inputs, codec)[0]


def gradient_check(spec, seed=0, *, loss_weights=(1.0, 1.0, 1.0), batch_size=4, step=1e-5):
    """
    Largest relative gap between backprop and central finite differences.

    The relative error of each parameter is |a - n| / max(|a| + |n|, 1e-3), so
    near-zero gradients are compared on an absolute scale.
    """
    rng = np.random.default_rng(seed)
    model = init_model(spec)
    # non-zero biases keep every pre-activation off the ReLU kink
    for name, param in model.params.items():
        if name.endswith('_b'):
            param[:] = rng.normal(0.0, 0.1, size=param.shape)
    inputs = rng.normal(size=(batch_size, spec.input_dim))
    targets = Targets(
        rng.integers(0, spec.head1_classes, size=batch_size),
        rng.integers(0, spec.head2_classes, size=batch_size),
        rng.random((batch_size, spec.regression_dim)),
    )
    masks = draw_masks(spec, batch_size, rng)
    _, analytic = loss_and_gradients(model, inputs, targets, loss_weights, masks)

    def total():
        return loss_and_gradients(model, inputs, targets, loss_weights, masks)[0].total

    worst = 0.0
    for name, param in model.params.items():
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + step
            upper = total()
            param[index] = original - step
            lower = total()
            param[index] = original
            numeric = (upper - lower) / (2 * step)
            a = analytic[name][index]
            worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), 1e-3))
    return worst


class HybridRegressor:
    """The hybrid network behind the ProfileRegressor contract."""

    name = 'HybridNetwork'

    def __init__(self, codec, *, trunk_layers=(128, 64), dropout_rate=0.2, train_config=TrainConfig(), seed=0,
                 model=None):
        self.codec = codec
        self.trunk_layers = tuple(trunk_layers)
        self.dropout_rate = dropout_rate
        self.train_config = train_config
        self.seed = seed
        self.model = model

    def fit(self, inputs, profiles):
        first, second = self.codec.categorical_fields[:2]
        spec = NetworkSpec(
            input_dim=inputs.shape[1],
            head1_classes=len(self.codec.categorical_maps[first]),
            head2_classes=len(self.codec.categorical_maps[second]),
            regression_dim=len(self.codec.numeric_fields),
            trunk_layers=self.trunk_layers,
            dropout_rate=self.dropout_rate,
            seed=self.seed,
        )
        self.model = train(inputs, profile_targets(self.codec, profiles), spec, self.train_config, codec=self.codec)
        return self

    def predict_profiles(self, inputs):
        if self.model is None:
            raise ValueError('HybridRegressor is not fitted')
        return predict_profiles(self.model, inputs, self.codec)


def head_scores(model, inputs, targets):
    """Macro F1 of both classification heads and the scaled-unit MSE of the regression head."""
    probs1, probs2, regression = forward(model, np.atleast_2d(inputs))
    return {
        'head1_f1': multiclass_f1(targets.head1, probs1.argmax(axis=1)),
        'head2_f1': multiclass_f1(targets.head2, probs2.argmax(axis=1)),
        'regression_mse': mse(targets.regression, regression),
    }


def predictor_to_dict(predictor):
    model = predictor.regressor.model
    return {
        'model_version': MODEL_VERSION,
        'predictor': HybridRegressor.name,
        'input_codec': predictor.input_codec.to_dict(),
        'network': model.to_dict(),
    }


def predictor_from_dict(data):
    if data.get('model_version') != MODEL_VERSION:
        raise SchemaError(f"model_version {data.get('model_version')!r} is not supported")
    try:
        model = HybridModel.from_dict(data['network'])
        input_codec = FeatureCodec.from_dict(data['input_codec'])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f'model file is incomplete: {exc}') from None
    if model.codec is None:
        raise SchemaError('model file has no target codec')
    regressor = HybridRegressor(model.codec, trunk_layers=model.spec.trunk_layers,
                                dropout_rate=model.spec.dropout_rate, seed=model.spec.seed, model=model)
    return TrainedPredictor(input_codec=input_codec, regressor=regressor)
