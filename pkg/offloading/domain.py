"""
Core data types shared by every other module: devices, edge profiles, tasks,
and the feature codec that turns them into vectors and back.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Protocol, Sequence

import numpy as np
from django.db import models

from .exceptions import SchemaError

logger = logging.getLogger(__name__)

CODEC_VERSION = 1
OTHER = '<other>'


class Privileges(models.TextChoices):
    # order is the ordinal encoding used by threshold decoding: Public=0, Private=1
    PUBLIC = 'Public'
    PRIVATE = 'Private'


class Mobility(models.TextChoices):
    MOBILE = 'Mobile'
    STATIC = 'Static'


class DeviceType(models.TextChoices):
    VEHICLE = 'vehicle'
    TABLET = 'tablet'
    MOBILE = 'mobile'
    LAPTOP = 'laptop'
    SENSOR = 'sensor'
    PC = 'pc'
    SMARTPHONE = 'smartphone'
    CAMERA = 'camera'
    METER = 'meter'


class Scaling(models.TextChoices):
    MINMAX = 'MinMax'
    ZSCORE = 'ZScore'


COMPUTATIONAL_TYPES = frozenset(t.value for t in (
    DeviceType.PC,
    DeviceType.LAPTOP,
    DeviceType.SMARTPHONE,
    DeviceType.TABLET,
    DeviceType.VEHICLE,
))

PROFILE_CATEGORICAL = ('manufacturer', 'privileges_class')
PROFILE_NUMERIC = ('clock_rate_hz', 'cpi', 'ram_bytes', 'load', 'availability')
PROFILE_FIELDS = PROFILE_CATEGORICAL + PROFILE_NUMERIC

# clustering looks at hardware and dynamic capacity, not at ownership
CLUSTER_CATEGORICAL = ('manufacturer',)
CLUSTER_NUMERIC = PROFILE_NUMERIC

INPUT_CATEGORICAL = ('requester_privileges', 'requester_mobility', 'requester_device_type')
INPUT_NUMERIC = (
    'instruction_count',
    'message_size_bits',
    'importance',
    'priority',
    'requester_x_meters',
    'requester_y_meters',
    'requester_battery_level',
)
INPUT_LOG_FIELDS = ('instruction_count', 'message_size_bits')

DECLARED_VOCABULARIES = {
    'privileges_class': tuple(Privileges.values),
    'requester_privileges': tuple(Privileges.values),
    'requester_mobility': tuple(Mobility.values),
    'requester_device_type': tuple(DeviceType.values),
}


def _is_missing(value):
    return value is None or (isinstance(value, float) and math.isnan(value))


@dataclass(frozen=True)
class EdgeProfile:
    manufacturer: str
    privileges_class: str
    clock_rate_hz: float
    cpi: float
    ram_bytes: int
    load: float
    availability: float

    def __post_init__(self):
        problems = []
        if not self.clock_rate_hz > 0:
            problems.append(f'clock_rate_hz={self.clock_rate_hz}')
        if not self.cpi >= 1:
            problems.append(f'cpi={self.cpi}')
        if not self.ram_bytes > 0:
            problems.append(f'ram_bytes={self.ram_bytes}')
        if not 0.0 <= self.load <= 1.0:
            problems.append(f'load={self.load}')
        if not 0.0 <= self.availability <= 1.0:
            problems.append(f'availability={self.availability}')
        if problems:
            raise ValueError('invalid profile: ' + ', '.join(problems))

    def as_row(self, prefix=''):
        return {f'{prefix}{key}': value for key, value in asdict(self).items()}

    @classmethod
    def from_row(cls, row, prefix=''):
        return cls(
            manufacturer=str(row[f'{prefix}manufacturer']),
            privileges_class=str(row[f'{prefix}privileges_class']),
            clock_rate_hz=float(row[f'{prefix}clock_rate_hz']),
            cpi=float(row[f'{prefix}cpi']),
            ram_bytes=int(round(float(row[f'{prefix}ram_bytes']))),
            load=float(row[f'{prefix}load']),
            availability=float(row[f'{prefix}availability']),
        )


@dataclass(frozen=True)
class DeviceRecord:
    id: str
    location: tuple[float, float]
    battery_level: float
    privileges: str
    mobility: str
    device_type: str
    edge_profile: EdgeProfile | None = None

    def __post_init__(self):
        if not 0.0 <= self.battery_level <= 1.0:
            raise ValueError(f'device {self.id}: battery_level {self.battery_level} outside [0, 1]')
        computational = self.device_type in COMPUTATIONAL_TYPES
        if computational != (self.edge_profile is not None):
            raise ValueError(
                f'device {self.id}: edge profile must be present exactly for computational types, '
                f'got type {self.device_type!r} with profile={self.edge_profile is not None}'
            )

    @property
    def is_edge_computer(self):
        return self.edge_profile is not None

    def as_row(self):
        x, y = self.location
        row = {
            'id': self.id,
            'x_meters': x,
            'y_meters': y,
            'battery_level': self.battery_level,
            'privileges': str(self.privileges),
            'mobility': str(self.mobility),
            'device_type': str(self.device_type),
        }
        if self.edge_profile is not None:
            row.update(self.edge_profile.as_row())
        else:
            row.update({name: None for name in PROFILE_FIELDS})
        return row

    @classmethod
    def from_row(cls, row):
        device_type = str(row['device_type'])
        profile = EdgeProfile.from_row(row) if device_type in COMPUTATIONAL_TYPES else None
        return cls(
            id=str(row['id']),
            location=(float(row['x_meters']), float(row['y_meters'])),
            battery_level=float(row['battery_level']),
            privileges=str(row['privileges']),
            mobility=str(row['mobility']),
            device_type=device_type,
            edge_profile=profile,
        )


@dataclass(frozen=True)
class TaskRequest:
    requester_id: str
    instruction_count: int
    message_size_bits: int
    importance: int = 1
    priority: int = 1
    timestamp: float = 0.0
    task_id: int = 0

    def __post_init__(self):
        if self.instruction_count <= 0:
            raise ValueError(f'task {self.task_id}: instruction_count must be positive')
        if self.message_size_bits <= 0:
            raise ValueError(f'task {self.task_id}: message_size_bits must be positive')


@dataclass(frozen=True)
class Interaction:
    """One supervised pair: a task, its requester and the profile that served it best."""

    task: TaskRequest
    requester: DeviceRecord
    target: EdgeProfile
    ec_id: str


def input_row(task, requester):
    """Predictor input features of one task and the device that emitted it."""
    x, y = requester.location
    return {
        'requester_privileges': str(requester.privileges),
        'requester_mobility': str(requester.mobility),
        'requester_device_type': str(requester.device_type),
        'instruction_count': task.instruction_count,
        'message_size_bits': task.message_size_bits,
        'importance': task.importance,
        'priority': task.priority,
        'requester_x_meters': x,
        'requester_y_meters': y,
        'requester_battery_level': requester.battery_level,
    }


def threshold_class(value, n_classes):
    """Class i iff value lies in [i - 0.5, i + 0.5); 0.5 itself goes upward."""
    if n_classes <= 1:
        return 0
    return int(np.clip(np.floor(value + 0.5), 0, n_classes - 1))


@dataclass(frozen=True)
class FeatureCodec:
    """
    Fitted encoder for a fixed set of named fields.

    Encoded layout: one one-hot block per categorical field (vocabulary order,
    ``<other>`` last) followed by one scaled value per numeric field, both in
    the order the fields were fitted.
    """

    categorical_maps: dict[str, tuple[str, ...]]
    numeric_scalers: dict[str, tuple[float, float]]
    scheme: str = Scaling.MINMAX
    medians: dict[str, float] = field(default_factory=dict)
    log_fields: frozenset[str] = frozenset()

    @property
    def categorical_fields(self):
        return tuple(self.categorical_maps)

    @property
    def numeric_fields(self):
        return tuple(self.numeric_scalers)

    @property
    def field_order(self):
        return self.categorical_fields + self.numeric_fields

    @property
    def width(self):
        return sum(len(vocab) for vocab in self.categorical_maps.values()) + len(self.numeric_scalers)

    @property
    def ordinal_width(self):
        return len(self.categorical_maps) + len(self.numeric_scalers)

    def n_classes(self, name):
        """Real classes of a categorical field, not counting ``<other>``."""
        return len(self.categorical_maps[name]) - 1

    def category_index(self, name, value):
        vocab = self.categorical_maps[name]
        if _is_missing(value) or str(value) not in vocab:
            return len(vocab) - 1
        return vocab.index(str(value))

    def scale(self, name, value):
        if _is_missing(value):
            value = self.medians[name]
        value = float(value)
        if name in self.log_fields:
            value = math.log(value)
        a, b = self.numeric_scalers[name]
        if self.scheme == Scaling.MINMAX:
            return 0.5 if b == a else (value - a) / (b - a)
        return 0.0 if b == 0 else (value - a) / b

    def unscale(self, name, scaled):
        a, b = self.numeric_scalers[name]
        if self.scheme == Scaling.MINMAX:
            value = a if b == a else scaled * (b - a) + a
        else:
            value = a if b == 0 else scaled * b + a
        if name in self.log_fields:
            value = math.exp(value)
        return value

    def encode_row(self, row: Mapping[str, Any]):
        vector = np.zeros(self.width)
        offset = 0
        for name, vocab in self.categorical_maps.items():
            vector[offset + self.category_index(name, row.get(name))] = 1.0
            offset += len(vocab)
        for name in self.numeric_scalers:
            vector[offset] = self.scale(name, row.get(name))
            offset += 1
        return vector

    def encode_rows(self, rows: Iterable[Mapping[str, Any]]):
        encoded = [self.encode_row(row) for row in rows]
        if not encoded:
            return np.zeros((0, self.width))
        return np.vstack(encoded)

    def _check_length(self, vector, expected):
        if len(vector) != expected:
            raise ValueError(f'vector length {len(vector)} does not match codec width {expected}')

    def decode_row(self, vector):
        vector = np.asarray(vector, dtype=float)
        self._check_length(vector, self.width)
        row = {}
        offset = 0
        for name, vocab in self.categorical_maps.items():
            block = vector[offset:offset + len(vocab)]
            row[name] = vocab[int(np.argmax(block))]
            offset += len(vocab)
        for name in self.numeric_scalers:
            row[name] = self.unscale(name, float(vector[offset]))
            offset += 1
        return row

    def encode_ordinal(self, row: Mapping[str, Any]):
        """Categoricals as class index / (C - 1), numerics scaled; used by the baselines."""
        vector = np.zeros(self.ordinal_width)
        for i, name in enumerate(self.categorical_maps):
            n = self.n_classes(name)
            vector[i] = self.category_index(name, row.get(name)) / (n - 1) if n > 1 else 0.0
        offset = len(self.categorical_maps)
        for j, name in enumerate(self.numeric_scalers):
            vector[offset + j] = self.scale(name, row.get(name))
        return vector

    def decode_ordinal(self, vector):
        vector = np.asarray(vector, dtype=float)
        self._check_length(vector, self.ordinal_width)
        row = {}
        for i, (name, vocab) in enumerate(self.categorical_maps.items()):
            n = self.n_classes(name)
            row[name] = vocab[threshold_class(vector[i] * max(n - 1, 1), n)]
        offset = len(self.categorical_maps)
        for j, name in enumerate(self.numeric_scalers):
            row[name] = self.unscale(name, self._bounded(float(vector[offset + j])))
        return row

    def decode_numeric_block(self, scaled):
        """Physical values of the numeric fields from a predicted scaled block."""
        return {
            name: self.unscale(name, self._bounded(float(value)))
            for name, value in zip(self.numeric_scalers, scaled)
        }

    def _bounded(self, scaled):
        # predictions outside the fitted range are pulled back into it
        if self.scheme == Scaling.MINMAX:
            return min(max(scaled, 0.0), 1.0)
        return scaled

    def to_dict(self):
        return {
            'codec_version': CODEC_VERSION,
            'scheme': str(self.scheme),
            'field_order': list(self.field_order),
            'categorical_maps': {name: list(vocab) for name, vocab in self.categorical_maps.items()},
            'numeric_scalers': {name: list(params) for name, params in self.numeric_scalers.items()},
            'medians': dict(self.medians),
            'log_fields': sorted(self.log_fields),
        }

    @classmethod
    def from_dict(cls, data):
        version = data.get('codec_version')
        if version != CODEC_VERSION:
            raise SchemaError(f'codec_version {version!r} is not supported (expected {CODEC_VERSION})')
        order = data['field_order']
        categorical = {name: tuple(data['categorical_maps'][name]) for name in order
                       if name in data['categorical_maps']}
        numeric = {name: tuple(float(v) for v in data['numeric_scalers'][name]) for name in order
                   if name in data['numeric_scalers']}
        return cls(
            categorical_maps=categorical,
            numeric_scalers=numeric,
            scheme=Scaling(data['scheme']),
            medians={name: float(v) for name, v in data['medians'].items()},
            log_fields=frozenset(data['log_fields']),
        )


def fit_codec(rows, scheme=Scaling.MINMAX, *, categorical=None, numeric=None, log_fields=(),
              vocabularies=None):
    """
    Fit a codec over row mappings.

    Fields not named explicitly are inferred from the first row: string values
    make a categorical field, everything else a numeric one. Declared
    vocabularies (privileges, mobility, device type) keep their enum order;
    other vocabularies are sorted. Every vocabulary gets a trailing ``<other>``
    slot for unseen and missing categories.

    A single row is accepted. Every numeric range is then degenerate, so MinMax
    maps each value to 0.5 and Z-score maps it to 0.0.
    """
    rows = list(rows)
    if not rows:
        raise ValueError('empty dataset')
    scheme = Scaling(scheme)

    if categorical is None or numeric is None:
        names = list(rows[0])
        inferred_cat = [n for n in names
                        if any(isinstance(r.get(n), str) for r in rows if not _is_missing(r.get(n)))]
        categorical = inferred_cat if categorical is None else categorical
        numeric = [n for n in names if n not in categorical] if numeric is None else numeric

    declared = {**DECLARED_VOCABULARIES, **(vocabularies or {})}
    categorical_maps = {}
    for name in categorical:
        if name in declared:
            vocab = tuple(str(v) for v in declared[name])
        else:
            vocab = tuple(sorted({str(r[name]) for r in rows if not _is_missing(r.get(name))}))
        categorical_maps[name] = tuple(v for v in vocab if v != OTHER) + (OTHER,)

    log_fields = frozenset(log_fields)
    numeric_scalers = {}
    medians = {}
    for name in numeric:
        values = np.array([float(r[name]) for r in rows if not _is_missing(r.get(name))])
        if values.size == 0:
            raise ValueError(f'field {name!r} has no values')
        medians[name] = float(np.median(values))
        if name in log_fields:
            if np.any(values <= 0):
                raise ValueError(f'field {name!r} is log-scaled but has non-positive values')
            values = np.log(values)
        if scheme == Scaling.MINMAX:
            numeric_scalers[name] = (float(values.min()), float(values.max()))
        else:
            numeric_scalers[name] = (float(values.mean()), float(values.std()))

    logger.debug('fitted %s codec over %d rows: %d categorical, %d numeric fields',
                 scheme, len(rows), len(categorical_maps), len(numeric_scalers))
    return FeatureCodec(
        categorical_maps=categorical_maps,
        numeric_scalers=numeric_scalers,
        scheme=scheme,
        medians=medians,
        log_fields=log_fields & frozenset(numeric_scalers),
    )


def fit_profile_codec(profiles: Sequence[EdgeProfile], scheme=Scaling.MINMAX):
    return fit_codec([p.as_row() for p in profiles], scheme,
                     categorical=PROFILE_CATEGORICAL, numeric=PROFILE_NUMERIC)


def fit_cluster_codec(profiles: Sequence[EdgeProfile], scheme=Scaling.MINMAX):
    return fit_codec([p.as_row() for p in profiles], scheme,
                     categorical=CLUSTER_CATEGORICAL, numeric=CLUSTER_NUMERIC)


def fit_input_codec(interactions: Sequence[Interaction], scheme=Scaling.ZSCORE):
    return fit_codec([input_row(i.task, i.requester) for i in interactions], scheme,
                     categorical=INPUT_CATEGORICAL, numeric=INPUT_NUMERIC, log_fields=INPUT_LOG_FIELDS)


def encode_interactions(interactions, codec):
    return codec.encode_rows(input_row(i.task, i.requester) for i in interactions)


def ordinal_targets(profiles, codec):
    """Profiles in the ordinal space all predictors are scored in."""
    vectors = [codec.encode_ordinal(p.as_row()) for p in profiles]
    if not vectors:
        return np.zeros((0, codec.ordinal_width))
    return np.vstack(vectors)


def encode_profile(profile, codec):
    return codec.encode_row(profile.as_row())


def decode_profile(vector, codec):
    if set(codec.field_order) != set(PROFILE_FIELDS):
        raise ValueError('codec does not cover every profile field')
    return EdgeProfile.from_row(codec.decode_row(vector))


def clamp_profile_row(row):
    """Pull decoded numerics into the ranges an EdgeProfile accepts."""
    return {
        **row,
        'clock_rate_hz': max(float(row['clock_rate_hz']), 1.0),
        'cpi': max(float(row['cpi']), 1.0),
        'ram_bytes': max(int(round(float(row['ram_bytes']))), 1),
        'load': min(max(float(row['load']), 0.0), 1.0),
        'availability': min(max(float(row['availability']), 0.0), 1.0),
    }


class ProfileRegressor(Protocol):
    """Anything that learns encoded inputs -> EdgeProfile (the hybrid network or a baseline)."""

    name: str

    def fit(self, inputs: np.ndarray, profiles: Sequence[EdgeProfile]) -> 'ProfileRegressor': ...

    def predict_profiles(self, inputs: np.ndarray) -> list[EdgeProfile]: ...


@dataclass
class TrainedPredictor:
    input_codec: FeatureCodec
    regressor: ProfileRegressor

    @property
    def name(self):
        return self.regressor.name

    def predict(self, task, requester):
        inputs = self.input_codec.encode_row(input_row(task, requester))[np.newaxis, :]
        return self.regressor.predict_profiles(inputs)[0]
