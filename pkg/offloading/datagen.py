"""
Synthetic IoT populations and task/edge-computer interaction datasets.

Edge profiles are drawn around a small set of hardware archetypes so that the
population carries a known cluster structure. Every archetype owns a hotspot
where its edge computers live; requesters live in hotspots too.
Availability follows the saturation model: one truncated-normal base level
per RAM size, plus truncated-normal per-device noise centred on that base.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import (
    COMPUTATIONAL_TYPES,
    DeviceRecord,
    DeviceType,
    EdgeProfile,
    Interaction,
    Mobility,
    Privileges,
    TaskRequest,
)
from .latency import LinkModel, select_min_latency

logger = logging.getLogger(__name__)

GIB = 2 ** 30

MOBILE_TYPES = frozenset({'vehicle', 'smartphone', 'tablet', 'laptop', 'mobile'})
MAINS_POWERED_TYPES = frozenset({'pc', 'meter'})
PUBLIC_ARCHETYPE_TYPES = frozenset({'pc'})

# derived RNG streams, so helpers can recompute them from the seed alone
ARCHETYPE_STREAM = 1
AVAILABILITY_STREAM = 2

INSTRUCTION_RANGE = (1e6, 1e10)
MESSAGE_BITS_RANGE = (1e3, 1e8)


@dataclass(frozen=True)
class GenConfig:
    n_devices: int = 16216
    private_fraction: float = 14600 / 16216
    computational_fraction: float = 0.1
    area_side_meters: float = 1000.0
    hotspot_radius_meters: float = 40.0
    seed: int = 0
    availability_mean: float = 0.6
    availability_std: float = 0.2
    noise_std: float = 0.05
    load_mean: float = 0.35
    load_std: float = 0.2
    ram_levels: tuple[int, ...] = (2 * GIB, 4 * GIB, 8 * GIB, 16 * GIB, 32 * GIB)
    manufacturer_vocab: tuple[str, ...] = ('amd', 'apple', 'arm', 'intel', 'mediatek', 'qualcomm')
    clock_rate_range_hz: tuple[float, float] = (1.0e9, 4.0e9)
    cpi_range: tuple[float, float] = (1.0, 4.0)
    speed_spread: float = 0.2
    n_latent_clusters: int = 6
    sensor_type_weights: dict[str, float] = field(default_factory=lambda: {
        'sensor': 0.4, 'mobile': 0.25, 'camera': 0.2, 'meter': 0.15,
    })

    def __post_init__(self):
        if self.n_devices < 1:
            raise ValueError('n_devices must be positive')
        for name in ('private_fraction', 'computational_fraction'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f'{name} must lie in [0, 1]')
        for name in ('area_side_meters', 'hotspot_radius_meters'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} must be positive')
        for name in ('availability_mean', 'load_mean'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f'{name} must lie in [0, 1]')
        for name in ('availability_std', 'noise_std', 'load_std'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be non-negative')
        for name in ('clock_rate_range_hz', 'cpi_range'):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f'{name}: lo must be below hi')
        if self.clock_rate_range_hz[0] <= 0:
            raise ValueError('clock rates must be positive')
        if self.cpi_range[0] < 1:
            raise ValueError('cpi_range must start at 1 or above')
        if not 0.0 <= self.speed_spread < 1.0:
            raise ValueError('speed_spread must lie in [0, 1)')
        if not self.ram_levels or min(self.ram_levels) <= 0:
            raise ValueError('ram_levels must be a non-empty list of positive sizes')
        if not self.manufacturer_vocab:
            raise ValueError('manufacturer_vocab must not be empty')
        if self.n_latent_clusters < 1:
            raise ValueError('n_latent_clusters must be at least 1')
        unknown = set(self.sensor_type_weights) - set(DeviceType.values)
        if unknown or set(self.sensor_type_weights) & COMPUTATIONAL_TYPES:
            raise ValueError('sensor_type_weights must name non-computational device types only')
        if sum(self.sensor_type_weights.values()) <= 0 or min(self.sensor_type_weights.values()) < 0:
            raise ValueError('sensor_type_weights must be non-negative and not all zero')


@dataclass(frozen=True)
class Archetype:
    manufacturer: str
    device_type: str
    clock_rate_hz: float
    cpi: float
    ram_bytes: int
    home: tuple[float, float]

    @property
    def privileges(self):
        if self.device_type in PUBLIC_ARCHETYPE_TYPES:
            return Privileges.PUBLIC.value
        return Privileges.PRIVATE.value


def truncated_normal(rng, mean, std, size, low=0.0, high=1.0):
    """Normal draws restricted to [low, high] by resampling the rejects."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (size,)).copy()
    out = rng.normal(mean, std)
    rejected = (out < low) | (out > high)
    while rejected.any():
        out[rejected] = rng.normal(mean[rejected], std)
        rejected = (out < low) | (out > high)
    return out


def hardware_archetypes(config):
    """
    Hardware archetypes on a speed ladder, each with its own hotspot.

    Clock rates are evenly spaced over ``clock_rate_range_hz``. The time per
    instruction (CPI over clock rate) starts at ``cpi_range[0]`` cycles of the
    slowest clock and shrinks by ``speed_spread`` towards the fastest
    archetype, so CPI rises almost as fast as the clock. Hotspots are the
    centres of distinct cells of a square grid laid over the area.
    """
    rng = np.random.default_rng([config.seed, ARCHETYPE_STREAM])
    n = config.n_latent_clusters
    clock_lo, clock_hi = config.clock_rate_range_hz
    rank = rng.permutation(n)
    clocks = np.linspace(clock_lo, clock_hi, n)[rank]
    seconds_per_instruction = config.cpi_range[0] / clock_lo * (1.0 - config.speed_spread * rank / max(n - 1, 1))
    cpis = np.clip(clocks * seconds_per_instruction, *config.cpi_range)
    rams = sorted(config.ram_levels)
    ram_pick = rng.permutation(n) % len(rams)

    side = math.ceil(math.sqrt(n))
    cell = config.area_side_meters / side
    cells = rng.permutation(side * side)[:n]
    homes = np.column_stack([(cells % side + 0.5) * cell, (cells // side + 0.5) * cell])

    types = [t.value for t in (DeviceType.PC, DeviceType.LAPTOP, DeviceType.SMARTPHONE,
                               DeviceType.TABLET, DeviceType.VEHICLE)]
    return [
        Archetype(
            manufacturer=config.manufacturer_vocab[i % len(config.manufacturer_vocab)],
            device_type=types[i % len(types)],
            clock_rate_hz=float(clocks[i]),
            cpi=float(cpis[i]),
            ram_bytes=int(rams[ram_pick[i]]),
            home=(float(homes[i, 0]), float(homes[i, 1])),
        )
        for i in range(n)
    ]


def availability_levels(config):
    """Base availability of each RAM size; more RAM, less saturated."""
    rng = np.random.default_rng([config.seed, AVAILABILITY_STREAM])
    rams = sorted(config.ram_levels)
    levels = np.sort(truncated_normal(rng, config.availability_mean, config.availability_std, len(rams)))
    return {int(ram): float(level) for ram, level in zip(rams, levels)}


def _jitter(rng, value, lo, hi, rel=0.02):
    return float(np.clip(value * np.exp(rng.normal(0.0, rel)), lo, hi))


def _proportional_labels(rng, weights, size):
    """Label indices in exact proportion to ``weights`` (largest remainder), shuffled."""
    share = weights / weights.sum() * size
    counts = np.floor(share).astype(int)
    counts[np.argsort(counts - share, kind='stable')[:size - counts.sum()]] += 1
    return rng.permutation(np.repeat(np.arange(len(weights)), counts))


def _scatter(rng, centres, radius, side):
    """Uniform points in discs of ``radius`` around each centre, clipped to the area."""
    distance = radius * np.sqrt(rng.uniform(size=len(centres)))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=len(centres))
    offsets = np.column_stack([distance * np.cos(angle), distance * np.sin(angle)])
    return np.clip(centres + offsets, 0.0, side)


def _private_flags(rng, computational, archetype_public, n_public):
    """
    Exactly ``n_public`` public devices. Edge computers keep their archetype's
    class while the public budget lasts; requesters take the remaining public
    slots, and private edge computers only once requesters run out.
    """
    public = np.zeros(len(computational), dtype=bool)
    public_ecs = np.flatnonzero(archetype_public)
    if len(public_ecs) > n_public:
        public[rng.permutation(public_ecs)[:n_public]] = True
        return ~public
    public[public_ecs] = True
    needed = n_public - len(public_ecs)
    requesters = rng.permutation(np.flatnonzero(~computational))
    public[requesters[:needed]] = True
    needed -= min(needed, len(requesters))
    if needed:
        private_ecs = np.flatnonzero(computational & ~archetype_public)
        public[rng.permutation(private_ecs)[:needed]] = True
    return ~public


def generate_population(config: GenConfig):
    """
    Devices clustered in one hotspot per archetype.

    Edge computers sit in the hotspot of their archetype and requesters in a
    random hotspot, so a requester reaches exactly one archetype over D2D.
    Sensor types follow ``sensor_type_weights`` exactly, up to rounding.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_devices
    n_comp = round(n * config.computational_fraction)
    n_private = round(n * config.private_fraction)

    computational = np.zeros(n, dtype=bool)
    computational[rng.permutation(n)[:n_comp]] = True
    battery = rng.uniform(0.05, 1.0, size=n)

    archetypes = hardware_archetypes(config)
    archetype_of = rng.permutation(np.arange(n_comp) % len(archetypes))
    levels = availability_levels(config)
    comp_ram = np.array([archetypes[a].ram_bytes for a in archetype_of], dtype=float)
    loads = truncated_normal(rng, config.load_mean, config.load_std, n_comp)
    availability = truncated_normal(rng, [levels[int(r)] for r in comp_ram], config.noise_std, n_comp)

    sensor_types = list(config.sensor_type_weights)
    weights = np.array([config.sensor_type_weights[t] for t in sensor_types], dtype=float)
    sensor_draw = _proportional_labels(rng, weights, n - n_comp)

    hotspot = np.empty(n, dtype=int)
    hotspot[computational] = archetype_of
    hotspot[~computational] = rng.integers(0, len(archetypes), size=n - n_comp)
    homes = np.array([a.home for a in archetypes])
    locations = _scatter(rng, homes[hotspot], config.hotspot_radius_meters, config.area_side_meters)

    archetype_public = np.zeros(n, dtype=bool)
    archetype_public[computational] = [archetypes[a].privileges == Privileges.PUBLIC.value for a in archetype_of]
    private = _private_flags(rng, computational, archetype_public, n - n_private)

    devices = []
    comp_i = sensor_i = 0
    for i in range(n):
        privileges = Privileges.PRIVATE.value if private[i] else Privileges.PUBLIC.value
        profile = None
        if computational[i]:
            arch = archetypes[archetype_of[comp_i]]
            device_type = arch.device_type
            profile = EdgeProfile(
                manufacturer=arch.manufacturer,
                privileges_class=privileges,
                clock_rate_hz=_jitter(rng, arch.clock_rate_hz, *config.clock_rate_range_hz),
                cpi=_jitter(rng, arch.cpi, *config.cpi_range),
                ram_bytes=arch.ram_bytes,
                load=float(loads[comp_i]),
                availability=float(availability[comp_i]),
            )
            comp_i += 1
        else:
            device_type = sensor_types[sensor_draw[sensor_i]]
            sensor_i += 1
        devices.append(DeviceRecord(
            id=f'dev-{i:05d}',
            location=(float(locations[i, 0]), float(locations[i, 1])),
            battery_level=1.0 if device_type in MAINS_POWERED_TYPES else float(battery[i]),
            privileges=privileges,
            mobility=Mobility.MOBILE.value if device_type in MOBILE_TYPES else Mobility.STATIC.value,
            device_type=device_type,
            edge_profile=profile,
        ))

    logger.info('generated %d devices (%d edge computers, %d private) with seed %d',
                n, n_comp, n_private, config.seed)
    return devices


def resample_dynamics(population, config, rng):
    """Redraw load and availability of every edge computer from the generative model."""
    levels = availability_levels(config)
    ecs = [i for i, d in enumerate(population) if d.is_edge_computer]
    base = [levels.get(population[i].edge_profile.ram_bytes, config.availability_mean) for i in ecs]
    loads = truncated_normal(rng, config.load_mean, config.load_std, len(ecs))
    availability = truncated_normal(rng, base, config.noise_std, len(ecs))
    refreshed = list(population)
    for j, i in enumerate(ecs):
        profile = replace(population[i].edge_profile, load=float(loads[j]), availability=float(availability[j]))
        refreshed[i] = replace(population[i], edge_profile=profile)
    return refreshed


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def sample_tasks(requesters, n_tasks, rng, *, start_s=0.0, mean_interarrival_s=1.0, first_task_id=0):
    """Tasks with log-uniform sizes and Poisson arrivals, each from a random requester."""
    if not requesters:
        raise ValueError('no requesting devices')
    instructions = np.maximum(np.rint(_log_uniform(rng, *INSTRUCTION_RANGE, n_tasks)), 1)
    message_bits = np.maximum(np.rint(_log_uniform(rng, *MESSAGE_BITS_RANGE, n_tasks)), 1)
    importance = rng.integers(1, 4, size=n_tasks)
    priority = rng.integers(1, 4, size=n_tasks)
    timestamps = start_s + np.cumsum(rng.exponential(mean_interarrival_s, size=n_tasks))
    who = rng.integers(0, len(requesters), size=n_tasks)
    return [
        TaskRequest(
            requester_id=requesters[who[i]].id,
            instruction_count=int(instructions[i]),
            message_size_bits=int(message_bits[i]),
            importance=int(importance[i]),
            priority=int(priority[i]),
            timestamp=float(timestamps[i]),
            task_id=first_task_id + i,
        )
        for i in range(n_tasks)
    ]


def is_eligible(profile, availability_min):
    return profile.availability >= availability_min and profile.load < 1.0


def generate_interactions(population, n_tasks, seed, *, link=LinkModel(), availability_min=0.2,
                          mean_interarrival_s=1.0):
    """
    Training pairs whose target is the latency-optimal eligible edge computer.

    Each task comes from a non-computational requester; its target is the
    profile that minimises response time among edge computers with
    availability >= ``availability_min`` and load < 1.
    """
    requesters = [d for d in population if not d.is_edge_computer]
    ecs = [d for d in population if d.is_edge_computer and is_eligible(d.edge_profile, availability_min)]
    if not ecs:
        raise ValueError('no computational devices')
    if not requesters:
        raise ValueError('no requesting devices')

    by_id = {d.id: d for d in requesters}
    candidates = [(d.edge_profile, d.location) for d in ecs]
    rng = np.random.default_rng(seed)
    interactions = []
    for task in sample_tasks(requesters, n_tasks, rng, mean_interarrival_s=mean_interarrival_s):
        requester = by_id[task.requester_id]
        best = ecs[select_min_latency(task, requester.location, candidates, link)]
        interactions.append(Interaction(task=task, requester=requester, target=best.edge_profile, ec_id=best.id))

    logger.info('generated %d interactions over %d eligible edge computers', len(interactions), len(ecs))
    return interactions
