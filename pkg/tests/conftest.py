import pytest

from offloading.datagen import GenConfig, generate_interactions, generate_population
from offloading.domain import DeviceRecord, EdgeProfile, TaskRequest

GIB = 2 ** 30


def make_profile(**overrides):
    fields = {
        'manufacturer': 'intel',
        'privileges_class': 'Public',
        'clock_rate_hz': 2.0e9,
        'cpi': 2.0,
        'ram_bytes': 8 * GIB,
        'load': 0.3,
        'availability': 0.8,
    }
    fields.update(overrides)
    return EdgeProfile(**fields)


def make_device(device_id, location=(0.0, 0.0), profile=None, device_type=None, **overrides):
    fields = {
        'id': device_id,
        'location': location,
        'battery_level': 1.0,
        'privileges': 'Public',
        'mobility': 'Static',
        'device_type': device_type or ('pc' if profile is not None else 'sensor'),
        'edge_profile': profile,
    }
    fields.update(overrides)
    return DeviceRecord(**fields)


def make_task(requester_id='req', instructions=1_000_000_000, bits=8_000_000, task_id=0, **overrides):
    return TaskRequest(requester_id=requester_id, instruction_count=instructions, message_size_bits=bits,
                       task_id=task_id, **overrides)


@pytest.fixture
def small_gen_config():
    """300 devices, a fifth of them edge computers drawn around 3 archetypes."""
    return GenConfig(n_devices=300, computational_fraction=0.2, seed=7, n_latent_clusters=3)


@pytest.fixture
def population(small_gen_config):
    return generate_population(small_gen_config)


@pytest.fixture
def interactions(population):
    """120 latency-optimal training pairs over the small population."""
    return generate_interactions(population, 120, seed=7)
