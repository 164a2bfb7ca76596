"""
Response time of a task on an edge computer: processing time plus round-trip
propagation time, and the minimum-latency choice among candidates.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import EdgeProfile, TaskRequest


@dataclass(frozen=True)
class LinkModel:
    d2d_threshold_meters: float = 100.0
    d2d_throughput_bps: float = 100e6
    cellular_throughput_bps: float = 20e6

    def __post_init__(self):
        if not self.d2d_threshold_meters > 0:
            raise ValueError('d2d_threshold_meters must be positive')
        if not (self.d2d_throughput_bps > 0 and self.cellular_throughput_bps > 0):
            raise ValueError('link throughputs must be positive')

    def throughput(self, distance_m):
        # boundary inclusive: exactly at the threshold is still D2D
        if distance_m <= self.d2d_threshold_meters:
            return self.d2d_throughput_bps
        return self.cellular_throughput_bps


@dataclass(frozen=True)
class LatencyBreakdown:
    cpu_time_s: float
    prop_time_s: float
    total_s: float


def cpu_time(task: TaskRequest, ec: EdgeProfile):
    if not ec.clock_rate_hz > 0:
        raise ValueError('invalid profile: clock_rate_hz must be positive')
    return task.instruction_count * ec.cpi / ec.clock_rate_hz


def prop_time(task: TaskRequest, distance_m, link: LinkModel):
    if distance_m < 0:
        raise ValueError('distance must be non-negative')
    return 2 * task.message_size_bits / link.throughput(distance_m)


def distance(a, b):
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def response_time(task, requester_loc, ec, ec_loc, link):
    cpu = cpu_time(task, ec)
    prop = prop_time(task, distance(requester_loc, ec_loc), link)
    return LatencyBreakdown(cpu_time_s=cpu, prop_time_s=prop, total_s=cpu + prop)


def response_times(task, requester_loc, profiles, locations, link):
    """Total response time on every profile at once; same arithmetic as response_time."""
    clock = np.array([p.clock_rate_hz for p in profiles], dtype=float)
    if np.any(clock <= 0):
        raise ValueError('invalid profile: clock_rate_hz must be positive')
    cpi = np.array([p.cpi for p in profiles], dtype=float)
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    distances = np.hypot(locations[:, 0] - requester_loc[0], locations[:, 1] - requester_loc[1])
    rate = np.where(distances <= link.d2d_threshold_meters, link.d2d_throughput_bps, link.cellular_throughput_bps)
    return task.instruction_count * cpi / clock + 2 * task.message_size_bits / rate


def argmin_latency(totals, loads):
    """Lowest total wins; ties go to the lower load, then to the lower index."""
    totals = np.asarray(totals, dtype=float)
    return int(np.lexsort((np.arange(len(totals)), np.asarray(loads, dtype=float), totals))[0])


def select_min_latency(task, requester_loc, candidates: Sequence[tuple[EdgeProfile, tuple[float, float]]],
                       link=LinkModel()):
    """
    Index of the candidate with the smallest total response time.

    ``requester_loc`` may also be the requesting DeviceRecord.
    """
    if not candidates:
        raise ValueError('no candidates')
    requester_loc = getattr(requester_loc, 'location', requester_loc)
    profiles = [profile for profile, _ in candidates]
    totals = response_times(task, requester_loc, profiles, [loc for _, loc in candidates], link)
    return argmin_latency(totals, [p.load for p in profiles])
