"""
Tests for the response-time model: processing time, propagation time, their
sum, and the minimum-latency choice among candidate edge computers.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offloading.latency import (
    LinkModel,
    argmin_latency,
    cpu_time,
    distance,
    prop_time,
    response_time,
    response_times,
    select_min_latency,
)

from tests.conftest import make_device, make_profile, make_task


class TestCpuTime:
    """Processing time is instructions times CPI over the clock rate."""

    def test_worked_examples(self):
        assert cpu_time(make_task(instructions=1_000_000_000), make_profile(cpi=2.0, clock_rate_hz=2e9)) == \
            pytest.approx(1.0, rel=1e-12)
        assert cpu_time(make_task(instructions=1), make_profile(cpi=1.0, clock_rate_hz=1.0)) == 1.0
        assert cpu_time(make_task(instructions=500_000_000), make_profile(cpi=1.5, clock_rate_hz=3e9)) == \
            pytest.approx(0.25, rel=1e-12)

    def test_zero_instructions_rejected_by_task(self):
        with pytest.raises(ValueError):
            make_task(instructions=0)


class TestPropTime:
    """Round-trip propagation time over D2D or cellular links."""

    def test_short_range_uses_d2d_rate(self):
        link = LinkModel(d2d_throughput_bps=16e6)
        assert prop_time(make_task(bits=8_000_000), 10.0, link) == pytest.approx(1.0, rel=1e-12)

    def test_long_range_uses_cellular_rate(self):
        link = LinkModel(cellular_throughput_bps=1e6)
        assert prop_time(make_task(bits=1000), 5000.0, link) == pytest.approx(0.002, rel=1e-12)

    def test_threshold_distance_is_still_d2d(self):
        link = LinkModel(d2d_threshold_meters=100.0, d2d_throughput_bps=10e6, cellular_throughput_bps=1e6)
        assert link.throughput(100.0) == 10e6
        assert link.throughput(100.0001) == 1e6

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            prop_time(make_task(), -1.0, LinkModel())

    def test_invalid_link_rejected(self):
        with pytest.raises(ValueError):
            LinkModel(d2d_throughput_bps=0)


class TestResponseTime:
    """The breakdown sums its parts and matches the vectorised form."""

    def test_total_is_sum_of_components(self):
        link = LinkModel(d2d_throughput_bps=16e6)
        result = response_time(make_task(), (0.0, 0.0), make_profile(cpi=2.0, clock_rate_hz=2e9), (3.0, 4.0), link)
        assert result.cpu_time_s == pytest.approx(1.0)
        assert result.prop_time_s == pytest.approx(1.0)
        assert result.total_s == result.cpu_time_s + result.prop_time_s

    def test_colocated_tiny_message_is_almost_cpu_time(self):
        result = response_time(make_task(bits=1), (5.0, 5.0), make_profile(), (5.0, 5.0), LinkModel())
        assert result.total_s == pytest.approx(result.cpu_time_s, rel=1e-6)

    def test_vectorised_totals_equal_scalar_totals(self):
        rng = np.random.default_rng(3)
        profiles = [make_profile(clock_rate_hz=float(c), cpi=float(p))
                    for c, p in zip(rng.uniform(1e9, 4e9, 10), rng.uniform(1, 4, 10))]
        locations = rng.uniform(0, 500, size=(10, 2))
        task = make_task(instructions=123_456_789, bits=654_321)
        totals = response_times(task, (250.0, 250.0), profiles, locations, LinkModel())
        for profile, location, total in zip(profiles, locations, totals):
            assert response_time(task, (250.0, 250.0), profile, tuple(location), LinkModel()).total_s == total

    def test_distance_is_euclidean(self):
        assert distance((0, 0), (3, 4)) == 5.0


class TestSelectMinLatency:
    """The chosen candidate is the brute-force argmin with deterministic tie-breaks."""

    def test_single_candidate(self):
        assert select_min_latency(make_task(), (0, 0), [(make_profile(), (1.0, 1.0))]) == 0

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError, match='no candidates'):
            select_min_latency(make_task(), (0, 0), [])

    def test_nearer_of_two_identical_ecs_wins(self):
        candidates = [(make_profile(), (10_000.0, 0.0)), (make_profile(), (10.0, 0.0))]
        assert select_min_latency(make_task(), (0.0, 0.0), candidates) == 1

    def test_ties_go_to_lower_load_then_lower_index(self):
        assert argmin_latency([1.0, 1.0, 1.0], [0.5, 0.2, 0.2]) == 1
        assert argmin_latency([2.0, 1.0], [0.0, 0.9]) == 1

    def test_accepts_device_record_as_requester(self):
        requester = make_device('req', location=(0.0, 0.0))
        candidates = [(make_profile(), (500.0, 0.0)), (make_profile(), (5.0, 0.0))]
        assert select_min_latency(make_task(), requester, candidates) == 1

    def test_matches_exhaustive_scan_on_random_instances(self):
        rng = np.random.default_rng(11)
        link = LinkModel()
        for _ in range(1000):
            n = int(rng.integers(1, 51))
            candidates = [
                (make_profile(clock_rate_hz=float(rng.uniform(1e9, 4e9)), cpi=float(rng.uniform(1, 4)),
                              load=float(rng.uniform(0, 1))),
                 (float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000))))
                for _ in range(n)
            ]
            task = make_task(instructions=int(rng.integers(1, 10**10)), bits=int(rng.integers(1, 10**8)))
            requester = (float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000)))
            totals = [response_time(task, requester, p, loc, link).total_s for p, loc in candidates]
            best = min(range(n), key=lambda i: (totals[i], candidates[i][0].load, i))
            assert select_min_latency(task, requester, candidates, link) == best


class TestMonotonicity:
    """Response time moves the right way when one input changes."""

    @settings(max_examples=100, deadline=None)
    @given(
        instructions=st.integers(1, 10**10),
        bits=st.integers(1, 10**8),
        cpi=st.floats(1.0, 8.0),
        clock=st.floats(1e8, 5e9),
        dist=st.floats(0.0, 2000.0),
        factor=st.floats(1.0, 10.0),
    )
    def test_monotone_in_each_input(self, instructions, bits, cpi, clock, dist, factor):
        link = LinkModel()
        base = response_time(make_task(instructions=instructions, bits=bits), (0.0, 0.0),
                             make_profile(cpi=cpi, clock_rate_hz=clock), (dist, 0.0), link).total_s

        def total(task_kwargs=None, profile_kwargs=None):
            task = make_task(**{'instructions': instructions, 'bits': bits, **(task_kwargs or {})})
            profile = make_profile(**{'cpi': cpi, 'clock_rate_hz': clock, **(profile_kwargs or {})})
            return response_time(task, (0.0, 0.0), profile, (dist, 0.0), link).total_s

        assert total({'instructions': int(instructions * factor)}) >= base
        assert total({'bits': int(bits * factor)}) >= base
        assert total(profile_kwargs={'cpi': cpi * factor}) >= base
        assert total(profile_kwargs={'clock_rate_hz': clock * factor}) <= base
