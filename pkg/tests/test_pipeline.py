"""
Tests for the offloading flow: routing, fallback, saturation, periodic
re-clustering and whole scenarios.
"""

import numpy as np
import pandas as pd
import pytest

from offloading.datagen import GenConfig, is_eligible, sample_tasks
from offloading.exceptions import NetworkSaturatedError
from offloading.latency import select_min_latency
from offloading.neural import TrainConfig
from offloading.pipeline import (
    DECISION_COLUMNS,
    PipelineConfig,
    advance_time,
    build_state,
    choose_k,
    edge_computer_points,
    offload,
    run_scenario,
)

from tests.conftest import make_device, make_profile, make_task


class FixedPredictor:
    name = 'fixed'

    def __init__(self, profile):
        self.profile = profile

    def predict(self, task, requester):
        return self.profile


class OraclePredictor:
    """Names the profile of the truly fastest eligible edge computer."""

    name = 'oracle'

    def __init__(self, population, availability_min=0.2):
        self.ecs = [d for d in population if d.is_edge_computer and is_eligible(d.edge_profile, availability_min)]

    def predict(self, task, requester):
        candidates = [(d.edge_profile, d.location) for d in self.ecs]
        return self.ecs[select_min_latency(task, requester.location, candidates)].edge_profile


def two_ec_population(first_availability=0.8):
    return [
        make_device('fast', location=(0.0, 10.0), profile=make_profile(
            manufacturer='intel', clock_rate_hz=4e9, cpi=1.0, availability=first_availability)),
        make_device('slow', location=(0.0, -10.0), profile=make_profile(
            manufacturer='amd', clock_rate_hz=1e9, cpi=4.0, availability=0.9)),
        make_device('req', location=(0.0, 0.0)),
    ]


def requester_tasks(population, n, seed=0):
    requesters = [d for d in population if not d.is_edge_computer]
    return sample_tasks(requesters, n, np.random.default_rng(seed), mean_interarrival_s=5.0)


class TestOffload:
    """One routing decision at a time."""

    def test_single_edge_computer(self):
        population = [make_device('ec', profile=make_profile()), make_device('req', location=(30.0, 40.0))]
        state = build_state(population, FixedPredictor(make_profile(manufacturer='amd')), 1)
        decision = offload(state, make_task())
        assert decision.chosen_ec_id == 'ec'
        assert decision.regret == 1.0
        assert decision.fallback_used is False

    def test_load_goes_up_on_the_chosen_edge_computer(self):
        population = [make_device('ec', profile=make_profile(load=0.3)), make_device('req')]
        state = build_state(population, FixedPredictor(make_profile()), 1)
        offload(state, make_task())
        assert state.device('ec').edge_profile.load == pytest.approx(0.35)
        assert len(state.decisions) == 1

    def test_load_bump_gates_a_task_at_the_same_instant(self):
        population = [make_device('fast', profile=make_profile(load=0.98)),
                      make_device('spare', profile=make_profile(manufacturer='amd', clock_rate_hz=1e9, cpi=4.0)),
                      make_device('req')]
        state = build_state(population, FixedPredictor(make_profile()), 1)
        assert offload(state, make_task(task_id=0)).chosen_ec_id == 'fast'
        assert state.device('fast').edge_profile.load == 1.0
        assert offload(state, make_task(task_id=1)).chosen_ec_id == 'spare'

    def test_fallback_when_routed_cluster_is_ineligible(self):
        population = two_ec_population(first_availability=0.1)
        state = build_state(population, FixedPredictor(population[0].edge_profile), 2)
        decision = offload(state, make_task())
        assert decision.fallback_used is True
        assert decision.chosen_ec_id == 'slow'
        assert decision.cluster_index != decision.routed_cluster
        assert decision.regret == 1.0

    def test_saturated_network(self):
        population = [make_device('ec', profile=make_profile(availability=0.1)),
                      make_device('busy', profile=make_profile(load=1.0, manufacturer='amd')),
                      make_device('req')]
        state = build_state(population, FixedPredictor(make_profile()), 2)
        with pytest.raises(NetworkSaturatedError, match='network saturated'):
            offload(state, make_task())

    def test_single_cluster_always_finds_the_optimum(self, population):
        state = build_state(population, FixedPredictor(make_profile()), 1)
        for task in requester_tasks(population, 25):
            assert offload(state, task).regret == pytest.approx(1.0)

    def test_oracle_predictor_has_no_regret(self, population):
        for task in requester_tasks(population, 10, seed=1):
            state = build_state(population, OraclePredictor(population), 4, seed=2)
            decision = offload(state, task)
            assert decision.regret == pytest.approx(1.0)
            assert decision.fallback_used is False

    def test_regret_is_at_least_one(self, population):
        state = build_state(population, FixedPredictor(make_profile(manufacturer='amd', clock_rate_hz=1e9)), 5)
        for task in requester_tasks(population, 60, seed=3):
            decision = offload(state, task)
            assert decision.regret >= 1.0
            assert decision.latency.total_s > 0

    def test_decision_row_columns(self):
        population = two_ec_population()
        state = build_state(population, FixedPredictor(population[1].edge_profile), 2)
        assert list(offload(state, make_task()).as_row()) == DECISION_COLUMNS


class TestAdvanceTime:
    """Dynamics are redrawn on every step, clusters at period boundaries."""

    @pytest.fixture
    def state(self, population, small_gen_config):
        return build_state(population, FixedPredictor(make_profile()), 3, gen_config=small_gen_config,
                           config=PipelineConfig(recluster_period_s=100.0), seed=1)

    def test_no_boundary_no_refit(self, state):
        advance_time(state, 99.0)
        assert state.refit_count == 0
        assert state.clock_s == 99.0

    def test_one_boundary_one_refit(self, state):
        advance_time(state, 60.0)
        advance_time(state, 60.0)
        assert state.refit_count == 1
        assert state.fitted_at_s == 120.0
        assert state.cluster_model.k == 3

    def test_several_boundaries_coalesce(self, state):
        advance_time(state, 350.0)
        assert state.refit_count == 1

    def test_dynamics_change_every_step(self, state):
        before = [d.edge_profile.load for d in state.population if d.is_edge_computer]
        advance_time(state, 1.0)
        after = [d.edge_profile.load for d in state.population if d.is_edge_computer]
        assert before != after

    def test_advancing_redraws_a_bumped_load(self, state, population):
        """Load increments last only until the clock moves."""
        decision = offload(state, requester_tasks(population, 1)[0])
        bumped = state.device(decision.chosen_ec_id).edge_profile.load
        advance_time(state, 1.0)
        assert state.device(decision.chosen_ec_id).edge_profile.load != bumped

    def test_time_must_move_forward(self, state):
        with pytest.raises(ValueError):
            advance_time(state, 0.0)


class TestChooseK:

    def test_elbow_choice_within_range(self, population):
        _, _, points = edge_computer_points(population)
        assert 2 <= choose_k(points) <= 12

    def test_too_few_points_for_a_sweep(self):
        assert choose_k(np.array([[0.0], [1.0]])) == 2

    def test_no_edge_computers(self):
        with pytest.raises(ValueError, match='no computational devices'):
            edge_computer_points([make_device('s')])


@pytest.mark.slow
class TestRunScenario:
    """Whole scenarios on a small population."""

    gen_config = GenConfig(n_devices=200, computational_fraction=0.2, n_latent_clusters=3)

    def test_same_seed_same_decisions(self):
        config = PipelineConfig(training_tasks=40, n_tasks=30, k=3, predictor='KNeighbors',
                                recluster_period_s=50.0)
        first = run_scenario(self.gen_config, config, seed=5)
        second = run_scenario(self.gen_config, config, seed=5)
        pd.testing.assert_frame_equal(first.to_frame(), second.to_frame())
        assert first.refits > 0
        assert first.predictor == 'KNeighbors'

    def test_hybrid_scenario_summary(self):
        config = PipelineConfig(training_tasks=40, n_tasks=20, k=3)
        report = run_scenario(self.gen_config, config, seed=6, train_config=TrainConfig(epochs=2, batch_size=8),
                              trunk_layers=(8,), dropout_rate=0.0)
        summary = report.summary()
        assert summary['tasks'] == 20
        assert summary['predictor'] == 'HybridNetwork'
        assert summary['regret_mean'] >= 1.0
        assert summary['latency_p50_s'] <= summary['latency_p95_s'] <= summary['latency_p99_s']
        assert 0.0 <= summary['fallback_rate'] <= 1.0

    def test_in_scenario_hybrid_keeps_regret_low(self):
        """Three archetypes, 50 edge computers, 500 tasks, default training."""
        gen_config = GenConfig(n_devices=250, computational_fraction=0.2, n_latent_clusters=3)
        report = run_scenario(gen_config, PipelineConfig(training_tasks=500, n_tasks=500), seed=0)
        regrets = report.to_frame()['regret']
        assert len(regrets) == 500
        assert (regrets >= 1.0).all()
        assert regrets.mean() <= 1.25


class TestPipelineConfig:

    def test_unknown_predictor(self):
        with pytest.raises(ValueError, match='unknown predictor'):
            PipelineConfig(predictor='Oracle')

    def test_bad_period(self):
        with pytest.raises(ValueError):
            PipelineConfig(recluster_period_s=0)
