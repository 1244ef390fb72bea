"""Clock accounting: synchronous rounds, hero runs, async completions."""

import pytest
from hypothesis import given, settings, strategies as st

from sgdtime.methods import MethodConfig, RoundTrace
from sgdtime.schedules import ScheduleParams
from sgdtime.timemodel import (
    TimeModel,
    async_completion_schedule,
    async_round_time,
    charge,
    hero_total_time,
    sync_round_time,
)


class TestSyncRound:
    def test_reference_values(self):
        tm = TimeModel(h_seconds=0.5, tau_seconds=2.0)
        assert sync_round_time(tm, 5) == 4.5
        assert 10 * sync_round_time(tm, 5) == 45.0

    def test_zero_compute(self):
        assert sync_round_time(TimeModel(0.0, 3.0), 7) == 3.0

    def test_zero_communication(self):
        assert sync_round_time(TimeModel(1.5, 0.0), 1) == 1.5

    def test_rejects_bad_K(self):
        with pytest.raises(ValueError):
            sync_round_time(TimeModel(1.0, 1.0), 0)

    @given(tau=st.floats(min_value=0, max_value=1e3),
           h=st.floats(min_value=0, max_value=1e3),
           K=st.integers(min_value=1, max_value=100))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_every_knob(self, tau, h, K):
        tm = TimeModel(h, tau)
        base = sync_round_time(tm, K)
        assert sync_round_time(TimeModel(h, tau + 1.0), K) >= base
        assert sync_round_time(TimeModel(h + 1.0, tau), K) >= base
        assert sync_round_time(tm, K + 1) >= base


class TestHeroTotal:
    def test_reference_values(self):
        assert hero_total_time(TimeModel(1.0, 5.0), 7) == 7.0
        assert hero_total_time(TimeModel(0.0, 5.0), 10**6) == 0.0
        assert hero_total_time(TimeModel(0.25, 0.0), 8) == 2.0

    def test_no_communication_charge(self):
        # tau never enters a single-worker run
        assert hero_total_time(TimeModel(1.0, 100.0), 3) == \
            hero_total_time(TimeModel(1.0, 0.0), 3)


class TestAsyncSchedule:
    def test_equal_speeds_reduce_to_sync(self):
        tm = TimeModel(h_seconds=1.0, tau_seconds=2.0)
        for n, K in [(2, 2), (4, 3), (1, 5)]:
            assert async_round_time(tm, None, n * K, n) == \
                sync_round_time(tm, K)

    def test_unequal_speeds_hand_example(self):
        # worker 2 at speed 3 finishes at 1/3, 2/3, 1; worker 1 at 1
        tm = TimeModel(h_seconds=1.0, tau_seconds=0.5)
        assert async_round_time(tm, (1.0, 3.0), 4, 2) == 0.5 + 1.0

    def test_single_gradient_waits_for_fastest(self):
        tm = TimeModel(h_seconds=2.0, tau_seconds=1.0)
        assert async_round_time(tm, (1.0, 4.0), 1, 2) == 1.0 + 2.0 / 4.0

    def test_four_speeds_hand_schedule(self):
        # speeds (1, 2, 1, 0.5), h=1: completion times per worker are
        # multiples of 1, 0.5, 1, 2; the 6th completion lands at t=2
        tm = TimeModel(h_seconds=1.0, tau_seconds=0.0)
        counts, order, finish = async_completion_schedule(
            tm, (1.0, 2.0, 1.0, 0.5), 6, 4)
        assert finish == 2.0
        assert counts == [2, 3, 1, 0]
        assert sum(counts) == 6
        assert len(order) == 6

    def test_tie_break_lowest_worker_index(self):
        tm = TimeModel(h_seconds=1.0, tau_seconds=0.0)
        counts, order, _ = async_completion_schedule(tm, (1.0, 1.0, 1.0), 3, 3)
        assert order == [(0, 0), (1, 0), (2, 0)]
        assert counts == [1, 1, 1]

    def test_doubling_speeds_halves_compute_exactly(self):
        tm = TimeModel(h_seconds=1.0, tau_seconds=0.25)
        speeds = (1.0, 3.0, 0.7)
        slow = async_round_time(tm, speeds, 7, 3) - tm.tau_seconds
        fast = async_round_time(tm, tuple(2 * s for s in speeds), 7, 3) \
            - tm.tau_seconds
        assert fast == slow / 2.0

    def test_rejects_bad_budget_and_speeds(self):
        tm = TimeModel(1.0, 1.0)
        with pytest.raises(ValueError):
            async_round_time(tm, None, 0, 2)
        with pytest.raises(ValueError):
            async_round_time(tm, (1.0,), 2, 2)
        with pytest.raises(ValueError):
            async_round_time(tm, (1.0, -1.0), 2, 2)

    @given(b=st.integers(min_value=1, max_value=40),
           n=st.integers(min_value=1, max_value=6),
           seed=st.integers(min_value=0, max_value=100))
    @settings(max_examples=100, deadline=None)
    def test_counts_conserve_budget(self, b, n, seed):
        import random
        rng = random.Random(seed)
        speeds = tuple(rng.uniform(0.2, 4.0) for _ in range(n))
        tm = TimeModel(h_seconds=1.0, tau_seconds=0.0)
        counts, order, finish = async_completion_schedule(tm, speeds, b, n)
        assert sum(counts) == b
        assert len(order) == b
        assert finish > 0.0


def _sync_config(K, R, variant="dual_local_sgd"):
    return MethodConfig(variant=variant, n=2, K=K, R=R,
                        schedule=ScheduleParams(eta_g=0.1, eta_l=0.1))


def _rows(R, workers=2, K=2):
    return [RoundTrace(t, 1.0, 1.0, 0.0, (K,) * workers) for t in range(R)]


class TestCharge:
    def test_empty_trace(self):
        assert charge([], TimeModel(1.0, 1.0), _sync_config(2, 0)) == []

    def test_sync_cumulative_times(self):
        tm = TimeModel(h_seconds=1.0, tau_seconds=1.0)
        out = charge(_rows(3), tm, _sync_config(2, 3))
        assert [r.sim_time_s for r in out] == [3.0, 6.0, 9.0]

    def test_idempotent(self):
        tm = TimeModel(h_seconds=0.5, tau_seconds=2.0)
        once = charge(_rows(4), tm, _sync_config(2, 4))
        twice = charge(once, tm, _sync_config(2, 4))
        assert [r.sim_time_s for r in once] == [r.sim_time_s for r in twice]

    def test_round_zero_row_costs_nothing(self):
        # a run with R=0 reports the start point with no local work
        tm = TimeModel(1.0, 1.0)
        rows = [RoundTrace(0, 1.0, 1.0, 0.0, ())]
        out = charge(rows, tm, _sync_config(2, 0))
        assert out[0].sim_time_s == 0.0

    def test_hero_uses_compute_only(self):
        tm = TimeModel(h_seconds=0.25, tau_seconds=99.0)
        cfg = MethodConfig(variant="hero_sgd", n=1, K=1, R=8,
                           schedule=ScheduleParams(eta_g=0.1))
        out = charge([RoundTrace(t, 1.0, 1.0, 0.0, (1,)) for t in range(8)],
                     tm, cfg)
        assert out[-1].sim_time_s == 2.0

    def test_async_equal_speed_matches_sync(self):
        tm = TimeModel(h_seconds=1.0, tau_seconds=2.0)
        cfg = MethodConfig(variant="decaying_async", n=2, K=2, R=3,
                           schedule=ScheduleParams(eta_g=0.1),
                           async_budget_b=4)
        out = charge([RoundTrace(t, 1.0, 1.0, 0.0, (2, 2)) for t in range(3)],
                     tm, cfg)
        sync = charge(_rows(3), tm, _sync_config(2, 3))
        assert [r.sim_time_s for r in out] == [r.sim_time_s for r in sync]
