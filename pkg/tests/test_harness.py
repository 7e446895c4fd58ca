import math
import time

import numpy as np
import pytest

from popbandit import ConfigurationError, ModelConfig, PolicyDescriptor
from popbandit.analytic import oracle_bounds
from popbandit.bruteforce import exact_expected_reward
from popbandit.harness import (Baseline, ExperimentSpec, RunRecord, aggregate, default_threads,
                               estimate_oracle_baseline, replication_bitgen, run_experiment,
                               run_replication, run_replications, sweep)

UCB = PolicyDescriptor("ucb", {"gamma": 3})


def spec(policy=UCB, T=500, reps=40, **kw):
    return ExperimentSpec(ModelConfig((0.5, 0.3), (1, 1), 1.0, T), policy, reps, **kw)


def test_replication_deterministic():
    s = spec(record_trajectory=True)
    assert run_replication(s, 7) == run_replication(s, 7)
    assert run_replication(s, 7) != run_replication(s, 8)


def test_batch_matches_single_runs():
    s = spec()
    batch = run_replications(s)
    assert [run_replication(s, i) for i in (0, 13, 39)] == [batch[0], batch[13], batch[39]]


@pytest.mark.parametrize("name", ["oracle", "ucb", "rec", "be", "beae"])
def test_reward_equals_success_total(name):
    for r in run_replications(spec(PolicyDescriptor(name), reps=10)):
        assert r.total_reward == sum(r.successes)
        assert sum(r.pulls) == 500


def test_thread_count_does_not_change_results(two_arm_config):
    s = ExperimentSpec(two_arm_config.with_horizon(2000), PolicyDescriptor("beae"), 64)
    assert run_replications(s, threads=1) == run_replications(s, threads=4)


def test_oracle_replication_is_fast(two_arm_config):
    s = ExperimentSpec(two_arm_config, PolicyDescriptor("oracle"), 1)
    run_replication(s, 0)
    start = time.perf_counter()
    run_replication(s, 1)
    assert time.perf_counter() - start < 1.0


def test_streams_disjoint():
    a = np.random.Generator(replication_bitgen(5, 0, 0)).random(8)
    b = np.random.Generator(replication_bitgen(5, 0, 1)).random(8)
    c = np.random.Generator(replication_bitgen(5, 1, 0)).random(8)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestBaseline:
    def test_single_step(self):
        s = spec(T=1, oracle_replications=10_000)
        b = estimate_oracle_baseline(s)
        assert abs(b.mean - 0.25) < 3 * b.se

    def test_within_analytic_bounds(self):
        s = spec(T=1000, oracle_replications=2000)
        b = estimate_oracle_baseline(s)
        assert oracle_bounds(s.config).contains(b.mean, slack=3 * b.se)

    def test_certain_best_arm_matches_enumeration(self):
        c = ModelConfig((1.0, 0.4), (1, 2), 1.0, 5)
        b = estimate_oracle_baseline(ExperimentSpec(c, UCB, 1, oracle_replications=20_000))
        exact = exact_expected_reward(PolicyDescriptor("oracle"), c)
        assert abs(b.mean - exact) < 4 * b.se


class TestAggregate:
    def rec(self, i, reward, starved=False):
        return RunRecord(i, reward, (reward, 0), (10, 0), starved)

    def test_values(self):
        agg = aggregate([self.rec(0, 3), self.rec(1, 5, True), self.rec(2, 4)], 6.0)
        np.testing.assert_array_equal(agg.samples, [3, 1, 2])
        assert agg.mean == 2.0 and agg.se == pytest.approx(1 / math.sqrt(3))
        assert agg.starvation_frequency == pytest.approx(1 / 3)
        assert agg.quantiles[0.5] == 2.0 and agg.mean_reward == 4.0

    def test_order_independent(self):
        rs = [self.rec(i, i * 3 % 7) for i in range(7)]
        a = aggregate(rs, Baseline(5.0, 0.1, 10))
        b = aggregate(rs[::-1], Baseline(5.0, 0.1, 10))
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.baseline_se == 0.1

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([], 1.0)


def test_starvation_flag():
    s = spec(PolicyDescriptor("ucb"), T=200, reps=200)
    for r in run_replications(s):
        assert r.starved == (r.successes[0] == 0)


def test_trajectory_recording():
    s = spec(T=3000, reps=2, record_trajectory=True)
    r = run_replication(s, 0)
    assert len(r.trajectory.times) <= 512 and r.trajectory.times[-1] == 3000
    assert r.trajectory.reward[-1] == r.total_reward


def test_experiment_and_sweep():
    base = spec(T=300, reps=20, oracle_replications=100)
    res = run_experiment(base)
    assert res.aggregate.replications == 20 and res.baseline.replications == 100
    out = sweep([base, base.with_horizon(600)])
    assert [r.spec.config.horizon for r in out] == [300, 600]
    assert out[0].aggregate.mean == res.aggregate.mean
    with pytest.raises(ConfigurationError):
        sweep([])


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        spec(reps=0)
    with pytest.raises(ConfigurationError):
        spec(base_seed=-1)


def test_thread_env(monkeypatch):
    monkeypatch.setenv("BANDIT_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("BANDIT_THREADS", "zero")
    with pytest.raises(ConfigurationError):
        default_threads()
    monkeypatch.delenv("BANDIT_THREADS")
    assert default_threads() >= 1
