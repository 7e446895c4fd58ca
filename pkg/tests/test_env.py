import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from popbandit import (ConfigurationError, EnvState, Environment, HorizonError, ModelConfig,
                       arrival_probs, custom, log_power, reset, step)
from popbandit.env import simulate_pulls


def stub(*draws):
    it = iter(draws)
    return lambda: next(it)


def cfg(mu=(0.5, 0.3), theta=(1, 1), alpha=1.0, horizon=100, **kw):
    return ModelConfig(mu, theta, alpha, horizon, **kw)


class TestArrivalProbs:
    def test_equal_popularity_is_uniform(self):
        assert arrival_probs(reset(cfg()), cfg()) == (0.5, 0.5)

    def test_linear(self):
        state = EnvState(1, (1, 0), (1, 0), (2.0, 1.0))
        assert arrival_probs(state, cfg()) == pytest.approx((2 / 3, 1 / 3), abs=1e-15)

    def test_sqrt(self):
        state = EnvState(3, (3, 0), (3, 0), (4.0, 1.0))
        assert arrival_probs(state, cfg(alpha=0.5)) == pytest.approx((2 / 3, 1 / 3), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            arrival_probs(EnvState(0, (0,) * 3, (0,) * 3, (1.0,) * 3), cfg())

    def test_single_arm_always_preferred(self):
        one = ModelConfig((0.4,), (2.0,), 1.0, 50, relaxed=True)
        env = Environment(one)
        rng = np.random.default_rng(1)
        for _ in range(50):
            assert env.probs() == (1.0,)
            env.step(0, rng.random)

    @given(st.lists(st.floats(0.1, 50), min_size=2, max_size=5),
           st.floats(0.1, 3.0), st.floats(0.01, 100))
    def test_scale_invariance(self, pops, alpha, scale):
        m = len(pops)
        c = ModelConfig([0.1 * (i + 1) for i in range(m)], [1] * m, alpha, 10)
        a = arrival_probs(EnvState(0, (0,) * m, (0,) * m, tuple(pops)), c)
        b = arrival_probs(EnvState(0, (0,) * m, (0,) * m, tuple(p * scale for p in pops)), c)
        assert a == pytest.approx(b, rel=1e-9)


class TestStep:
    def test_not_preferred_means_no_reward(self):
        c = cfg(mu=(1.0, 0.3))
        # first draw fails the preference test, second would pay any preferred pull
        out, state = step(reset(c), c, 0, stub(0.99, 0.0))
        assert not out.preferred and out.reward == 0
        assert state.pulls == (1, 0) and state.successes == (0, 0)

    def test_reward_updates_popularity(self):
        c = cfg()
        out, state = step(reset(c), c, 0, stub(0.1, 0.1))
        assert out.preferred and out.reward == 1
        assert state.popularity == (2.0, 1.0)
        assert out.arrival_probs == (0.5, 0.5)

    def test_first_step_success_probability(self):
        c = cfg()
        lam = arrival_probs(reset(c), c)[0]
        assert lam * c.mu[0] == 0.25

    def test_empirical_reward_frequency(self):
        # frozen state N = (3, 1.5); alpha = 0.7 makes lambda irrational-looking
        c = ModelConfig((0.6, 0.3), (1, 1.5), 0.7, 10)
        frozen = EnvState(4, (3, 1), (2, 0), (3.0, 1.5))
        lam = arrival_probs(frozen, c)[0]
        p = lam * c.mu[0]
        env = Environment(c, frozen)
        w0 = env.weights[0]
        uniform = np.random.default_rng(2024).random
        n, hits = 1_000_000, 0
        for _ in range(n):
            hits += env.step(0, uniform).reward
            env.t, env.successes[0], env.weights[0] = 4, 2, w0
        se = math.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) < 3 * se

    def test_horizon_exceeded(self):
        c = cfg(horizon=1)
        _, state = step(reset(c), c, 0, stub(0.9, 0.9))
        with pytest.raises(HorizonError):
            step(state, c, 0, stub(0.9, 0.9))

    def test_bad_arm(self):
        with pytest.raises(ConfigurationError):
            step(reset(cfg()), cfg(), 2, stub(0.5, 0.5))

    def test_consumes_exactly_two_draws(self):
        draws = []

        def u():
            draws.append(None)
            return 0.7

        step(reset(cfg()), cfg(), 1, u)
        assert len(draws) == 2

    def test_determinism(self):
        c = cfg(horizon=200)
        arms = [i % 2 for i in range(200)]
        a = simulate_pulls(c, arms, np.random.default_rng(5))
        b = simulate_pulls(c, arms, np.random.default_rng(5))
        assert a == b


class TestReset:
    def test_theta_becomes_popularity(self):
        s = reset(cfg(theta=(1, 3)))
        assert s.popularity == (1.0, 3.0) and s.t == 0
        assert s.pulls == (0, 0) and s.successes == (0, 0)

    def test_no_steps(self):
        assert sum(reset(cfg()).pulls) == 0


class TestModelConfig:
    @pytest.mark.parametrize("kw", [
        dict(mu=(0.5, 0.5)),
        dict(mu=(0.0, 0.5)),
        dict(mu=(1.2, 0.5)),
        dict(theta=(0, 1)),
        dict(theta=(1, 1, 1)),
        dict(alpha=0.0),
        dict(mu=(0.5,), theta=(1,)),
        dict(horizon=0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            cfg(**kw)

    def test_unique_best_message(self):
        with pytest.raises(ConfigurationError, match="unique best arm"):
            cfg(mu=(0.4, 0.4))

    def test_derived_constants(self):
        c = cfg(mu=(0.2, 0.5, 0.45), theta=(1, 1, 1))
        assert c.best_arm == 1
        assert c.gap == pytest.approx(0.05)
        assert c.floor == 0.2

    def test_externalities(self):
        c = ModelConfig((0.5, 0.3), (1, 1), externality=log_power(0.5), horizon=10)
        assert c.alpha is None
        assert c.externality(math.e - 1) == pytest.approx(2 ** 1.5)
        sq = custom(lambda x: x * x)
        assert ModelConfig((0.5, 0.3), (1, 1), externality=sq).externality(3.0) == 9.0
