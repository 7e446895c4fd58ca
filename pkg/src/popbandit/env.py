"""Arrival-and-reward process with self-reinforcing popularity.

At every step a user arrives and prefers each arm ``a`` independently with
probability ``lambda_a = f(N_a) / sum_b f(N_b)``, where ``N_a`` is the
popularity of the arm (its accumulated successes plus an initial bias
``theta_a``).  The pulled arm pays a Bernoulli(``mu_a``) reward only when
the user prefers it.

Only the pulled arm's membership in the preference set changes the outcome,
so :func:`step` draws that single membership (one uniform) followed by the
reward uniform.  Exactly two uniforms are consumed per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence


class ConfigurationError(ValueError):
    """Invalid model configuration or mismatched state."""


class HorizonError(RuntimeError):
    """Raised when stepping past the configured horizon."""


@dataclass(frozen=True)
class Externality:
    """Increasing positive map from popularity to preference weight.

    Built-in kinds are ``"power"`` (``x**param``) and ``"log_power"``
    (``(1 + log(1 + x))**param``).  ``"custom"`` wraps an arbitrary callable
    and is only supported by the pure-Python simulation backend.
    """

    kind: str
    param: float = 1.0
    func: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("power", "log_power", "custom"):
            raise ConfigurationError(f"unknown externality kind {self.kind!r}")
        if self.kind == "custom":
            if self.func is None:
                raise ConfigurationError("custom externality needs a callable")
        elif not (self.param > 0 and math.isfinite(self.param)):
            raise ConfigurationError("externality parameter must be positive")

    def __call__(self, x: float) -> float:
        if self.kind == "power":
            return x ** self.param
        if self.kind == "log_power":
            return (1.0 + math.log1p(x)) ** self.param
        return float(self.func(x))

    @property
    def builtin(self) -> bool:
        return self.kind != "custom"

    def describe(self) -> dict:
        if self.kind == "power":
            return {"name": "power", "alpha": self.param}
        if self.kind == "log_power":
            return {"name": "log_power", "epsilon": self.param - 1.0}
        return {"name": getattr(self.func, "__name__", "custom")}


def power(alpha: float) -> Externality:
    """``f(x) = x**alpha``."""
    return Externality("power", float(alpha))


def log_power(epsilon: float) -> Externality:
    """``f(x) = (1 + ln(1 + x))**(1 + epsilon)``, the slowest growth for which UCB starves."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    return Externality("log_power", 1.0 + float(epsilon))


def custom(func: Callable[[float], float]) -> Externality:
    return Externality("custom", 1.0, func)


@dataclass(frozen=True)
class ModelConfig:
    """Arms, reward means, initial popularities, externality and horizon.

    ``relaxed=True`` lifts the model assumptions (``m >= 2``, ``mu > 0``,
    unique best arm) so degenerate instances can be built in tests.
    """

    mu: tuple[float, ...]
    theta: tuple[float, ...]
    alpha: float | None = 1.0
    horizon: int = 1000
    externality: Externality | None = None
    relaxed: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(x) for x in self.mu))
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        if self.externality is None:
            if self.alpha is None:
                raise ConfigurationError("either alpha or an externality is required")
            if not (self.alpha > 0 and math.isfinite(self.alpha)):
                raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
            object.__setattr__(self, "externality", power(self.alpha))
        elif self.externality.kind == "power":
            object.__setattr__(self, "alpha", self.externality.param)
        else:
            object.__setattr__(self, "alpha", None)
        self._validate()

    def _validate(self):
        m = len(self.mu)
        if len(self.theta) != m:
            raise ConfigurationError(
                f"mu has {m} entries but theta has {len(self.theta)}")
        if m < (1 if self.relaxed else 2):
            raise ConfigurationError("at least two arms are required")
        for a, x in enumerate(self.mu):
            if not (0.0 < x <= 1.0 or (self.relaxed and x == 0.0)):
                raise ConfigurationError(f"mu[{a}]={x} outside (0, 1]")
        for a, x in enumerate(self.theta):
            if not (x > 0 and math.isfinite(x)):
                raise ConfigurationError(f"theta[{a}]={x} must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigurationError(f"horizon must be a positive integer, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        if not self.relaxed and self.mu.count(max(self.mu)) > 1:
            raise ConfigurationError("the model requires a unique best arm (duplicate maximal mu)")

    @property
    def m(self) -> int:
        return len(self.mu)

    @property
    def best_arm(self) -> int:
        return max(range(self.m), key=lambda a: (self.mu[a], -a))

    @property
    def gap(self) -> float:
        """Smallest suboptimality gap delta."""
        best = self.mu[self.best_arm]
        others = [best - x for a, x in enumerate(self.mu) if a != self.best_arm]
        return min(others) if others else math.inf

    @property
    def floor(self) -> float:
        """Smallest mean reward Delta."""
        return min(self.mu)

    def with_horizon(self, horizon: int) -> "ModelConfig":
        return ModelConfig(self.mu, self.theta, self.alpha, horizon,
                           self.externality, self.relaxed)


@dataclass(frozen=True)
class EnvState:
    t: int
    pulls: tuple[int, ...]
    successes: tuple[int, ...]
    popularity: tuple[float, ...]


@dataclass(frozen=True)
class StepOutcome:
    t: int
    arm_pulled: int
    preferred: bool
    reward: int
    arrival_probs: tuple[float, ...]


def reset(config: ModelConfig) -> EnvState:
    m = config.m
    return EnvState(0, (0,) * m, (0,) * m, tuple(config.theta))


def _check(state: EnvState, config: ModelConfig):
    m = config.m
    if not (len(state.pulls) == len(state.successes) == len(state.popularity) == m):
        raise ConfigurationError(
            f"state has {len(state.pulls)} arms, config has {m}")


def arrival_probs(state: EnvState, config: ModelConfig) -> tuple[float, ...]:
    """Per-arm preference probabilities for the next arrival.

    Each entry is an independent membership probability; the vector is not
    a distribution over arms (it sums to 1 here only because every
    ``lambda_a`` shares the normaliser).
    """
    _check(state, config)
    f = config.externality
    weights = [f(x) for x in state.popularity]
    total = 0.0
    for w in weights:
        total += w
    return tuple(w / total for w in weights)


class Environment:
    """Mutable fast-path simulator over a single replication.

    Keeps ``f(N_a)`` cached per arm and recomputes the normaliser by an
    in-order loop every step, so results are bit-identical to the compiled
    kernel.
    """

    def __init__(self, config: ModelConfig, state: EnvState | None = None):
        self.config = config
        self._f = config.externality
        self._mu = config.mu
        self._theta = config.theta
        state = reset(config) if state is None else state
        _check(state, config)
        self.t = state.t
        self.pulls = list(state.pulls)
        self.successes = list(state.successes)
        self.weights = [self._f(x) for x in state.popularity]

    @property
    def state(self) -> EnvState:
        pop = tuple(s + th for s, th in zip(self.successes, self._theta))
        return EnvState(self.t, tuple(self.pulls), tuple(self.successes), pop)

    def probs(self) -> tuple[float, ...]:
        total = 0.0
        for w in self.weights:
            total += w
        return tuple(w / total for w in self.weights)

    def step(self, arm: int, uniform: Callable[[], float]) -> StepOutcome:
        if self.t >= self.config.horizon:
            raise HorizonError(f"horizon {self.config.horizon} already reached")
        if not 0 <= arm < self.config.m:
            raise ConfigurationError(f"arm {arm} out of range")
        lam = self.probs()
        preferred = uniform() < lam[arm]
        draw = uniform()
        reward = 1 if preferred and draw < self._mu[arm] else 0
        self.t += 1
        self.pulls[arm] += 1
        if reward:
            self.successes[arm] += 1
            self.weights[arm] = self._f(self.successes[arm] + self._theta[arm])
        return StepOutcome(self.t, arm, preferred, reward, lam)


def step(state: EnvState, config: ModelConfig, arm: int, rng) -> tuple[StepOutcome, EnvState]:
    """Advance one time step pulling ``arm``.

    ``rng`` is a :class:`numpy.random.Generator` or any zero-argument
    callable returning uniforms on ``[0, 1)``.
    """
    uniform = rng.random if hasattr(rng, "random") else rng
    env = Environment(config, state)
    outcome = env.step(arm, uniform)
    return outcome, env.state


def simulate_pulls(config: ModelConfig, arms: Sequence[int], rng) -> list[EnvState]:
    """States after each pull of a fixed arm sequence (index 0 is the reset state)."""
    uniform = rng.random if hasattr(rng, "random") else rng
    env = Environment(config)
    states = [env.state]
    for arm in arms:
        env.step(arm, uniform)
        states.append(env.state)
    return states
