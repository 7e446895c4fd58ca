"""Decision rules for bandits with positive externalities.

Every policy exposes the same three calls:

* ``candidates(t)``: the arms it would pull at time ``t``, all equally
  likely (a single arm when the rule is deterministic).  Pure.
* ``choose(t, uniform)``: picks one candidate, drawing a uniform only when
  there is more than one.
* ``observe(t, outcome)``: folds the step outcome into the policy state.

Phase changes (REC commitment, BE exploitation) are recorded in
``observe`` from the arm actually pulled, which lets the exact enumerator
branch over ``candidates`` without touching randomness.

Arithmetic here mirrors the compiled kernel operation for operation; keep
the two in lockstep.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .env import ConfigurationError, ModelConfig, StepOutcome

POLICY_NAMES = ("oracle", "ucb", "rec", "be", "beae")


def pick(cands: Sequence[int], uniform: Callable[[], float]) -> int:
    """Uniform choice among ``cands``; consumes a draw only on a real tie."""
    k = len(cands)
    if k == 1:
        return cands[0]
    return cands[int(uniform() * k)]


@dataclass(frozen=True)
class PolicyDescriptor:
    """Serializable policy name plus parameters.

    Recognised parameters: ``gamma`` (ucb); ``tau`` as an integer or one of
    ``"sqrt"``/``"log"`` (rec); ``beta`` and ``n`` (be); ``p`` (beae).
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ConfigurationError(
                f"unknown policy {self.name!r}; expected one of {POLICY_NAMES}")
        allowed = {"oracle": set(), "ucb": {"gamma"}, "rec": {"tau"},
                   "be": {"beta", "n"}, "beae": {"p"}}[self.name]
        extra = set(self.params) - allowed
        if extra:
            raise ConfigurationError(
                f"policy {self.name!r} does not take parameters {sorted(extra)}")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items()))))

    @property
    def label(self) -> str:
        pretty = {"oracle": "Oracle", "ucb": "UCB", "rec": "REC",
                  "be": "BE", "beae": "BE-AE"}[self.name]
        if not self.params:
            return pretty
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{pretty}({inner})"

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyDescriptor":
        d = dict(d)
        return cls(d.pop("name"), d)


# ---------------------------------------------------------------------------
# Parameter resolution shared by both simulation backends
# ---------------------------------------------------------------------------

def rec_tau(tau, horizon: int) -> int:
    if tau is None or tau == "sqrt":
        return math.isqrt(horizon)
    if tau == "log":
        return max(1, math.ceil(math.log(horizon))) if horizon > 1 else 1
    if isinstance(tau, bool) or not isinstance(tau, (int, float)) or int(tau) != tau or tau < 0:
        raise ConfigurationError(f"invalid REC exploration length {tau!r}")
    return int(tau)


def be_success_target(horizon: int, beta: float = 2.0, n=None) -> int:
    """Per-arm success target ``ceil(beta * ln ln T * ln T)``, at least 1."""
    if n is not None:
        if int(n) != n or n < 1:
            raise ConfigurationError(f"BE success target must be >= 1, got {n}")
        return int(n)
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    if horizon <= 2:  # ln ln T <= 0
        return 1
    log_t = math.log(horizon)
    return max(1, math.ceil(beta * math.log(log_t) * log_t))


def beae_c(theta: Sequence[float]) -> float:
    """``min_{a,b} theta_a / (m (1 + theta_b))``."""
    m = len(theta)
    return min(theta) / (m * (1.0 + max(theta)))


def beae_default_p(theta: Sequence[float]) -> float:
    return 5.0 / math.sqrt(beae_c(theta))


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class Policy:
    name = "policy"

    def __init__(self, m: int, horizon: int):
        self.m = m
        self.horizon = horizon
        self.pulls = [0] * m
        self.successes = [0] * m

    def candidates(self, t: int) -> list[int]:
        raise NotImplementedError

    def choose(self, t: int, uniform: Callable[[], float]) -> int:
        return pick(self.candidates(t), uniform)

    def observe(self, t: int, outcome: StepOutcome):
        a = outcome.arm_pulled
        self.pulls[a] += 1
        self.successes[a] += outcome.reward

    def events(self) -> tuple[int, int]:
        """``(event_time, event_arm)``, -1 where not applicable."""
        return -1, -1

    def clone(self):
        return copy.deepcopy(self)


class Oracle(Policy):
    name = "oracle"

    def __init__(self, m: int, horizon: int, best_arm: int):
        super().__init__(m, horizon)
        self.best_arm = best_arm

    def candidates(self, t):
        return [self.best_arm]


def _argmax(values) -> list[int]:
    best = -math.inf
    out: list[int] = []
    for a, v in enumerate(values):
        if v > best:
            best = v
            out = [a]
        elif v == best:
            out.append(a)
    return out


def _argmin(values, allowed=None) -> list[int]:
    best = math.inf
    out: list[int] = []
    for a, v in enumerate(values):
        if allowed is not None and not allowed[a]:
            continue
        if v < best:
            best = v
            out = [a]
        elif v == best:
            out.append(a)
    return out


class UCB(Policy):
    """UCB(gamma).  Unpulled arms carry an infinite index."""

    name = "ucb"

    def __init__(self, m: int, horizon: int, gamma: float = 3.0):
        super().__init__(m, horizon)
        if gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        self.gamma = float(gamma)

    def index(self, t: int) -> list[float]:
        g = self.gamma * math.log(t)
        out = []
        for s, n in zip(self.successes, self.pulls):
            if n == 0:
                out.append(math.inf)
            else:
                out.append(s / n + math.sqrt(g / n))
        return out

    def candidates(self, t):
        return _argmax(self.index(t))


class REC(Policy):
    """Uniform random pulls for ``tau`` steps, then commit to the arm with most successes."""

    name = "rec"

    def __init__(self, m: int, horizon: int, tau="sqrt"):
        super().__init__(m, horizon)
        self.tau = rec_tau(tau, horizon)
        self.committed: int | None = None
        self.commit_time = -1

    def candidates(self, t):
        if t <= self.tau:
            return list(range(self.m))
        if self.committed is None:
            return _argmax(self.successes)
        return [self.committed]

    def observe(self, t, outcome):
        super().observe(t, outcome)
        if t == self.tau + 1:
            self.committed = outcome.arm_pulled
            self.commit_time = t

    def events(self):
        return (self.commit_time, self.committed if self.committed is not None else -1)


class BE(Policy):
    """Balanced exploration until every arm has ``n`` successes, then exploit.

    The exploitation arm is the one that needed the fewest pulls, i.e.
    ``argmin_a T_a(tau_n)``.
    """

    name = "be"

    def __init__(self, m: int, horizon: int, beta: float = 2.0, n=None):
        super().__init__(m, horizon)
        self.n = be_success_target(horizon, beta, n)
        self.exploring = True
        self.tau_n = horizon
        self.exploit_arm: int | None = None

    def candidates(self, t):
        if self.exploring:
            return _argmin(self.successes)
        if self.exploit_arm is None:
            return _argmin(self.pulls)
        return [self.exploit_arm]

    def observe(self, t, outcome):
        super().observe(t, outcome)
        if self.exploring:
            if min(self.successes) >= self.n:
                self.exploring = False
                self.tau_n = t
        elif self.exploit_arm is None:
            self.exploit_arm = outcome.arm_pulled

    def events(self):
        if self.exploit_arm is not None:
            return self.tau_n, self.exploit_arm
        # tau_n capped at T (or reached exactly at T): report argmin pulls for diagnostics
        return self.tau_n, _argmin(self.pulls)[0]


def estimator_mean(history: Sequence[tuple[int, int, float]], arm: int) -> float:
    """Importance-weighted mean reward of ``arm``.

    ``history`` holds ``(arm_pulled, reward, lam)`` triples where ``lam`` is
    the arrival probability of the pulled arm at pull time.  Unbiased for
    ``mu_arm`` because ``E[X | pulled] = lam * mu``.
    """
    n = 0
    total = 0.0
    for a, x, lam in history:
        if a != arm:
            continue
        n += 1
        if x:
            total += x / lam
    if n == 0:
        raise ValueError(f"arm {arm} was never pulled; estimate undefined")
    return total / n


class BEAE(Policy):
    """Balanced exploration with confidence-bound arm elimination.

    Knows ``theta``, the externality and ``m``, so it can recompute the
    arrival probability of the pulled arm from its own success counts.
    Ties in the balanced pull go to the lowest arm index.
    """

    name = "beae"

    def __init__(self, m: int, horizon: int, theta: Sequence[float], externality,
                 p: float | None = None, debug: bool = False):
        super().__init__(m, horizon)
        if len(theta) != m:
            raise ConfigurationError("theta length does not match arm count")
        self.theta = tuple(float(x) for x in theta)
        self.f = externality
        self.c = beae_c(self.theta)
        self.p = beae_default_p(self.theta) if p is None else float(p)
        if self.p <= 0:
            raise ConfigurationError("p must be positive")
        self.log_horizon = math.log(horizon)
        self.weights = [self.f(x) for x in self.theta]
        self.weighted = [0.0] * m
        self.active = [True] * m
        self.n_active = m
        self.elim_times = [-1] * m
        self.last_lam = math.nan
        # lambda_a >= c for active arms is only guaranteed for concave f
        self.debug = debug and (self.f.kind == "power" and self.f.param <= 1.0)

    def arrival_prob(self, arm: int) -> float:
        total = 0.0
        for w in self.weights:
            total += w
        return self.weights[arm] / total

    def candidates(self, t):
        best = math.inf
        for a in range(self.m):
            if self.active[a] and self.successes[a] < best:
                best = self.successes[a]
                arm = a
        return [arm]

    def mean(self, arm: int) -> float:
        return self.weighted[arm] / self.pulls[arm]

    def bounds(self, arm: int) -> tuple[float, float]:
        n = self.pulls[arm]
        if n == 0:
            return math.inf, -math.inf
        mean = self.weighted[arm] / n
        rad = self.p * math.sqrt(self.log_horizon / n)
        return mean + rad, mean - rad

    def observe(self, t, outcome):
        a = outcome.arm_pulled
        lam = self.arrival_prob(a)
        if lam <= 0.0:
            raise RuntimeError("arrival probability vanished for a pulled arm")
        if self.debug:
            for b in range(self.m):
                if self.active[b] and self.arrival_prob(b) < self.c * (1 - 1e-12):
                    raise AssertionError(f"lambda_{b}(t={t}) fell below c={self.c}")
        self.last_lam = lam
        super().observe(t, outcome)
        if outcome.reward:
            self.weighted[a] += 1.0 / lam
            self.weights[a] = self.f(self.successes[a] + self.theta[a])
        if self.n_active > 1:
            self._eliminate(t)

    def _eliminate(self, t):
        ub = [0.0] * self.m
        top_lower = -math.inf
        for b in range(self.m):
            if self.active[b]:
                u, l = self.bounds(b)
                ub[b] = u
                if l > top_lower:
                    top_lower = l
        for b in range(self.m):
            if self.active[b] and ub[b] < top_lower:
                self.active[b] = False
                self.elim_times[b] = t
                self.n_active -= 1

    def active_set(self) -> list[int]:
        return [a for a in range(self.m) if self.active[a]]

    def events(self):
        if self.n_active == 1:
            return max(self.elim_times), self.active_set()[0]
        return -1, -1


def make_policy(desc: PolicyDescriptor, config: ModelConfig, debug: bool = False) -> Policy:
    """Instantiate ``desc`` handing it only the knowledge its definition allows."""
    m, T, prm = config.m, config.horizon, desc.params
    if desc.name == "oracle":
        return Oracle(m, T, config.best_arm)
    if desc.name == "ucb":
        return UCB(m, T, prm.get("gamma", 3.0))
    if desc.name == "rec":
        return REC(m, T, prm.get("tau", "sqrt"))
    if desc.name == "be":
        return BE(m, T, prm.get("beta", 2.0), prm.get("n"))
    return BEAE(m, T, config.theta, config.externality, prm.get("p"), debug=debug)
