"""Exact expectations by exhaustive enumeration of outcome paths.

Ground truth for the stochastic components at tiny horizons.  Path
probabilities are carried as 50-digit ``mpmath`` reals so products of a
few dozen factors stay far below the 1e-12 comparison tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from mpmath import mp, mpf, log1p

from .env import ModelConfig, StepOutcome
from .policies import Policy, PolicyDescriptor, make_policy

MAX_HORIZON = 6
MAX_ARMS = 3
MAX_ESTIMATOR_HORIZON = 5
DPS = 50


class EnumerationBoundError(ValueError):
    """Instance too large to enumerate."""


def _weight(config: ModelConfig, x):
    f = config.externality
    if f.kind == "power":
        return mpf(x) ** mpf(f.param)
    if f.kind == "log_power":
        return (1 + log1p(mpf(x))) ** mpf(f.param)
    return mpf(f(float(x)))


def _lambdas(config: ModelConfig, successes: Sequence[int]) -> list:
    w = [_weight(config, s + th) for s, th in zip(successes, config.theta)]
    total = mp.fsum(w)
    return [x / total for x in w]


@dataclass(frozen=True)
class Leaf:
    probability: object  # mpf
    reward: int
    successes: tuple[int, ...]
    pulls: tuple[int, ...]


def _step_outcomes(config: ModelConfig, successes, arm: int, full_preferences: bool):
    """``(probability, preferred, reward)`` for one step pulling ``arm``."""
    lam = _lambdas(config, successes)
    mu = mpf(config.mu[arm])
    if full_preferences:
        # every subset J of arms, each arm independently preferred
        for members in itertools.product((False, True), repeat=config.m):
            pj = mpf(1)
            for b, inside in enumerate(members):
                pj *= lam[b] if inside else 1 - lam[b]
            if members[arm]:
                yield pj * mu, True, 1
                yield pj * (1 - mu), True, 0
            else:
                yield pj, False, 0
    else:
        yield 1 - lam[arm], False, 0
        yield lam[arm] * (1 - mu), True, 0
        yield lam[arm] * mu, True, 1


def enumerate_paths(desc: PolicyDescriptor, config: ModelConfig, horizon: int | None = None,
                    full_preferences: bool = False) -> Iterator[Leaf]:
    """Yield every leaf of the outcome tree, branching over policy ties too."""
    T = config.horizon if horizon is None else int(horizon)
    if T > MAX_HORIZON or config.m > MAX_ARMS:
        raise EnumerationBoundError(
            f"enumeration limited to T <= {MAX_HORIZON}, m <= {MAX_ARMS} (got T={T}, m={config.m})")
    cfg = config.with_horizon(T)
    policy = make_policy(desc, cfg)
    with mp.workdps(DPS):
        yield from _walk(cfg, policy, 1, T, mpf(1), 0,
                         (0,) * cfg.m, (0,) * cfg.m, full_preferences)


def _walk(config, policy: Policy, t, T, prob, reward, successes, pulls, full_preferences):
    if t > T:
        yield Leaf(prob, reward, successes, pulls)
        return
    cands = policy.candidates(t)
    share = mpf(1) / len(cands)
    for arm in cands:
        lam_f = tuple(float(x) for x in _lambdas(config, successes))
        new_pulls = tuple(n + (a == arm) for a, n in enumerate(pulls))
        for p, preferred, x in _step_outcomes(config, successes, arm, full_preferences):
            if p == 0:
                continue
            child = policy.clone()
            child.observe(t, StepOutcome(t, arm, preferred, x, lam_f))
            new_s = tuple(s + (x if a == arm else 0) for a, s in enumerate(successes))
            yield from _walk(config, child, t + 1, T, prob * share * p, reward + x,
                             new_s, new_pulls, full_preferences)


def exact_expected_reward(desc: PolicyDescriptor, config: ModelConfig, horizon: int | None = None,
                          full_preferences: bool = False) -> float:
    """Exact ``E[Gamma_T]`` for ``desc`` on ``config``."""
    with mp.workdps(DPS):
        total = mp.fsum(leaf.probability * leaf.reward
                        for leaf in enumerate_paths(desc, config, horizon, full_preferences))
        return float(total)


def exact_estimator_expectation(config: ModelConfig, pulls: Sequence[int], arm: int,
                                full_preferences: bool = False) -> float:
    """Exact expectation of the importance-weighted mean of ``arm`` after a fixed pull sequence.

    ``arm`` must appear in ``pulls``; the estimate is then defined on every path.
    """
    if len(pulls) > MAX_ESTIMATOR_HORIZON or config.m > MAX_ARMS:
        raise EnumerationBoundError(
            f"estimator enumeration limited to {MAX_ESTIMATOR_HORIZON} pulls, {MAX_ARMS} arms")
    n_arm = sum(1 for a in pulls if a == arm)
    if n_arm == 0:
        raise ValueError(f"arm {arm} is never pulled; the estimate is undefined")
    with mp.workdps(DPS):
        acc = []

        def walk(k, prob, successes, weighted):
            if k == len(pulls):
                acc.append(prob * weighted)
                return
            a = pulls[k]
            lam_a = _lambdas(config, successes)[a]
            for p, _, x in _step_outcomes(config, successes, a, full_preferences):
                if p == 0:
                    continue
                w = weighted + (x / lam_a if a == arm else 0)
                s = tuple(v + (x if b == a else 0) for b, v in enumerate(successes))
                walk(k + 1, prob * p, s, w)

        walk(0, mpf(1), (0,) * config.m, mpf(0))
        return float(mp.fsum(acc) / n_arm)
