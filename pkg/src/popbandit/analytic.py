"""Closed-form quantities: oracle reward bounds, regret shape curves, urn limits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import ConfigurationError, ModelConfig


def _power_alpha(config: ModelConfig) -> float:
    if config.externality.kind != "power":
        raise ConfigurationError("closed forms are only available for f(x) = x**alpha")
    return config.externality.param


def _others_mass(config: ModelConfig, alpha: float) -> float:
    """``sum_{a != a*} theta_a**alpha``."""
    best = config.best_arm
    return math.fsum(th ** alpha for a, th in enumerate(config.theta) if a != best)


def _terms_upper(config: ModelConfig, horizon: int) -> np.ndarray:
    alpha = _power_alpha(config)
    th_best = config.theta[config.best_arm]
    mass = _others_mass(config, alpha)
    k = np.arange(1, horizon + 1, dtype=np.float64)
    return 1.0 / ((k + th_best - 1.0) ** alpha + mass)


def _terms_lower(config: ModelConfig, horizon: int) -> np.ndarray:
    alpha = _power_alpha(config)
    th_best = config.theta[config.best_arm]
    k = np.arange(1, horizon + 1, dtype=np.float64)
    return 1.0 / (k + th_best) ** alpha


def oracle_upper_bound(config: ModelConfig, horizon: int | None = None,
                       reverse: bool = False) -> float:
    """Upper bound on the Oracle's expected cumulative reward.

    ``mu* T - mu* theta' sum_{k=1}^T 1 / ((k + theta* - 1)^alpha + theta')``
    with ``theta' = sum_{a != a*} theta_a^alpha``.  Exact finite sum,
    accumulated with :func:`math.fsum`.
    """
    T = config.horizon if horizon is None else int(horizon)
    mu = config.mu[config.best_arm]
    mass = _others_mass(config, _power_alpha(config))
    terms = _terms_upper(config, T)
    if reverse:
        terms = terms[::-1]
    return mu * T - mu * mass * math.fsum(terms)


def oracle_lower_bound(config: ModelConfig, horizon: int | None = None,
                       reverse: bool = False) -> float:
    """Lower bound ``mu* T - theta' sum_{k=1}^T (k + theta*)^{-alpha} - 1``."""
    T = config.horizon if horizon is None else int(horizon)
    mu = config.mu[config.best_arm]
    mass = _others_mass(config, _power_alpha(config))
    terms = _terms_lower(config, T)
    if reverse:
        terms = terms[::-1]
    return mu * T - mass * math.fsum(terms) - 1.0


@dataclass(frozen=True)
class OracleBounds:
    lower: float
    upper: float
    horizon: int

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def oracle_bounds(config: ModelConfig, horizon: int | None = None) -> OracleBounds:
    T = config.horizon if horizon is None else int(horizon)
    return OracleBounds(oracle_lower_bound(config, T), oracle_upper_bound(config, T), T)


def oracle_asymptote(config: ModelConfig, horizon: float | None = None) -> float:
    """Order of the Oracle's reward deficit ``mu* T - E[Gamma*_T]``."""
    alpha = _power_alpha(config)
    horizon = config.horizon if horizon is None else horizon
    if alpha < 1:
        return horizon ** (1.0 - alpha)
    if alpha == 1:
        return math.log(horizon)
    return 1.0


def regime(alpha: float) -> str:
    if alpha < 1:
        return "alpha_lt_1"
    if alpha == 1:
        return "alpha_eq_1"
    return "alpha_gt_1"


def regret_reference(alpha: float, horizon) -> float | np.ndarray:
    """Unnormalised optimal-regret shape for externality exponent ``alpha``.

    ``T^(1-alpha) ln^alpha T`` below 1, ``ln^2 T`` at 1, ``ln^alpha T`` above.
    """
    T = np.asarray(horizon, dtype=np.float64)
    if np.any(T < 3):
        raise ValueError("reference curves are defined for T >= 3")
    lt = np.log(T)
    if alpha < 1:
        val = T ** (1.0 - alpha) * lt ** alpha
    elif alpha == 1:
        val = lt ** 2
    else:
        val = lt ** alpha
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class ReferenceCurve:
    alpha: float

    @property
    def regime(self) -> str:
        return regime(self.alpha)

    def __call__(self, horizon):
        return regret_reference(self.alpha, horizon)


def fit_scale(horizons, values, curve) -> tuple[float, float]:
    """Fit ``values ~ C * curve(horizons)`` by least squares on logs.

    Returns ``(C, sse)`` where ``sse`` is the residual sum of squares of the
    log fit.  Non-positive values cannot be placed on log axes and raise.
    """
    x = np.asarray(horizons, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if len(x) < 3:
        raise ValueError("need at least 3 grid points to fit a curve")
    if np.any(y <= 0):
        raise ValueError("log fit needs strictly positive values")
    resid = np.log(y) - np.log(np.asarray(curve(x), dtype=np.float64))
    log_c = resid.mean()
    return float(math.exp(log_c)), float(np.sum((resid - log_c) ** 2))


def random_pull_ratio_limit(config: ModelConfig) -> dict[int, float] | None:
    """Almost-sure limit of ``N_a*(t) / N_b(t)`` under uniform random pulls.

    Only defined for ``0 < alpha < 1`` with integer ``theta``; returns
    ``None`` for ``alpha >= 1`` (random limit at 1, starvation above).
    """
    alpha = _power_alpha(config)
    if alpha >= 1:
        return None
    if any(th != int(th) for th in config.theta):
        raise ConfigurationError("the urn limit requires integer initial popularities")
    best = config.best_arm
    mu_b, th_b = config.mu[best], config.theta[best]
    expo = 1.0 / (1.0 - alpha)
    return {b: (th_b / config.theta[b]) * (mu_b / config.mu[b]) ** expo
            for b in range(config.m) if b != best}
