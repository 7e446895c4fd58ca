"""Replication kernel with a compiled fast path and a pure-Python fallback.

The compiled extension ``popbandit._ckernel`` is used when it imports and
the model uses a built-in externality.  Set ``POPBANDIT_PURE_PYTHON=1`` to
force the fallback.  Both paths consume the same uniform stream in the same
order and produce identical results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import Environment, ModelConfig
from .policies import BE, BEAE, REC, PolicyDescriptor, make_policy

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

COMPILED_AVAILABLE = _ckernel is not None
BACKEND = "cython" if COMPILED_AVAILABLE and not os.environ.get("POPBANDIT_PURE_PYTHON") else "python"

_POLICY_CODES = {"oracle": 0, "ucb": 1, "rec": 2, "be": 3, "beae": 4}
_EXT_CODES = {"power": 0, "log_power": 1}


@dataclass
class BatchResult:
    successes: np.ndarray        # (R, m)
    pulls: np.ndarray            # (R, m)
    elim_times: np.ndarray       # (R, m), -1 if never eliminated
    events: np.ndarray           # (R, 2): (event_time, event_arm), -1 if none
    sample_times: np.ndarray     # (K,)
    traj_reward: np.ndarray | None = None      # (R, K) cumulative reward
    traj_successes: np.ndarray | None = None   # (R, K, m)


def trajectory_times(horizon: int, max_points: int = 512) -> np.ndarray:
    """At most ``max_points`` evenly spaced steps in ``1..horizon`` (always including ``horizon``)."""
    k = min(max_points, horizon)
    return np.unique(np.rint(np.linspace(1, horizon, k)).astype(np.int64))


def resolve_backend(config: ModelConfig, backend: str | None = None) -> str:
    backend = backend or BACKEND
    if backend not in ("cython", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "cython":
        if not COMPILED_AVAILABLE:
            raise RuntimeError("compiled kernel is not built")
        if not config.externality.builtin or config.m > 64:
            return "python"
    return backend


def run_batch(config: ModelConfig, desc: PolicyDescriptor, bitgens: Sequence,
              sample_times: np.ndarray | None = None,
              backend: str | None = None) -> BatchResult:
    """Run one full-horizon replication per numpy bit generator."""
    backend = resolve_backend(config, backend)
    R, m = len(bitgens), config.m
    samples = (np.zeros(0, dtype=np.int64) if sample_times is None
               else np.ascontiguousarray(sample_times, dtype=np.int64))
    K = len(samples)
    out = BatchResult(
        successes=np.zeros((R, m), dtype=np.int64),
        pulls=np.zeros((R, m), dtype=np.int64),
        elim_times=np.full((R, m), -1, dtype=np.int64),
        events=np.full((R, 2), -1, dtype=np.int64),
        sample_times=samples,
        traj_reward=np.zeros((R, K), dtype=np.int64) if K else None,
        traj_successes=np.zeros((R, K, m), dtype=np.int64) if K else None,
    )
    if R == 0:
        return out
    if backend == "cython":
        _run_compiled(config, desc, bitgens, out)
    else:
        for r, bg in enumerate(bitgens):
            _run_python(config, desc, bg, out, r)
    return out


def _run_compiled(config, desc, bitgens, out):
    probe = make_policy(desc, config)  # resolves defaults exactly as the Python path
    gamma = getattr(probe, "gamma", 0.0)
    tau = probe.tau if isinstance(probe, REC) else 0
    n = probe.n if isinstance(probe, BE) else 0
    p = probe.p if isinstance(probe, BEAE) else 0.0
    K = len(out.sample_times)
    R, m = out.successes.shape
    traj_g = out.traj_reward if K else np.zeros((R, 0), dtype=np.int64)
    traj_s = (out.traj_successes.reshape(R, K * m) if K
              else np.zeros((R, 0), dtype=np.int64))
    _ckernel.run_batch(
        np.ascontiguousarray(config.mu, dtype=np.float64),
        np.ascontiguousarray(config.theta, dtype=np.float64),
        _EXT_CODES[config.externality.kind], float(config.externality.param),
        _POLICY_CODES[desc.name], config.best_arm, float(gamma), int(tau), int(n),
        float(p), config.horizon, list(bitgens), out.sample_times,
        out.successes, out.pulls, out.elim_times, out.events, traj_g, traj_s)


def _run_python(config, desc, bitgen, out, r, debug=False):
    uniform = np.random.Generator(bitgen).random
    env = Environment(config)
    policy = make_policy(desc, config, debug=debug)
    samples = out.sample_times
    si, K = 0, len(samples)
    total = 0
    for t in range(1, config.horizon + 1):
        arm = policy.choose(t, uniform)
        outcome = env.step(arm, uniform)
        policy.observe(t, outcome)
        total += outcome.reward
        if si < K and samples[si] == t:
            out.traj_reward[r, si] = total
            out.traj_successes[r, si] = env.successes
            si += 1
    out.successes[r] = env.successes
    out.pulls[r] = env.pulls
    out.events[r] = policy.events()
    if isinstance(policy, BEAE):
        out.elim_times[r] = policy.elim_times
