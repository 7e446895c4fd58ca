"""Seeded Monte Carlo replications, pseudo-regret and aggregation.

Every replication owns one PCG64 stream seeded from
``SeedSequence(base_seed, spawn_key=(stream, index))``.  Policy runs use
``stream=0`` and the Oracle baseline ``stream=1``, so the two never share
random numbers.  Within a replication uniforms are consumed per step as:
policy tie-break (only when needed), preference draw, reward draw.

Replications are split into chunks evaluated on a thread pool; the
compiled kernel releases the GIL.  Results are reassembled by replication
index, so the thread count never changes any number.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .env import ConfigurationError, ModelConfig
from .kernel import BatchResult, run_batch, trajectory_times
from .policies import PolicyDescriptor

log = logging.getLogger(__name__)

POLICY_STREAM = 0
BASELINE_STREAM = 1
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
TRAJECTORY_POINTS = 512
_ORACLE = PolicyDescriptor("oracle")


def default_threads() -> int:
    env = os.environ.get("BANDIT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"BANDIT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("BANDIT_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def replication_bitgen(base_seed: int, index: int, stream: int = POLICY_STREAM) -> np.random.PCG64:
    return np.random.PCG64(np.random.SeedSequence(base_seed, spawn_key=(stream, index)))


@dataclass(frozen=True)
class ExperimentSpec:
    config: ModelConfig
    policy: PolicyDescriptor
    replications: int = 100
    base_seed: int = 0
    oracle_replications: int = 1000
    record_trajectory: bool = False
    backend: str | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.oracle_replications < 1:
            raise ConfigurationError("oracle_replications must be >= 1")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ConfigurationError("base_seed must be a 64-bit unsigned integer")

    def with_horizon(self, horizon: int) -> "ExperimentSpec":
        return ExperimentSpec(self.config.with_horizon(horizon), self.policy, self.replications,
                              self.base_seed, self.oracle_replications,
                              self.record_trajectory, self.backend)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    reward: np.ndarray       # cumulative reward at each time
    successes: np.ndarray    # (K, m)


@dataclass(frozen=True)
class RunRecord:
    index: int
    total_reward: int
    successes: tuple[int, ...]
    pulls: tuple[int, ...]
    starved: bool
    event_time: int = -1
    event_arm: int = -1
    elim_times: tuple[int, ...] | None = None
    trajectory: Trajectory | None = field(default=None, compare=False)

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        same = (self.index, self.total_reward, self.successes, self.pulls, self.starved,
                self.event_time, self.event_arm, self.elim_times) == \
               (other.index, other.total_reward, other.successes, other.pulls, other.starved,
                other.event_time, other.event_arm, other.elim_times)
        if not same or (self.trajectory is None) != (other.trajectory is None):
            return False
        if self.trajectory is None:
            return True
        a, b = self.trajectory, other.trajectory
        return (np.array_equal(a.times, b.times) and np.array_equal(a.reward, b.reward)
                and np.array_equal(a.successes, b.successes))

    __hash__ = None


def _chunks(indices: Sequence[int], threads: int) -> list[Sequence[int]]:
    n = len(indices)
    size = max(1, min(4096, math.ceil(n / (4 * threads))))
    return [indices[i:i + size] for i in range(0, n, size)]


def _batch(config: ModelConfig, desc: PolicyDescriptor, base_seed: int, indices: Sequence[int],
           stream: int, samples, backend) -> BatchResult:
    gens = [replication_bitgen(base_seed, int(i), stream) for i in indices]
    return run_batch(config, desc, gens, samples, backend)


def run_batches(config: ModelConfig, desc: PolicyDescriptor, base_seed: int,
                indices: Sequence[int], stream: int = POLICY_STREAM, samples=None,
                backend: str | None = None, threads: int | None = None) -> list[tuple[Sequence[int], BatchResult]]:
    """Run replications ``indices`` in chunks; returns ``(chunk, result)`` in index order."""
    threads = default_threads() if threads is None else threads
    chunks = _chunks(list(indices), threads)
    if threads == 1 or len(chunks) == 1:
        results = [_batch(config, desc, base_seed, c, stream, samples, backend) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda c: _batch(config, desc, base_seed, c, stream, samples, backend), chunks))
    return list(zip(chunks, results))


def _records(chunk: Sequence[int], res: BatchResult, best_arm: int, beae: bool) -> list[RunRecord]:
    out = []
    for j, idx in enumerate(chunk):
        s = res.successes[j]
        traj = None
        if res.traj_reward is not None:
            traj = Trajectory(res.sample_times, res.traj_reward[j].copy(),
                              res.traj_successes[j].copy())
        out.append(RunRecord(
            index=int(idx),
            total_reward=int(s.sum()),
            successes=tuple(int(x) for x in s),
            pulls=tuple(int(x) for x in res.pulls[j]),
            starved=bool(s[best_arm] == 0),
            event_time=int(res.events[j, 0]),
            event_arm=int(res.events[j, 1]),
            elim_times=tuple(int(x) for x in res.elim_times[j]) if beae else None,
            trajectory=traj,
        ))
    return out


def run_replications(spec: ExperimentSpec, indices: Iterable[int] | None = None,
                     threads: int | None = None) -> list[RunRecord]:
    indices = range(spec.replications) if indices is None else list(indices)
    samples = trajectory_times(spec.config.horizon, TRAJECTORY_POINTS) if spec.record_trajectory else None
    beae = spec.policy.name == "beae"
    records: list[RunRecord] = []
    for chunk, res in run_batches(spec.config, spec.policy, spec.base_seed, indices,
                                  POLICY_STREAM, samples, spec.backend, threads):
        records.extend(_records(chunk, res, spec.config.best_arm, beae))
    return records


def run_replication(spec: ExperimentSpec, index: int) -> RunRecord:
    """One replication; deterministic in ``(spec.base_seed, index)``."""
    return run_replications(spec, [index], threads=1)[0]


@dataclass(frozen=True)
class Baseline:
    mean: float
    se: float
    replications: int


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def oracle_totals(config: ModelConfig, replications: int, base_seed: int,
                  backend: str | None = None, threads: int | None = None) -> np.ndarray:
    parts = run_batches(config, _ORACLE, base_seed, range(replications),
                        BASELINE_STREAM, None, backend, threads)
    return np.concatenate([res.successes.sum(axis=1) for _, res in parts])


def estimate_oracle_baseline(spec: ExperimentSpec, threads: int | None = None) -> Baseline:
    """Monte Carlo ``E[Gamma*_T]`` from the dedicated baseline stream."""
    if spec.oracle_replications < 30:
        log.warning("oracle baseline from only %d replications", spec.oracle_replications)
    totals = oracle_totals(spec.config, spec.oracle_replications, spec.base_seed,
                           spec.backend, threads)
    mean, se = _mean_se(totals.astype(np.float64))
    return Baseline(mean, se, len(totals))


@dataclass
class Aggregate:
    baseline: float
    baseline_se: float
    replications: int
    samples: np.ndarray          # pseudo-regret per replication, by index
    mean: float
    se: float
    starvation_frequency: float
    quantiles: dict[float, float]
    mean_reward: float


def aggregate(records: Sequence[RunRecord], baseline: Baseline | float) -> Aggregate:
    """Pseudo-regret summary; independent of the order of ``records``."""
    if not records:
        raise ValueError("aggregate needs at least one record")
    if isinstance(baseline, Baseline):
        b, b_se = baseline.mean, baseline.se
    else:
        b, b_se = float(baseline), 0.0
    ordered = sorted(records, key=lambda r: r.index)
    rewards = np.array([r.total_reward for r in ordered], dtype=np.float64)
    samples = b - rewards
    mean, se = _mean_se(samples)
    qs = np.quantile(samples, QUANTILES)
    return Aggregate(
        baseline=b, baseline_se=b_se, replications=len(ordered), samples=samples,
        mean=mean, se=se,
        starvation_frequency=float(np.mean([r.starved for r in ordered])),
        quantiles={q: float(v) for q, v in zip(QUANTILES, qs)},
        mean_reward=float(rewards.mean()),
    )


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    baseline: Baseline
    records: list[RunRecord]
    aggregate: Aggregate
    seconds: float


def run_experiment(spec: ExperimentSpec, baseline: Baseline | None = None,
                   threads: int | None = None) -> ExperimentResult:
    start = time.perf_counter()
    if baseline is None:
        baseline = estimate_oracle_baseline(spec, threads)
    records = run_replications(spec, threads=threads)
    agg = aggregate(records, baseline)
    return ExperimentResult(spec, baseline, records, agg, time.perf_counter() - start)


def sweep(specs: Sequence[ExperimentSpec], threads: int | None = None,
          keep_records: bool = False) -> list[ExperimentResult]:
    """One result per spec; Oracle baselines are shared between specs with the same model and seed."""
    if not specs:
        raise ConfigurationError("sweep needs at least one grid point")
    cache: dict = {}
    out = []
    for spec in specs:
        key = (spec.config, spec.base_seed, spec.oracle_replications, spec.backend)
        if key not in cache:
            cache[key] = estimate_oracle_baseline(spec, threads)
        res = run_experiment(spec, cache[key], threads)
        if not keep_records:
            res.records = []
        out.append(res)
        log.info("%s T=%d regret=%.2f±%.2f", spec.policy.label, spec.config.horizon,
                 res.aggregate.mean, res.aggregate.se)
    return out
