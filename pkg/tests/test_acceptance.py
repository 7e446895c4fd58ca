"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test appends one ``PASS``/``FAIL`` line to the acceptance log, printed
in the terminal summary.  Run alone with ``pytest tests/test_acceptance.py``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from popbandit import ModelConfig, PolicyDescriptor
from popbandit.analytic import (ReferenceCurve, fit_scale, oracle_lower_bound,
                                oracle_upper_bound, random_pull_ratio_limit)
from popbandit.bruteforce import exact_estimator_expectation, exact_expected_reward
from popbandit.harness import (ExperimentSpec, aggregate, estimate_oracle_baseline,
                               oracle_totals, run_batches, run_replications)

from . import test_properties as props

pytestmark = pytest.mark.slow

TWO_ARM = ModelConfig((0.5, 0.3), (1, 1), 1.0, 30_000)
UCB = PolicyDescriptor("ucb", {"gamma": 3})
REC = PolicyDescriptor("rec", {"tau": "sqrt"})
BE = PolicyDescriptor("be", {"beta": 2})
BEAE_HALF = PolicyDescriptor("beae", {"p": 0.5})


def record(log, n, title, ok, detail):
    log.append(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
    print(log[-1])
    return ok


def wilson(k, n, z=1.959963984540054):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    return centre - half, centre + half


def test_1_oracle_bound_sandwich(acceptance_log):
    start = time.perf_counter()
    parts, ok = [], True
    for T in (100, 1000, 10_000):
        c = TWO_ARM.with_horizon(T)
        x = oracle_totals(c, 10_000, base_seed=1).astype(float)
        mean, se = x.mean(), x.std(ddof=1) / math.sqrt(len(x))
        lo, hi = oracle_lower_bound(c), oracle_upper_bound(c)
        inside = lo - 3 * se <= mean <= hi + 3 * se
        ok &= inside
        parts.append(f"T={T} {lo:.2f}<={mean:.2f}(se {se:.2f})<={hi:.2f}")
    secs = time.perf_counter() - start
    ok &= secs < 30
    assert record(acceptance_log, 1, "Oracle bound sandwich", ok,
                  "; ".join(parts) + f"; {secs:.1f}s")


def _mc_totals(config, desc, reps, seed):
    parts = run_batches(config, desc, seed, range(reps))
    return np.concatenate([res.successes.sum(axis=1) for _, res in parts]).astype(float)


def test_2_bruteforce_equivalence(acceptance_log):
    start = time.perf_counter()
    policies = [PolicyDescriptor("oracle"), UCB, REC, BE, BEAE_HALF, PolicyDescriptor("beae")]
    worst, ok = 0.0, True
    for desc, T in itertools.product(policies, range(1, 5)):
        c = TWO_ARM.with_horizon(T)
        exact = exact_expected_reward(desc, c)
        x = _mc_totals(c, desc, 100_000, seed=T)
        se = x.std(ddof=1) / math.sqrt(len(x))
        z = abs(x.mean() - exact) / se
        worst = max(worst, z)
        ok &= z < 4
    secs = time.perf_counter() - start
    ok &= secs < 60
    assert record(acceptance_log, 2, "brute-force equivalence", ok,
                  f"{len(policies)} policies x T=1..4, worst |MC-exact| = {worst:.2f} SE; {secs:.1f}s")


def test_3_estimator_unbiased(acceptance_log):
    configs = [TWO_ARM, ModelConfig((0.5, 0.3), (2, 3), 0.5, 10),
               ModelConfig((0.9, 0.2, 0.6), (1, 2, 0.5), 1.7, 10)]
    worst, count = 0.0, 0
    for c in configs:
        for length in range(1, 6):
            for seq in itertools.product(range(c.m), repeat=length):
                for arm in set(seq):
                    err = abs(exact_estimator_expectation(c, seq, arm) - c.mu[arm])
                    worst = max(worst, err)
                    count += 1
    assert record(acceptance_log, 3, "estimator unbiasedness", worst <= 1e-12,
                  f"{count} (sequence, arm) pairs, max error {worst:.1e}")


def test_4_ucb_starvation(acceptance_log):
    start = time.perf_counter()
    est = {}
    for T in (10_000, 30_000):
        recs = run_replications(ExperimentSpec(TWO_ARM.with_horizon(T), UCB, 1000, base_seed=4))
        k = sum(r.starved for r in recs)
        est[T] = (k / 1000, wilson(k, 1000))
    p30, (lo30, hi30) = est[30_000]
    p10, (lo10, hi10) = est[10_000]
    width = max(hi30 - lo30, hi10 - lo10)
    secs = time.perf_counter() - start
    ok = lo30 > 0 and abs(p30 - p10) <= 2 * width and secs < 300
    assert record(acceptance_log, 4, "UCB starvation", ok,
                  f"T=3e4 {p30:.3f} CI [{lo30:.3f}, {hi30:.3f}]; T=1e4 {p10:.3f}; {secs:.1f}s")


def test_5_policy_ordering(acceptance_log):
    start = time.perf_counter()
    reps = 1000
    base = estimate_oracle_baseline(ExperimentSpec(TWO_ARM, UCB, reps, 2018, 1000))
    agg = {}
    for desc in (BEAE_HALF, BE, UCB, REC):
        recs = run_replications(ExperimentSpec(TWO_ARM, desc, reps, 2018))
        agg[desc.label] = aggregate(recs, base)

    def below(a, b):
        x, y = agg[a.label], agg[b.label]
        return y.mean - x.mean > 2 * math.hypot(x.se, y.se)

    classic = min((UCB, REC), key=lambda d: agg[d.label].mean)
    checks = {f"{BEAE_HALF.label} < {BE.label}": below(BEAE_HALF, BE),
              f"{BE.label} < {classic.label}": below(BE, classic)}
    secs = time.perf_counter() - start
    ok = all(checks.values()) and secs < 300
    detail = ", ".join(f"{k} {v.mean:.0f}+-{v.se:.0f}" for k, v in agg.items())
    detail += "".join(f"; {k} {'holds' if v else 'violated'}" for k, v in checks.items())
    assert record(acceptance_log, 5, "policy ordering at T=3e4", ok, f"{detail}; {secs:.1f}s")


def test_6_be_polylog_scaling(acceptance_log):
    start = time.perf_counter()
    Ts = [1000, 3000, 10_000, 30_000, 100_000]
    means = []
    for T in Ts:
        spec = ExperimentSpec(TWO_ARM.with_horizon(T), BE, 1000, 6, 2000)
        means.append(aggregate(run_replications(spec), estimate_oracle_baseline(spec)).mean)
    _, sse_log = fit_scale(Ts, means, ReferenceCurve(1.0))
    _, sse_lin = fit_scale(Ts, means, lambda T: np.asarray(T, dtype=float))
    ratio = sse_lin / sse_log
    secs = time.perf_counter() - start
    ok = ratio >= 5 and secs < 900
    assert record(acceptance_log, 6, "BE ln^2 T scaling", ok,
                  f"means {[round(m) for m in means]}, misfit linear/ln^2 = {ratio:.1f}; {secs:.1f}s")


def test_7_random_pull_ratio(acceptance_log):
    start = time.perf_counter()
    c = ModelConfig((0.5, 0.3), (1, 1), 0.5, 1_000_000)
    target = random_pull_ratio_limit(c)[1]
    # exploration longer than the horizon: every pull is uniform over arms
    recs = run_replications(ExperimentSpec(c, PolicyDescriptor("rec", {"tau": 10**6}), 200, 7))
    ratios = [(r.successes[0] + 1) / (r.successes[1] + 1) for r in recs]
    med = float(np.median(ratios))
    secs = time.perf_counter() - start
    ok = abs(med / target - 1) <= 0.10 and secs < 120
    assert record(acceptance_log, 7, "random-pull popularity ratio", ok,
                  f"median {med:.4f} vs {target:.4f}; {secs:.1f}s")


def test_8_invariant_suites(acceptance_log):
    props.CASES.clear()
    suites = [props.test_env_accounting_identities, props.test_be_exploration_stays_balanced,
              props.test_beae_arrival_floor_and_monotone_active_set,
              props.test_seeded_runs_are_reproducible_and_thread_independent]
    failures = []
    for suite in suites:
        try:
            suite()
        except Exception as exc:  # report every suite, then fail
            failures.append(f"{suite.__name__}: {type(exc).__name__}")
    ok = not failures and len(props.CASES) == 4 and min(props.CASES.values()) >= 1000
    counts = ", ".join(f"{k}={v}" for k, v in props.CASES.items())
    assert record(acceptance_log, 8, "invariant suites", ok,
                  counts + (f"; failed {failures}" if failures else ""))
