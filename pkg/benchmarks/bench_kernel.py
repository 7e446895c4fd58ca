"""Throughput of the compiled kernel against the pure-Python fallback.

    python3 benchmarks/bench_kernel.py [--horizon 3000] [--reps 20]

Reports simulated steps per second for each policy on the two-arm linear
model and checks that both backends return identical replications.
"""

import argparse
import time

import numpy as np

from popbandit import ModelConfig, PolicyDescriptor
from popbandit.harness import replication_bitgen
from popbandit.kernel import COMPILED_AVAILABLE, run_batch

POLICIES = [PolicyDescriptor("oracle"), PolicyDescriptor("ucb", {"gamma": 3}),
            PolicyDescriptor("rec"), PolicyDescriptor("be"), PolicyDescriptor("beae", {"p": 0.5})]


def timed(config, desc, reps, backend):
    gens = [replication_bitgen(0, i) for i in range(reps)]
    start = time.perf_counter()
    res = run_batch(config, desc, gens, backend=backend)
    return time.perf_counter() - start, res


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--horizon", type=int, default=3000)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()
    if not COMPILED_AVAILABLE:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    config = ModelConfig((0.5, 0.3), (1, 1), 1.0, args.horizon)
    steps = args.horizon * args.reps
    print(f"{'policy':<16}{'python steps/s':>16}{'cython steps/s':>16}{'speedup':>10}  identical")
    for desc in POLICIES:
        t_py, r_py = timed(config, desc, args.reps, "python")
        t_cy, r_cy = timed(config, desc, args.reps, "cython")
        same = np.array_equal(r_py.successes, r_cy.successes) and \
            np.array_equal(r_py.pulls, r_cy.pulls)
        print(f"{desc.label:<16}{steps / t_py:>16,.0f}{steps / t_cy:>16,.0f}"
              f"{t_py / t_cy:>9.0f}x  {same}")


if __name__ == "__main__":
    main()
