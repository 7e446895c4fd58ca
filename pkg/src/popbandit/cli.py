"""``bandit`` command-line driver.

    bandit run <config> [--seed N] [--out DIR] [--deterministic] [--set a.b=VALUE]
    bandit sweep <config> [...same flags]
    bandit curves <results.csv|results.json> [--regime auto|lt1|eq1|gt1] [--out FILE]
    bandit validate <config>

Exit status: 0 success, 2 invalid configuration, 1 runtime failure.
BANDIT_THREADS caps the worker thread count.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analytic import fit_scale, regime as regime_name, regret_reference
from .harness import ExperimentResult, sweep
from .kernel import BACKEND

log = logging.getLogger("popbandit")

RESULT_FIELDS = [
    "policy", "params", "T", "alpha", "externality", "replications", "oracle_replications",
    "baseline_mean", "baseline_se", "regret_mean", "regret_se",
    "q05", "q25", "q50", "q75", "q95", "starvation_freq", "mean_reward", "wall_seconds",
]
SAMPLE_FIELDS = ["policy", "params", "T", "alpha", "replication", "total_reward",
                 "pseudo_regret", "starved", "event_time", "event_arm"]
CURVE_FIELDS = ["policy", "params", "alpha", "regime", "T", "measured", "regret_se",
                "reference", "fitted", "scale", "log_sse"]
NUMERIC_RESULT_FIELDS = [f for f in RESULT_FIELDS if f not in ("policy", "params", "externality")]


def _params(res: ExperimentResult) -> str:
    return json.dumps(res.spec.policy.params, sort_keys=True)


def _alpha(res: ExperimentResult):
    return res.spec.config.alpha if res.spec.config.alpha is not None else ""


def result_row(res: ExperimentResult, deterministic: bool) -> dict:
    agg = res.aggregate
    q = agg.quantiles
    return {
        "policy": res.spec.policy.name,
        "params": _params(res),
        "T": res.spec.config.horizon,
        "alpha": _alpha(res),
        "externality": res.spec.config.externality.kind,
        "replications": agg.replications,
        "oracle_replications": res.baseline.replications,
        "baseline_mean": res.baseline.mean,
        "baseline_se": res.baseline.se,
        "regret_mean": agg.mean,
        "regret_se": agg.se,
        "q05": q[0.05], "q25": q[0.25], "q50": q[0.5], "q75": q[0.75], "q95": q[0.95],
        "starvation_freq": agg.starvation_frequency,
        "mean_reward": agg.mean_reward,
        "wall_seconds": 0.0 if deterministic else round(res.seconds, 6),
    }


def sample_rows(res: ExperimentResult):
    for r, regret in zip(sorted(res.records, key=lambda r: r.index), res.aggregate.samples):
        yield {
            "policy": res.spec.policy.name, "params": _params(res),
            "T": res.spec.config.horizon, "alpha": _alpha(res), "replication": r.index,
            "total_reward": r.total_reward, "pseudo_regret": float(regret),
            "starved": int(r.starved), "event_time": r.event_time, "event_arm": r.event_arm,
        }


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def write_csv(path: Path, fields, rows, deterministic: bool):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not deterministic:
            fh.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat()}\r\n")
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_results(path: Path) -> list[dict]:
    """Result rows from either mirror, numeric fields as float."""
    if path.suffix == ".json":
        rows = json.loads(path.read_text(encoding="utf-8"))["rows"]
    else:
        rows = read_csv(path)
    out = []
    for row in rows:
        row = dict(row)
        for k in NUMERIC_RESULT_FIELDS:
            if k in row and row[k] != "":
                row[k] = float(row[k])
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _load_config(args) -> dict:
    raw = cfgmod.load(args.config)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise cfgmod.ConfigError(f"--set expects dotted.path=value, got {item!r}")
        key, val = item.split("=", 1)
        raw = cfgmod.apply_override(raw, key, cfgmod.parse_value(val))
    if getattr(args, "seed", None) is not None:
        raw = cfgmod.apply_override(raw, "run.base_seed", args.seed)
    if getattr(args, "out", None):
        raw = cfgmod.apply_override(raw, "output.directory", args.out)
    return cfgmod.validate(raw)


def _execute(args, use_sweep: bool) -> int:
    cfg = _load_config(args)
    specs = cfgmod.build_specs(cfg, use_sweep, args.backend)
    log.info("%d grid point(s) x policies, backend=%s", len(specs), args.backend or BACKEND)
    results = sweep(specs, keep_records=True)
    out = cfgmod.output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    formats = cfg["output"]["formats"]
    rows = [result_row(r, args.deterministic) for r in results]
    # the CSV is always written; it is the primary interchange file
    write_csv(out / "results.csv", RESULT_FIELDS, rows, args.deterministic)
    write_csv(out / "samples.csv", SAMPLE_FIELDS,
              (row for r in results for row in sample_rows(r)), args.deterministic)
    if "json" in formats:
        doc = {"rows": rows}
        if not args.deterministic:
            doc["generated"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        (out / "results.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if "svg" in formats:
        _plots(results, out / "plots")
    print(f"wrote {len(rows)} result row(s) to {out}")
    return 0


def _plots(results: list[ExperimentResult], plot_dir: Path):
    from . import plots

    plot_dir.mkdir(parents=True, exist_ok=True)
    by_T = defaultdict(dict)
    curves = defaultdict(lambda: ([], [], []))
    for r in results:
        label = r.spec.policy.label
        a = r.spec.config.alpha
        by_T[(r.spec.config.horizon, a)][label] = r.aggregate.samples.tolist()
        T, m, s = curves[f"{label} alpha={a}"]
        T.append(r.spec.config.horizon)
        m.append(r.aggregate.mean)
        s.append(r.aggregate.se)
    for (T, a), samples in by_T.items():
        plots.pseudo_regret_strips(samples, plot_dir / f"pseudo_regret_T{T}_alpha{a}.svg", T)
    if any(len(v[0]) > 1 for v in curves.values()):
        plots.regret_vs_horizon(dict(curves), plot_dir / "regret_vs_T.svg")


def cmd_run(args) -> int:
    return _execute(args, use_sweep=False)


def cmd_sweep(args) -> int:
    return _execute(args, use_sweep=True)


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    n = len(cfgmod.build_specs(cfg, use_sweep=True))
    print(f"ok: {args.config} ({n} experiment(s) in sweep expansion)")
    return 0


_REGIME_ALPHA = {"lt1": lambda a: a < 1, "eq1": lambda a: a == 1, "gt1": lambda a: a > 1}


def curves_table(rows: list[dict], regime: str = "auto") -> list[dict]:
    """Measured pseudo-regret against the fitted reference curve, per policy and alpha."""
    groups = defaultdict(list)
    for row in rows:
        if row["alpha"] == "":
            continue
        groups[(row["policy"], row["params"], float(row["alpha"]))].append(row)
    if not groups:
        raise ValueError("results contain no power-law externality rows")
    out = []
    for (policy, params, alpha), grp in sorted(groups.items()):
        if regime != "auto" and not _REGIME_ALPHA[regime](alpha):
            continue
        grp = sorted(grp, key=lambda r: r["T"])
        T = np.array([r["T"] for r in grp])
        y = np.array([r["regret_mean"] for r in grp])
        if len(T) < 3:
            raise ValueError(f"{policy} {params} alpha={alpha}: need >= 3 horizons, got {len(T)}")
        if np.any(y <= 0):
            log.warning("skipping %s %s alpha=%s: non-positive mean regret cannot be log-fitted",
                        policy, params, alpha)
            continue
        curve = lambda x, a=alpha: regret_reference(a, x)
        scale, sse = fit_scale(T, y, curve)
        ref = curve(T)
        for r, t, yy, rr in zip(grp, T, y, ref):
            out.append({
                "policy": policy, "params": params, "alpha": alpha,
                "regime": regime_name(alpha),
                "T": int(t), "measured": float(yy), "regret_se": r["regret_se"],
                "reference": float(rr), "fitted": float(scale * rr), "scale": scale, "log_sse": sse,
            })
    if not out:
        raise ValueError(f"no rows match regime {regime}")
    return out


def cmd_curves(args) -> int:
    path = Path(args.results)
    rows = read_results(path)
    table = curves_table(rows, args.regime)
    dest = Path(args.out) if args.out else path.with_name("curves.csv")
    write_csv(dest, CURVE_FIELDS, table, deterministic=True)
    print(f"wrote {len(table)} curve row(s) to {dest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bandit", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def experiment(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--seed", type=int, help="override run.base_seed")
        p.add_argument("--out", help="override output.directory")
        p.add_argument("--deterministic", action="store_true",
                       help="omit timestamps and wall-clock times so outputs are byte-stable")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="override a config field by dotted path (value parsed as JSON)")
        p.add_argument("--backend", choices=["cython", "python"], default=None)
        p.set_defaults(func=func)

    experiment("run", cmd_run, "run every policy at the configured horizon")
    experiment("sweep", cmd_sweep, "run every policy over the run.sweep grid")

    p = sub.add_parser("curves", help="overlay measured regret with fitted reference curves")
    p.add_argument("results")
    p.add_argument("--regime", choices=["auto", "lt1", "eq1", "gt1"], default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("validate", help="check a configuration without running it")
    p.add_argument("config")
    p.add_argument("--set", action="append", metavar="PATH=VALUE")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
