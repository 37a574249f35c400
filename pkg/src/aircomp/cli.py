"""Command-line entry point: run experiments, emit CSV and a run manifest.

Subcommands: theory, simulate, mv, fl, extended-opt, overhead. Each writes a
flat CSV (schema below) plus ``<out>.manifest.json`` holding the fully
resolved configuration, package version and seed, which together reproduce
the CSV byte-for-byte. Bundled figure configs (fig2..fig13) are addressable
by name, e.g. ``aircomp simulate --config fig5``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from . import __version__, fl, montecarlo, theory
from .montecarlo import ExperimentSpec

CSV_COLUMNS = [
    "experiment_id",
    "figure_ref",
    "sweep_var",
    "sweep_value",
    "mapping",
    "estimator",
    "csi",
    "K",
    "M",
    "L",
    "beta",
    "eta",
    "distribution",
    "trials",
    "metric",
    "value",
    "stderr",
    "seed",
]

FL_CSV_COLUMNS = ["series", "round", "mean_sq_error", "stderr"]

SEED_ENV_VAR = "AIRCOMP_SEED"
DEFAULT_SEED = 0


SUBCOMMANDS = ("theory", "simulate", "mv", "fl", "extended-opt", "overhead")


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: one subcommand plus its I/O knobs."""

    subcommand: str
    config_path: str | None
    out: str
    seed: int | None
    workers: int

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.workers < 1:
            raise ValueError("need at least one worker")


def _fmt(value):
    """Shortest round-trip text for CSV cells; NaN renders empty."""
    if isinstance(value, float) or isinstance(value, np.floating):
        v = float(value)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(value)


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            row = asdict(rec) if not isinstance(rec, dict) else rec
            writer.writerow([_fmt(row[col]) for col in CSV_COLUMNS])


def write_manifest(out, subcommand, resolved, seed):
    manifest = {
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "csv": os.path.basename(out),
        "config": resolved,
    }
    path = out + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_config(spec):
    """Load a JSON config from a path or a bundled name like ``fig5``."""
    if spec and not os.path.exists(spec) and os.sep not in spec and not spec.endswith(".json"):
        ref = resources.files("aircomp").joinpath(f"configs/{spec}.json")
        if not ref.is_file():
            raise ValueError(f"no bundled config named {spec!r}")
        return json.loads(ref.read_text())
    try:
        with open(spec) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValueError(f"config file not found: {spec}")
    except json.JSONDecodeError as err:
        raise ValueError(f"invalid JSON in {spec}: {err}")


def resolve_seed(flag_seed, config_seed=None):
    if flag_seed is not None:
        return int(flag_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return DEFAULT_SEED


def _theory_record(point, figure_ref, sweep_var):
    inputs = point.inputs
    return {
        "experiment_id": f"theory-{point.kind}",
        "figure_ref": figure_ref,
        "sweep_var": sweep_var,
        "sweep_value": float(inputs.get(sweep_var, inputs.get("x", 0.0))),
        "mapping": inputs.get("mapping", ""),
        "estimator": "theory",
        "csi": inputs.get("csi", ""),
        "K": inputs.get("K", ""),
        "M": inputs.get("M", ""),
        "L": inputs.get("L", ""),
        "beta": inputs.get("beta", float("nan")),
        "eta": inputs.get("eta", float("nan")),
        "distribution": "uniform",
        "trials": 0,
        "metric": point.kind,
        "value": point.value,
        "stderr": float("nan"),
        "seed": 0,
    }


def cmd_theory(args):
    if args.config:
        cfg = load_config(args.config)
        table = cfg.get("table", 2)
        K, M, L, eta = cfg["K"], cfg["M"], cfg["L"], cfg.get("eta", 1.0)
        x_grid = cfg.get("x_grid")
        beta_grid = cfg.get("beta_grid")
        figure_ref = cfg.get("figure_ref", "")
    else:
        table, K, M, L, eta = args.table, args.K, args.M, args.L, args.eta
        x_grid = _parse_linspace(args.x_grid) if args.x_grid else None
        beta_grid = _parse_list(args.beta_grid) if args.beta_grid else None
        figure_ref = ""
        cfg = {"table": table, "K": K, "M": M, "L": L, "eta": eta,
               "x_grid": x_grid, "beta_grid": beta_grid}
    if table == 1:
        grid = x_grid if x_grid is not None else list(np.linspace(-K, K, 41))
        points = theory.conditional_variance_curve(K, M, L, eta, grid)
        rows = [_theory_record(p, figure_ref, "x_total") for p in points]
        cfg["x_grid"] = [float(v) for v in grid]
    elif table == 2:
        grid = beta_grid if beta_grid is not None else [1.0 / eta]
        points = theory.total_mse_curve(K, M, L, grid)
        rows = [_theory_record(p, figure_ref, "beta") for p in points]
        cfg["beta_grid"] = [float(v) for v in grid]
    else:
        raise ValueError(f"unknown table {table!r}; expected 1 or 2")
    write_records_csv(args.out, rows)
    write_manifest(args.out, "theory", cfg, 0)
    print(f"wrote {len(rows)} theory rows to {args.out}")
    return 0


def cmd_extended_opt(args):
    if args.config:
        cfg = load_config(args.config)
        K, M, eta = cfg["K"], cfg["M"], cfg.get("eta", 1.0)
        L_grid = cfg["L_grid"]
        figure_ref = cfg.get("figure_ref", "")
    else:
        K, M, eta = args.K, args.M, args.eta
        L_grid = _parse_range(args.L_grid)
        figure_ref = ""
        cfg = {"K": K, "M": M, "eta": eta, "L_grid": L_grid}
    points = theory.extended_optimum_curve(K, M, L_grid, eta)
    rows = [_theory_record(p, figure_ref, "L") for p in points]
    write_records_csv(args.out, rows)
    write_manifest(args.out, "extended-opt", cfg, 0)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_overhead(args):
    rows = []
    for scheme in theory.OVERHEAD_SCHEMES:
        value = theory.overhead_per_codeword(scheme, args.K, args.tau, args.T)
        print(f"{scheme}: {value!r}")
        rows.append(
            {
                "experiment_id": f"overhead-{scheme}",
                "figure_ref": "",
                "sweep_var": "tau",
                "sweep_value": args.tau,
                "mapping": "",
                "estimator": scheme,
                "csi": "",
                "K": args.K,
                "M": "",
                "L": "",
                "beta": float("nan"),
                "eta": float("nan"),
                "distribution": "",
                "trials": 0,
                "metric": "OverheadPerCodeword",
                "value": value,
                "stderr": float("nan"),
                "seed": 0,
            }
        )
    if args.out:
        write_records_csv(args.out, rows)
        write_manifest(args.out, "overhead", {"K": args.K, "tau": args.tau, "T": args.T}, 0)
    return 0


def _experiment_specs(cfg, seed, trials_override=None):
    specs = []
    for obj in cfg["experiments"]:
        obj = dict(obj)
        obj.setdefault("figure_ref", cfg.get("figure_ref", ""))
        if trials_override is not None:
            obj["trials"] = trials_override
        specs.append(ExperimentSpec.from_config(obj, default_seed=seed))
    return specs


def cmd_simulate(args, runner=montecarlo.run_experiment):
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg.get("seed"))
    specs = _experiment_specs(cfg, seed, args.trials)
    records = []
    for spec in specs:
        records.extend(runner(spec, workers=args.workers))
    write_records_csv(args.out, records)
    resolved = dict(cfg)
    resolved["experiments"] = [_spec_dict(s) for s in specs]
    resolved["seed"] = seed
    write_manifest(args.out, args.cmd, resolved, seed)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_mv(args):
    return cmd_simulate(args, runner=montecarlo.run_mv_experiment)


def _spec_dict(spec):
    d = asdict(spec)
    d["distribution"] = asdict(spec.distribution)
    return d


def cmd_fl(args):
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg.get("seed"))
    fl_cfg = dict(cfg["fl"])
    if args.trials is not None:
        fl_cfg["trials"] = args.trials
    if args.rounds is not None:
        fl_cfg["rounds"] = args.rounds
    backends = fl_cfg.pop("backends")
    task_cfg = fl_cfg.pop("task", {"kind": "quadratic", "spread": 0.5})
    task_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    if task_cfg.get("kind", "quadratic") == "quadratic":
        task = fl.make_quadratic_task(fl_cfg["K"], fl_cfg["d_model"], task_rng, task_cfg.get("spread", 0.5))
    else:
        task = fl.make_logistic_task(fl_cfg["K"], fl_cfg["d_model"], task_rng)
    rows = []
    resolved_backends = []
    for i, backend in enumerate(backends):
        backend = dict(backend)
        name = backend.pop("name")
        run_cfg = fl.FlConfig(seed=seed + i, **{**fl_cfg, **backend})
        result = fl.run_fl(run_cfg, task)
        resolved_backends.append({"name": name, **backend, "plateau": result.plateau,
                                  "diverged": result.diverged})
        if result.diverged:
            print(f"warning: backend {name} diverged (plateau {result.plateau:g})", file=sys.stderr)
        for t, (v, se) in enumerate(zip(result.trajectory, result.stderr)):
            rows.append({"series": name, "round": t, "mean_sq_error": _fmt(float(v)), "stderr": _fmt(float(se))})
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FL_CSV_COLUMNS)
        for row in rows:
            writer.writerow([row[c] for c in FL_CSV_COLUMNS])
    resolved = dict(cfg)
    resolved["fl"] = {**fl_cfg, "task": task_cfg, "backends": resolved_backends}
    resolved["seed"] = seed
    write_manifest(args.out, "fl", resolved, seed)
    print(f"wrote {len(rows)} trajectory rows to {args.out}")
    return 0


def _parse_list(text):
    return [float(v) for v in text.split(",") if v]


def _parse_linspace(text):
    lo, hi, n = text.split(":")
    return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]


def _parse_range(text):
    parts = [int(v) for v in text.split(":")]
    lo, hi = parts[0], parts[1]
    step = parts[2] if len(parts) > 2 else 1
    return list(range(lo, hi + 1, step))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aircomp",
        description="Non-coherent over-the-air computation experiments",
        epilog=f"Seed resolution order: --seed flag, config file, ${SEED_ENV_VAR}, default {DEFAULT_SEED}.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo sweep from a JSON config")
    sim.add_argument("--config", required=True, help="config path or bundled name (fig4, fig5, ...)")
    sim.add_argument("--out", default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--trials", type=int, default=None, help="override per-experiment trial count")
    sim.set_defaults(func=cmd_simulate)

    mv = sub.add_parser("mv", help="majority-vote accuracy sweeps")
    for a in ("--config",):
        mv.add_argument(a, required=True)
    mv.add_argument("--out", default=None)
    mv.add_argument("--seed", type=int, default=None)
    mv.add_argument("--workers", type=int, default=1)
    mv.add_argument("--trials", type=int, default=None)
    mv.set_defaults(func=cmd_mv)

    th = sub.add_parser("theory", help="closed-form variance/MSE curves")
    th.add_argument("--config", default=None)
    th.add_argument("--table", type=int, default=2, choices=(1, 2))
    th.add_argument("--K", type=int, default=10)
    th.add_argument("--M", type=int, default=1)
    th.add_argument("--L", type=int, default=2)
    th.add_argument("--eta", type=float, default=1.0)
    th.add_argument("--x-grid", default=None, help="lo:hi:count")
    th.add_argument("--beta-grid", default=None, help="comma-separated values")
    th.add_argument("--out", default=None)
    th.set_defaults(func=cmd_theory)

    ext = sub.add_parser("extended-opt", help="optimal segment count per symbol budget")
    ext.add_argument("--config", default=None)
    ext.add_argument("--K", type=int, default=10)
    ext.add_argument("--M", type=int, default=1)
    ext.add_argument("--eta", type=float, default=1.0)
    ext.add_argument("--L-grid", default="2:40:2", help="lo:hi[:step]")
    ext.add_argument("--out", default=None)
    ext.set_defaults(func=cmd_extended_opt)

    ov = sub.add_parser("overhead", help="channel-estimation overhead per codeword")
    ov.add_argument("--K", type=int, required=True)
    ov.add_argument("--tau", type=float, required=True)
    ov.add_argument("--T", type=float, default=1)
    ov.add_argument("--out", default=None)
    ov.set_defaults(func=cmd_overhead)

    flp = sub.add_parser("fl", help="federated learning on synthetic objectives")
    flp.add_argument("--config", required=True)
    flp.add_argument("--out", default=None)
    flp.add_argument("--seed", type=int, default=None)
    flp.add_argument("--trials", type=int, default=None)
    flp.add_argument("--rounds", type=int, default=None)
    flp.set_defaults(func=cmd_fl)

    return parser


def _default_out(args):
    if getattr(args, "out", None):
        return args.out
    name = None
    if getattr(args, "config", None):
        try:
            name = load_config(args.config).get("figure_ref")
        except ValueError:
            name = None
    return f"{name or args.cmd}.csv"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.out = _default_out(args)
        args.run_config = RunConfig(
            subcommand=args.cmd,
            config_path=getattr(args, "config", None),
            out=args.out,
            seed=getattr(args, "seed", None),
            workers=getattr(args, "workers", 1),
        )
        return args.func(args)
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
