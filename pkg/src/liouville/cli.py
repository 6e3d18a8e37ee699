"""Command-line entry point.

Subcommands::

    field     sample and persist fields
    lbm       path, clock, and LBM trajectory for one (field, path) pair
    exponent  clock exponent, diffusivity, or thick-time dimension
    verify    lemma harness (moments, tails, covariance identities, ...)
    report    aggregate estimate CSVs into a summary table with closed-form targets
    replay    rerun an experiment from its manifest

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 statistical
acceptance failure (only with ``--strict``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from ._validation import LiouvilleError, NumericalError
from .clock import clock_limit, lbm_trajectory
from .config import ExperimentConfig
from .experiments import PRESETS, preset, run_experiment
from .field import DomainSpec, build_gff, rooted_shift
from .multifractal import formula_beta, formula_diffusivity, formula_time_dimension
from .path import sample_path
from .seeding import SCHEME, child_seed, resolve_workers

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_STATISTICAL = 0, 2, 3, 4

EXPONENTS = {"beta": "regularity", "diffusivity": "diffusivity", "dimension": "thick-dimension"}
LEMMAS = ("scale-invariance", "positive-moment", "negative-moment", "lower-tail", "upper-tail",
          "harmonic-tail", "circle-variance", "clock-normalization", "differentiability")
TARGETS = {
    "regularity": ("beta", formula_beta),
    "diffusivity": ("diffusivity", formula_diffusivity),
    "thick-dimension": ("time dimension", formula_time_dimension),
}


def _eps_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(parser):
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--n", type=int, help="lattice half-size; spacing is 1/n")
    parser.add_argument("--domain", choices=("unit-square", "unit-disc"))
    parser.add_argument("--dt", type=float)
    parser.add_argument("--eps-ladder", type=_eps_list, help="comma-separated radii")
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", default="out")
    parser.add_argument("--workers", type=int, help="defaults to $LQG_WORKERS, else 1")
    parser.add_argument("--strict", action="store_true", help="exit 4 when a pass flag is false")
    parser.add_argument("--option", action="append", default=[], metavar="KEY=JSON",
                        help="experiment option, e.g. --option tol=0.25")


def build_parser():
    parser = argparse.ArgumentParser(prog="liouville", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="sample and persist fields")
    _common(p)
    p.add_argument("--root", type=float, nargs=2, metavar=("X", "Y"),
                   help="apply a rooted shift at this point (uses --alpha)")

    p = sub.add_parser("lbm", help="path, clock, and trajectory")
    _common(p)
    p.add_argument("--samples", type=int, default=1000, help="trajectory points on a uniform clock grid")
    p.add_argument("--rooted", action="store_true", help="root the field at the start with --alpha")

    p = sub.add_parser("exponent", help="exponent experiments")
    _common(p)
    p.add_argument("--which", choices=sorted(EXPONENTS), default="beta")

    p = sub.add_parser("verify", help="lemma harness")
    _common(p)
    p.add_argument("--lemma", choices=LEMMAS, required=True)

    p = sub.add_parser("report", help="aggregate estimate CSVs")
    p.add_argument("inputs", nargs="+", help="estimate CSVs or directories containing estimates.csv")
    p.add_argument("--out", default="out")

    p = sub.add_parser("replay", help="rerun from a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--strict", action="store_true")
    return parser


def _options(pairs):
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"option {item!r} is not KEY=VALUE")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def config_from_args(experiment, args):
    """Preset for ``experiment`` (if any) with command-line overrides."""
    over = {
        "alpha": args.alpha,
        "gamma": args.gamma,
        "dt": args.dt,
        "eps_ladder": args.eps_ladder,
        "replicas": args.replicas,
        "seed": args.seed,
        "out": args.out,
        "options": _options(args.option),
    }
    if args.n is not None or args.domain is not None:
        base = preset(experiment).domain if experiment in PRESETS else DomainSpec()
        over["domain"] = {"shape": args.domain or base.shape, "n": args.n or base.n}
    if experiment in PRESETS:
        return preset(experiment, **over)
    data = {k: v for k, v in over.items() if v is not None}
    return ExperimentConfig.from_dict(dict(data, experiment=experiment))


# ---------------------------------------------------------------------------
# output handling


class RunDirectory:
    """Output directory whose manifest says ``incomplete`` until the run finishes."""

    def __init__(self, out, config, command):
        self.path = Path(out)
        self.path.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.command = command
        self.files = []
        self.t0 = time.time()
        self._write_manifest("incomplete")

    def file(self, name):
        self.files.append(name)
        return self.path / name

    def _write_manifest(self, status, **extra):
        man = io.manifest(self.config, seeds={"master": self.config.seed, "scheme": SCHEME},
                          command=self.command, status=status, files=sorted(self.files),
                          wall_time=time.time() - self.t0, **extra)
        io.write_json(man, self.path / "manifest.json")

    def finish(self, **extra):
        self._write_manifest("complete", **extra)

    def fail(self, message):
        for name in self.files:
            (self.path / name).unlink(missing_ok=True)
        self.files = []
        self._write_manifest("failed", error=message)


def _summary_rows(summary):
    return [{"key": k, "value": v} for k, v in sorted(summary.items()) if not isinstance(v, dict)]


def write_result(run, result):
    io.write_rows_csv(result.rows, run.file(f"{result.experiment}.csv"))
    if result.estimates:
        io.write_estimates_csv(result.estimates, run.file("estimates.csv"))
    io.write_rows_csv(_summary_rows(result.summary), run.file("summary.csv"), ("key", "value"))


def _experiment_command(experiment, config, args, command):
    run = RunDirectory(args.out, config, command)
    try:
        result = run_experiment(config, resolve_workers(args.workers))
        write_result(run, result)
    except Exception as exc:
        run.fail(str(exc))
        raise
    run.finish(summary=result.summary, seeds_detail=result.seeds, passed=result.passed)
    _print_summary(experiment, config, result)
    return EXIT_STATISTICAL if args.strict and not result.passed else EXIT_OK


def _print_summary(experiment, config, result):
    s = result.summary
    if experiment in TARGETS:
        label, formula = TARGETS[experiment]
        target = formula(config.alpha, config.gamma)
        value = s.get("median", s.get("mean"))
        shown = f"{value:.4f}" if value is not None else s.get("status", "none")
        print(f"{experiment}: alpha={config.alpha:g} gamma={config.gamma:g} "
              f"estimate={shown} target {label}={target:.4f} pass={result.passed}")
    else:
        keys = ", ".join(f"{k}={v}" for k, v in s.items() if not isinstance(v, (dict, list)))
        print(f"{experiment}: {keys}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_field(args):
    config = config_from_args("field", args)
    run = RunDirectory(args.out, config, "field")
    try:
        for i in range(config.replicas):
            seed = child_seed(config.seed, "field", i)
            f = build_gff(config.domain, seed)
            if args.root is not None:
                f = rooted_shift(f, tuple(args.root), config.alpha)
            io.write_field(f, run.file(f"field_{i:04d}.lqgf"))
            run.files.append(f"field_{i:04d}.lqgf.json")
    except Exception as exc:
        run.fail(str(exc))
        raise
    run.finish()
    print(f"wrote {config.replicas} fields to {run.path}")
    return EXIT_OK


def cmd_lbm(args):
    config = config_from_args("lbm", args)
    run = RunDirectory(args.out, config, "lbm")
    try:
        f = build_gff(config.domain, child_seed(config.seed, "lbm-field"))
        if args.rooted:
            f = rooted_shift(f, (0.0, 0.0), config.alpha)
        p = sample_path(config.dt, seed=child_seed(config.seed, "lbm-path"))
        F = clock_limit(p, f, config.gamma, config.eps_ladder)
        io.write_path(p, run.file("path.lqgp"))
        run.files.append("path.lqgp.json")
        io.write_clock_csv(F, run.file("clock.csv"))
        s = np.linspace(0.0, F.total, args.samples)
        z = lbm_trajectory(p, F, s)
        io.write_rows_csv(({"s": a, "x": b, "y": c} for a, b, c in zip(s, z[:, 0], z[:, 1])),
                          run.file("trajectory.csv"), ("s", "x", "y"))
    except Exception as exc:
        run.fail(str(exc))
        raise
    run.finish(clock=F.manifest(), path=p.manifest())
    print(f"tau={p.tau:.6g} F(tau)={F.total:.6g} converging={F.converging}")
    return EXIT_OK


def cmd_exponent(args):
    experiment = EXPONENTS[args.which]
    return _experiment_command(experiment, config_from_args(experiment, args), args, "exponent")


def cmd_verify(args):
    return _experiment_command(args.lemma, config_from_args(args.lemma, args), args, "verify")


def cmd_replay(args):
    man = io.read_json(args.manifest)
    config = ExperimentConfig.from_dict(man["config"])
    command = man.get("command", "verify")
    args.out = args.out
    if command in ("exponent", "verify"):
        return _experiment_command(config.experiment, config, args, command)
    raise LiouvilleError(f"replay is not supported for {command!r} runs")


def _estimate_files(inputs):
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            yield from sorted(p.rglob("estimates.csv"))
        else:
            yield p


def cmd_report(args):
    rows = []
    for path in _estimate_files(args.inputs):
        for r in io.read_rows_csv(path):
            exp = r["experiment_id"]
            alpha, gamma = float(r["alpha"]), float(r["gamma"])
            label, formula = TARGETS.get(exp, (None, None))
            target = formula(alpha, gamma) if formula else math.nan
            value = float(r["value"])
            rows.append({"experiment_id": exp, "alpha": alpha, "gamma": gamma, "quantity": label,
                         "estimate": value, "stderr": float(r["stderr"]), "target": target,
                         "difference": value - target, "source": str(path)})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_rows_csv(rows, out / "report.csv",
                      ("experiment_id", "alpha", "gamma", "quantity", "estimate", "stderr",
                       "target", "difference", "source"))
    for r in rows:
        print(f"{r['experiment_id']:<16} alpha={r['alpha']:<4g} gamma={r['gamma']:<4g} "
              f"{r['quantity']}: estimate {r['estimate']:.4f} target {r['target']:.4f}")
    return EXIT_OK


COMMANDS = {"field": cmd_field, "lbm": cmd_lbm, "exponent": cmd_exponent, "verify": cmd_verify,
            "report": cmd_report, "replay": cmd_replay}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (LiouvilleError, ValueError, argparse.ArgumentTypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
