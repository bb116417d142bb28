"""CSV ingestion, result serialization, and the command-line entry points.

Subcommands: ``fit`` (one dataset, one engine, a grid of quantile levels),
``simulate`` (emit a synthetic dataset), ``replicate-table`` (replicate
study with aggregate tables). Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""

import argparse
import csv
import json
import platform
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .gibbs import GibbsConfig, PriorConfig
from .model import Dataset
from .samplers import make_rng
from .simulate import SimDesign, generate_dataset, run_experiment
from .splines import KnotGrid
from .variants import TAGS, build_engine

SCHEMA_COMMENT = "# bqplam-csv v1"
CURVE_POINTS = 200


@dataclass
class RunConfig:
    """Everything a fit/simulate/replicate run needs, straight off the flags."""

    engine: str = "BQPLAM"
    taus: tuple = (0.5,)
    iterations: int = 5000
    burn_in: int = 2500
    thinning: int = 1
    degree: int = 3
    n_knots: int = 4
    seed: int = 0
    input_path: str = None
    out_dir: str = None
    force_linear: tuple = ()
    auto_force_linear: bool = True
    standardize: bool = True
    response: str = None
    store_traces: bool = False
    pi: float = None
    a1: float = 0.5
    a2: float = 0.5
    # simulation-only knobs
    n: int = 100
    p: int = 10
    n_test: int = 10_000
    error: str = "normal"
    replicates: int = 20
    engines: tuple = ("BQPLAM",)

    def __post_init__(self):
        if any(not (0.0 < t < 1.0) for t in self.taus):
            raise ValueError("quantile levels must lie in (0, 1)")

    def knot_grid(self):
        return KnotGrid.equally_spaced(degree=self.degree, n_knots=self.n_knots)

    def gibbs_config(self):
        return GibbsConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thinning=self.thinning,
            prior=PriorConfig(a1=self.a1, a2=self.a2, pi=self.pi),
            store_traces=self.store_traces,
        )


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows, name):
    with open(path, "w", newline="") as fh:
        fh.write(f"{SCHEMA_COMMENT} {name}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_rows(path):
    """All non-comment CSV rows; first one is the header."""
    with open(path, newline="") as fh:
        rows = []
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if row and row[0].lstrip().startswith("#"):
                continue
            rows.append((lineno, row))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows


def ingest_csv(path, config):
    """Load a rectangular numeric CSV into a Dataset.

    Covariates are affinely mapped to [0, 1] from their observed min/max
    (stored for back-mapping) unless standardization is off, in which case
    they must already sit inside the unit interval. Rows with missing
    cells are dropped and reported; constant columns are rejected. Binary
    columns are flagged force-linear (disable with auto_force_linear=False).
    """
    rows = _read_rows(path)
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise ValueError(f"{path}: duplicate column names in header")
    response = config.response
    if response is None:
        response = "y" if "y" in header else header[0]
    if response not in header:
        raise ValueError(f"{path}: response column {response!r} not found in header {header}")

    data, missing_rows = [], []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        if any(cell.strip() == "" for cell in row):
            missing_rows.append(lineno)
            continue
        parsed = []
        for colno, cell in enumerate(row, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: column {colno} ({header[colno - 1]}): "
                    f"cannot parse {cell!r} as a number"
                ) from None
        if any(np.isnan(parsed)):
            missing_rows.append(lineno)
            continue
        data.append(parsed)
    if missing_rows:
        warnings.warn(f"{path}: dropped rows with missing values at lines {missing_rows}")
    if not data:
        raise ValueError(f"{path}: no complete rows")

    table = np.asarray(data, dtype=float)
    ridx = header.index(response)
    y = table[:, ridx]
    cov_names = [h for i, h in enumerate(header) if i != ridx]
    X = table[:, [i for i in range(len(header)) if i != ridx]]

    scaling = np.empty((X.shape[1], 2))
    for j, name in enumerate(cov_names):
        lo, hi = X[:, j].min(), X[:, j].max()
        if lo == hi:
            raise ValueError(f"{path}: covariate {name!r} is constant")
        scaling[j] = (lo, hi)
        if config.standardize:
            X[:, j] = (X[:, j] - lo) / (hi - lo)
        elif lo < 0.0 or hi > 1.0:
            raise ValueError(
                f"{path}: covariate {name!r} outside [0, 1]; rerun with standardization on"
            )

    force = np.zeros(X.shape[1], dtype=bool)
    unknown = [c for c in config.force_linear if c not in cov_names]
    if unknown:
        raise ValueError(f"unknown force-linear columns {unknown}; covariates are {cov_names}")
    for j, name in enumerate(cov_names):
        explicit = name in config.force_linear
        binary = np.unique(X[:, j]).size == 2
        force[j] = explicit or (config.auto_force_linear and binary)

    return Dataset(y=y, X=X, force_linear=force, names=cov_names, scaling=scaling)


def emit_dataset_csv(dataset, path):
    """Write a dataset so that ingest_csv (standardization off) reproduces it exactly."""
    header = ["y"] + list(dataset.names)
    rows = [[dataset.y[i]] + list(dataset.X[i]) for i in range(dataset.n)]
    _write_csv(path, header, rows, "dataset")


def _meta_dict(config, extra=None):
    meta = {
        "schema": "bqplam-csv v1",
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "engine": config.engine,
        "taus": list(config.taus),
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thinning": config.thinning,
        "degree": config.degree,
        "n_knots": config.n_knots,
        "knots": list(config.knot_grid().knots),
        "seed": config.seed,
        "prior": {"a1": config.a1, "a2": config.a2, "pi": config.pi},
        "standardize": config.standardize,
        "force_linear": list(config.force_linear),
        "auto_force_linear": config.auto_force_linear,
        "input": config.input_path,
    }
    if extra:
        meta.update(extra)
    return meta


def _write_meta(outdir, config, extra=None):
    path = Path(outdir) / "run_meta.json"
    with open(path, "w") as fh:
        json.dump(_meta_dict(config, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_summary(summary, outdir, dataset=None):
    """Write selection probabilities, coefficients, curves, and optional traces."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = dataset.names if dataset is not None else [f"x{j + 1}" for j in range(summary.p)]

    _write_csv(
        outdir / "selection_probs.csv",
        ["covariate", "p_nonlinear", "p_linear", "p_zero", "label"],
        [
            [names[j], summary.probs[j, 0], summary.probs[j, 1], summary.probs[j, 2], summary.labels[j]]
            for j in range(summary.p)
        ],
        "selection_probs",
    )

    coef_rows = [
        ["mu", summary.mu_mean, summary.mu_sd],
        ["delta0", summary.delta0_mean, summary.delta0_sd],
    ]
    for j in range(summary.p):
        coef_rows.append([f"alpha_{names[j]}", summary.alpha_mean[j], summary.alpha_sd[j]])
    for j in range(summary.p):
        for k in range(summary.beta_mean.shape[1]):
            coef_rows.append(
                [f"beta_{names[j]}_{k + 1}", summary.beta_mean[j, k], summary.beta_sd[j, k]]
            )
    _write_csv(outdir / "coefficients.csv", ["parameter", "mean", "sd"], coef_rows, "coefficients")

    grid, curves = summary.prediction_curves(CURVE_POINTS)
    curve_rows = []
    for j in range(summary.p):
        for x, v in zip(grid, curves[j]):
            curve_rows.append([names[j], x, v])
    _write_csv(outdir / "fitted_curves.csv", ["covariate", "x", "f_hat"], curve_rows, "fitted_curves")

    if summary.traces is not None:
        header = ["iteration", "mu", "delta0"]
        header += [f"alpha_{n}" for n in names]
        header += [f"gamma_alpha_{n}" for n in names]
        header += [f"gamma_beta_{n}" for n in names]
        rows = []
        for i in range(summary.n_kept):
            row = [i, summary.traces["mu"][i], summary.traces["delta0"][i]]
            row += list(summary.traces["alpha"][i])
            row += list(summary.traces["gamma_alpha"][i])
            row += list(summary.traces["gamma_beta"][i])
            rows.append(row)
        _write_csv(outdir / "traces.csv", header, rows, "traces")

    return outdir


def cmd_fit(config):
    if config.input_path is None:
        raise UsageError("fit requires an input CSV path")
    if config.out_dir is None:
        raise UsageError("fit requires --out")
    dataset = ingest_csv(config.input_path, config)
    outdir = Path(config.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    gibbs_config = config.gibbs_config()
    grid = config.knot_grid()
    sub_meta = {}
    if config.engine == "BPLAM":
        cells = [("mean", None)]
    else:
        cells = [(f"tau_{_fmt(t)}", t) for t in config.taus]
    for i, (name, tau) in enumerate(cells):
        engine = build_engine(config.engine, dataset, grid, gibbs_config, tau=0.5 if tau is None else tau)
        summary = engine.run(make_rng(config.seed, i))
        emit_summary(summary, outdir / name, dataset=dataset)
        sub_meta[name] = {"tau": tau, "stream": i, "engine_meta": summary.meta}
    scaling = dataset.scaling.tolist() if dataset.scaling is not None else None
    _write_meta(
        outdir,
        config,
        extra={
            "covariates": dataset.names,
            "force_linear_applied": [n for n, f in zip(dataset.names, dataset.force_linear) if f],
            "scaling_min_max": scaling,
            "cells": sub_meta,
        },
    )
    return 0


def cmd_simulate(config):
    if config.out_dir is None:
        raise UsageError("simulate requires --out")
    design = SimDesign(
        n=config.n, p=config.p, n_test=config.n_test, error=config.error,
        taus=config.taus, replicates=config.replicates, seed=config.seed,
    )
    dataset = generate_dataset(design, make_rng(config.seed, 0))
    outdir = Path(config.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    emit_dataset_csv(dataset, outdir / "dataset.csv")
    _write_meta(outdir, config, extra={"design": {"n": design.n, "p": design.p, "error": design.error},
                                       "truth_labels": dataset.truth_labels})
    return 0


def cmd_replicate_table(config):
    if config.out_dir is None:
        raise UsageError("replicate-table requires --out")
    design = SimDesign(
        n=config.n, p=config.p, n_test=config.n_test, error=config.error,
        taus=config.taus, replicates=config.replicates, seed=config.seed,
    )
    result = run_experiment(design, config.engines, config.gibbs_config(), config.knot_grid())
    outdir = Path(config.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    rows = result.summary_rows()
    if rows:
        header = list(rows[0].keys())
        _write_csv(outdir / "summary_table.csv", header, [[r[k] for k in header] for r in rows],
                   "summary_table")
    rep_header = ["replicate", "engine", "tau", "rmse", "ad", "acl",
                  "selected_nonzero", "correct_nonzero", "selected_linear", "correct_linear"]
    rep_header += [f"sqrt_ise_f{j + 1}" for j in range(design.p)] + ["sqrt_ise_total"]
    rep_rows = []
    for r in sorted(result.records, key=lambda r: (r.engine, str(r.tau), r.replicate)):
        rep_rows.append([r.replicate, r.engine, r.tau, r.rmse, r.ad, r.acl, *r.counts, *r.sqrt_ise])
    _write_csv(outdir / "replicates.csv", rep_header, rep_rows, "replicates")
    if result.failures:
        _write_csv(outdir / "failures.csv", ["replicate", "engine", "tau", "error"],
                   [[f["replicate"], f["engine"], f["tau"], f["error"]] for f in result.failures],
                   "failures")
    _write_meta(outdir, config, extra={"engines": list(config.engines),
                                       "n_failures": len(result.failures)})
    return 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="bqplam", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="{fit,simulate,replicate-table}")

    def common(sp, sampling=True):
        sp.add_argument("--out", dest="out_dir", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        if sampling:
            sp.add_argument("--engine", default="BQPLAM", choices=TAGS)
            sp.add_argument("--tau", action="append", type=float, dest="taus",
                            help="quantile level; repeatable")
            sp.add_argument("--iters", type=int, default=5000, dest="iterations")
            sp.add_argument("--burnin", type=int, default=2500, dest="burn_in")
            sp.add_argument("--thin", type=int, default=1, dest="thinning")
            sp.add_argument("--knots", type=int, default=4, dest="n_knots",
                            help="number of equally spaced interior knots")
            sp.add_argument("--degree", type=int, default=3)
            sp.add_argument("--pi", type=float, default=None,
                            help="Bernoulli indicator prior (default: size-balanced prior)")

    fit = sub.add_parser("fit", help="fit one dataset at a grid of quantile levels")
    fit.add_argument("input", nargs="?", help="input CSV with a header row")
    common(fit)
    fit.add_argument("--response", default=None, help="response column (default: 'y' or first)")
    fit.add_argument("--force-linear", action="append", default=[], dest="force_linear",
                     metavar="COL", help="pin a covariate to the linear/zero split; repeatable")
    fit.add_argument("--no-auto-force-linear", action="store_false", dest="auto_force_linear",
                     help="do not auto-pin binary covariates")
    fit.add_argument("--no-standardize", action="store_false", dest="standardize")
    fit.add_argument("--store-traces", action="store_true", dest="store_traces")

    sim = sub.add_parser("simulate", help="emit one synthetic dataset")
    common(sim, sampling=False)
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--p", type=int, default=10)
    sim.add_argument("--error", default="normal", choices=("normal", "student_t"))

    rep = sub.add_parser("replicate-table", help="replicate study with aggregate tables")
    common(rep)
    rep.add_argument("--n", type=int, default=100)
    rep.add_argument("--p", type=int, default=10)
    rep.add_argument("--n-test", type=int, default=10_000, dest="n_test")
    rep.add_argument("--error", default="normal", choices=("normal", "student_t"))
    rep.add_argument("--replicates", type=int, default=20)
    rep.add_argument("--engines", nargs="+", default=["BQPLAM"], choices=TAGS)
    return parser


def _config_from_args(args):
    fields = {f for f in RunConfig.__dataclass_fields__}
    kwargs = {}
    for key, val in vars(args).items():
        if key == "input":
            kwargs["input_path"] = val
        elif key in fields and val is not None:
            kwargs[key] = val
    if getattr(args, "taus", None):
        kwargs["taus"] = tuple(args.taus)
    if "engines" in kwargs:
        kwargs["engines"] = tuple(kwargs["engines"])
    if "force_linear" in kwargs:
        kwargs["force_linear"] = tuple(kwargs["force_linear"])
    return RunConfig(**kwargs)


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.command == "fit" and not args.input:
            raise UsageError("fit requires an input CSV path")
        if args.command == "fit" and not Path(args.input).exists():
            raise UsageError(f"input file not found: {args.input}")
        config = _config_from_args(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"bqplam: error: {err}", file=sys.stderr)
        return 1
    try:
        if args.command == "fit":
            return cmd_fit(config)
        if args.command == "simulate":
            return cmd_simulate(config)
        return cmd_replicate_table(config)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"bqplam: error: {err}", file=sys.stderr)
        return 1
    except Exception as err:
        print(f"bqplam: runtime failure: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
