"""Command-line entry point: ``reggkm {simulate,fit,tune,predict,evaluate,bench}``.

Data files are CSV with a header row, described by a schema JSON
``{"time": ..., "status": ..., "x": [...], "z": [...]}``. When ``--schema``
is omitted the schema is looked for next to the data as ``<stem>.schema.json``,
which is what ``simulate`` writes.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import data, fitter, metrics, simgen, tuning
from .coxlik import LambdaTriple
from .errors import (DataError, DimensionMismatch, InsufficientEvents, InvalidPlan,
                     NoComparablePairs, NotConverged, NumericalError)
from .solvers import SpgConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _schema_path(args):
    path = Path(args.schema) if args.schema else Path(args.data).with_suffix(".schema.json")
    if not path.is_file():
        raise UsageError(f"schema file not found: {path} (pass --schema)")
    return path


def _read(args, path=None):
    path = Path(path or args.data)
    if not path.is_file():
        raise UsageError(f"data file not found: {path}")
    return data.read_csv(path, _schema_path(args))


def _fit_config(args):
    return fitter.FitConfig(max_outer_cycles=args.max_cycles, tol=args.tol, kernel=args.kernel,
                            spg=SpgConfig(max_iter=args.spg_iter))


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _fit_report(model, ds):
    scores = model.predict_risk(ds.x, ds.z, standardized=True)
    rep = {"n": ds.n, "P": ds.P, "Q": ds.Q, "events": int(ds.status.sum()),
           "lambda": list(model.lam.as_tuple()), "converged": model.converged,
           "cycles": model.n_cycles, "objective": model.objective,
           "flagged_cycles": list(model.flagged_cycles),
           "nonzero_beta": int(np.count_nonzero(model.beta)),
           "nonzero_delta": int(np.count_nonzero(model.delta))}
    try:
        rep["train_c_statistic"] = metrics.c_statistic(scores, ds)
    except NoComparablePairs:
        rep["train_c_statistic"] = None
    return rep


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    spec = simgen.SettingSpec(args.setting, n=args.n, censor_rate=args.cr, seed=args.seed)
    ds = simgen.generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data.write_csv(out, ds)
    _write_json(out.with_suffix(".schema.json"), data.schema_for(ds))
    print(f"wrote {ds.n} rows (P={ds.P}, Q={ds.Q}, censored {ds.censor_rate:.1%}) to {out}")


def cmd_fit(args):
    ds = data.standardize(_read(args))
    lam = LambdaTriple(*args.lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        model = fitter.fit(ds, lam, _fit_config(args))
    model.save(args.out)
    report = args.report or str(Path(args.out).with_suffix(".report.json"))
    _write_json(report, _fit_report(model, ds))
    status = "converged" if model.converged else "stopped at the cycle limit"
    print(f"{status} after {model.n_cycles} cycles, objective {model.objective:.6g}; "
          f"model written to {args.out}")


def _read_grid(path):
    if not Path(path).is_file():
        raise UsageError(f"grid file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return [tuple(float(v) for v in row[:3]) for row in csv.reader(fh)
                    if row and not row[0].startswith("lambda")]
        except ValueError as exc:
            raise UsageError(f"bad grid file {path}: {exc}") from exc


def _plan(args):
    grid = _read_grid(args.grid) if args.grid else None
    return tuning.CvPlan(n_folds=args.folds, seed=args.seed, grid=grid,
                         lambda1_range=tuple(args.lambda1_range),
                         lambda2_range=tuple(args.lambda2_range),
                         lambda3_range=tuple(args.lambda3_range),
                         n_points=args.points, refine_rounds=args.refine)


def cmd_tune(args):
    ds = data.standardize(_read(args))
    res = tuning.grid_search(ds, _plan(args), _fit_config(args), n_jobs=_threads(args))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    res.write_surface(outdir / "cvpl_surface.csv")
    res.model.save(outdir / "model.json")
    _write_json(outdir / "fit_report.json", _fit_report(res.model, ds))
    print(f"best lambda {res.best.as_tuple()} with CVPL {res.best_cvpl:.6g}; "
          f"{len(res.surface)} grid points evaluated")


def _load_model(path):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    try:
        return fitter.FittedModel.load(path)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc


def cmd_predict(args):
    model = _load_model(args.model)
    ds = _read(args)
    scores = model.predict_risk(ds.x, ds.z)
    _write_scores(args.out, np.atleast_1d(scores))
    print(f"wrote {ds.n} risk scores to {args.out}")


def _write_scores(path, scores):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "score"])
        for i, s in enumerate(scores):
            w.writerow([i + 1, repr(float(s))])


def _read_scores(path, n):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n:
        raise DimensionMismatch(f"{len(rows)} scores for {n} data rows")
    try:
        return np.array([float(r["score"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise DataError(f"cannot read scores from {path}: {exc}") from exc


def cmd_evaluate(args):
    ds = _read(args)
    if (args.scores is None) == (args.model is None):
        raise UsageError("pass exactly one of --scores or --model")
    if args.scores:
        scores = _read_scores(args.scores, ds.n)
    else:
        scores = np.atleast_1d(_load_model(args.model).predict_risk(ds.x, ds.z))
    cv = None
    if args.cvpl is not None:
        st = data.standardize(ds)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            cv = tuning.cvpl(st, LambdaTriple(*args.cvpl),
                             tuning.CvPlan(n_folds=args.folds, seed=args.seed),
                             _fit_config(args))
    report = metrics.evaluate(scores, ds, cvpl=cv, xi_c=args.xi_c, xi_auc=args.xi_auc)
    if args.out:
        _write_json(args.out, report.to_dict())
    print(report.table())


def cmd_bench(args):
    cfg = _fit_config(args)
    extra = {}
    if args.grid or args.folds != 5:
        grid = _read_grid(args.grid) if args.grid else simgen.default_bench_plan().grid
        extra["plan"] = tuning.CvPlan(n_folds=args.folds, seed=args.seed, grid=grid,
                                      refine_rounds=0)
    res = simgen.run_benchmark(args.setting, args.reps, censor_rates=tuple(args.cr),
                               seed=args.seed, n=args.n, n_jobs=_threads(args), cfg=cfg,
                               split=args.split, **extra)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    res.write_replications(outdir / "replications.csv")
    res.write_summary(outdir / "summary.csv")
    table = res.table()
    (outdir / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    for f in res.failures:
        print(f"replication failed: setting {f['setting']}, rep {f['rep']}: {f['error']}",
              file=sys.stderr)


# ---------------------------------------------------------------- parser

def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="input CSV with a header row")
    p.add_argument("--schema", help="schema JSON (default: <data stem>.schema.json)")


def _add_fit_opts(p):
    p.add_argument("--kernel", choices=("gaussian", "polynomial"), default="gaussian")
    p.add_argument("--max-cycles", type=int, default=50, help="outer cycle budget")
    p.add_argument("--tol", type=float, default=1e-5, help="relative objective tolerance")
    p.add_argument("--spg-iter", type=int, default=300, help="SPG iterations per delta update")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for grids and replications (default: all cores)")


def build_parser():
    parser = _Parser(prog="reggkm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a simulated dataset and its schema")
    p.add_argument("--setting", type=int, required=True, choices=sorted(simgen.SETTINGS))
    p.add_argument("--cr", type=float, default=0.0, help="target censor rate in [0, 1)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit at fixed penalties")
    _add_data(p)
    p.add_argument("--lambda", dest="lam", type=float, nargs=3, required=True,
                   metavar=("L1", "L2", "L3"))
    p.add_argument("--out", default="model.json")
    p.add_argument("--report", help="fit report JSON (default: <out stem>.report.json)")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="pick penalties by cross-validated partial likelihood")
    _add_data(p)
    p.add_argument("--grid", help="CSV of lambda1,lambda2,lambda3 rows (overrides ranges)")
    for k in (1, 2, 3):
        p.add_argument(f"--lambda{k}-range", type=float, nargs=2, default=(1e-3, 1.0),
                       metavar=("LO", "HI"))
    p.add_argument("--points", type=int, default=4, help="log-spaced values per axis")
    p.add_argument("--refine", type=int, default=2, help="refinement rounds")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--outdir", default="tune_out")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("predict", help="score new rows with a saved model")
    p.add_argument("--model", required=True)
    _add_data(p)
    p.add_argument("--out", default="scores.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="C-statistic, AUC and optionally CVPL")
    _add_data(p)
    p.add_argument("--scores", help="CSV with a 'score' column, one row per data row")
    p.add_argument("--model", help="model JSON to score the data with")
    p.add_argument("--cvpl", type=float, nargs=3, metavar=("L1", "L2", "L3"),
                   help="also report CVPL of the kernel model at these penalties")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--xi-c", type=float, help="C-statistic horizon (default: 70th percentile)")
    p.add_argument("--xi-auc", type=float, help="AUC horizon (default: 0.9 * max time)")
    p.add_argument("--out", help="report JSON")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="Monte-Carlo comparison with lasso-Cox")
    p.add_argument("--setting", type=int, nargs="+", required=True,
                   choices=sorted(simgen.SETTINGS))
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--cr", type=float, nargs="+", default=[0.0])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--split", choices=("holdout", "train"), default="holdout")
    p.add_argument("--grid", help="CSV of lambda triples (default: a 2 x 2 x 2 grid)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--outdir", default="bench_out")
    _add_fit_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, InvalidPlan) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionMismatch, NoComparablePairs, InsufficientEvents) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK
