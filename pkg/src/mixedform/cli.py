"""Command-line driver: ``mixedform <experiment> [options]``.

Writes ``<experiment>.csv`` and ``<experiment>.json`` to ``--out``.  The
CSV is byte-reproducible; wall-clock times only go to the CSV ``seconds``
column when ``--timings`` is given (they are always in the JSON).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex

EXPERIMENTS = ("mixed_poisson", "curl_div", "cavity", "elasticity")


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.12e}"


def report_csv(report: ex.ExperimentReport, timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ex.CSV_COLUMNS)
    prev = None
    for run in report.runs:
        err = run.errors.get(report.primary_error)
        rate = None
        if prev is not None and err and prev[1] and err >= ex.ERROR_FLOOR:
            rate = math.log(prev[1] / err) / math.log(prev[0] / run.h)
        prev = (run.h, err)
        w.writerow([_fmt(run.level), _fmt(run.n), _fmt(run.h), _fmt(run.dofs)]
                   + [_fmt(run.errors.get(c)) for c in ex.CSV_COLUMNS[4:9]]
                   + [_fmt(rate), _fmt(run.seconds) if timings else ""])
    return buf.getvalue()


def eigen_csv(report: ex.ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "computed", "exact", "relative_error"])
    for i, (lam, exact) in enumerate(zip(report.eigenvalues, report.exact_eigenvalues)):
        w.writerow([i, f"{lam:.12e}", f"{exact:.12e}", f"{abs(lam - exact) / exact:.6e}"])
    return buf.getvalue()


def report_json(report: ex.ExperimentReport) -> dict:
    out = {
        "experiment": report.name,
        "parameters": report.parameters,
        "exact_solution": report.exact_solution,
        "fitted_rates": report.rates,
        "expected_rates": report.expected,
        "tolerance": report.tolerance,
        "passed": report.passed(),
        "runs": [{"level": r.level, "n": r.n, "h": r.h, "dofs": r.dofs, "errors": r.errors,
                  "seconds": r.seconds} for r in report.runs],
    }
    if report.eigenvalues is not None:
        out["eigenvalues"] = report.eigenvalues
        out["exact_eigenvalues"] = report.exact_eigenvalues
    return out


def _levels(text, default):
    if text is None:
        return default
    return tuple(int(t) for t in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixedform", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--family", help="RT or BDM (mixed_poisson, curl_div); N1curl or Lagrange (cavity)")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--levels", help="comma-separated mesh sizes, e.g. 4,8,16,32")
    p.add_argument("--n", type=int, default=16, help="mesh size for the cavity")
    p.add_argument("--k", type=int, default=10, help="number of eigenvalues for the cavity")
    p.add_argument("--pattern", choices=("regular", "crisscross"))
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="recorded only; all runs are deterministic")
    p.add_argument("--timings", action="store_true", help="fill the CSV seconds column")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(args) -> ex.ExperimentReport:
    name = args.experiment
    if name == "mixed_poisson":
        rep = ex.run_mixed_poisson(args.family or "RT", args.degree,
                                   _levels(args.levels, (4, 8, 16, 32)),
                                   threads=args.threads, pattern=args.pattern or "regular")
    elif name == "curl_div":
        rep = ex.run_curl_div(args.family or "RT", args.degree, _levels(args.levels, (2, 4, 8)),
                              threads=args.threads)
    elif name == "cavity":
        rep = ex.run_cavity(args.family or "N1curl", args.n, args.k,
                            pattern=args.pattern or "crisscross")
    else:
        rep = ex.run_elasticity(args.degree, _levels(args.levels, (4, 8, 16)),
                                threads=args.threads, pattern=args.pattern or "regular")
    rep.parameters["seed"] = args.seed
    rep.parameters["threads"] = args.threads
    return rep


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.random.seed(args.seed)
    rep = run(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{rep.name}.csv").write_text(report_csv(rep, args.timings))
    if rep.eigenvalues is not None:
        (out / f"{rep.name}_eigenvalues.csv").write_text(eigen_csv(rep))
    (out / f"{rep.name}.json").write_text(json.dumps(report_json(rep), indent=2, default=float))
    summary = ", ".join(f"{k}={v:.3f}" for k, v in rep.rates.items())
    print(f"{rep.name}: {summary or ''} passed={rep.passed()}")
    return 0 if rep.passed() is not False else 1


if __name__ == "__main__":
    sys.exit(main())
