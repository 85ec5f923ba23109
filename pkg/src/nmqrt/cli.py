"""Command line entry point: ``qrt run <scenario> --cmd ... --out DIR``.

Every run writes its data file(s) plus ``manifest.json`` into ``--out``.
Floats are written with ``repr``, the shortest decimal that round-trips,
so identical inputs and seed give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_acceptance
from .harness import converge, estimate, response_rows, sweep_lambda
from .operators import DimensionError, InvariantError
from .response import TERM_LABELS, THREADS_ENV
from .scenario import ScenarioError, load_scenario

CSV_SCHEMA = {
    "response": "nmqrt-response/1",
    "sweep-lambda": "nmqrt-sweep-lambda/1",
}
RESPONSE_COLUMNS = (
    ["t1", "t2", "chi_total", "chi_closed", "chi_qrt"]
    + [f"term_{i}_{part}" for i in range(1, 12) for part in ("re", "im")]
    + ["im_residue"]
)
SWEEP_COLUMNS = ["lambda", "err_generalized", "err_qrt", "err_onepoint"]
COMMANDS = ("response", "sweep-lambda", "converge", "estimate", "acceptance")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, schema, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


class _Phases:
    def __init__(self):
        self.times = {}

    def run(self, name, fn, *args, **kw):
        t = time.perf_counter()
        out = fn(*args, **kw)
        self.times[name] = time.perf_counter() - t
        return out


def _cmd_response(sc, out, args, ph):
    rows, res = ph.run("response", response_rows, sc)
    ph.run("write", write_csv, out / "response.csv", CSV_SCHEMA["response"], RESPONSE_COLUMNS, rows)
    terms = res.terms
    diag = {
        "t_ref": res.t_ref,
        "max_abs_term": {lab: float(np.abs(terms[:, i]).max()) if len(terms) else 0.0
                         for i, lab in enumerate(TERM_LABELS)},
        "max_im_residue": float(np.abs(res.column("im_residue")).max()) if len(terms) else 0.0,
    }
    return ["response.csv"], diag, []


def _cmd_sweep(sc, out, args, ph):
    if not sc.lambda_sweep:
        raise ScenarioError("lambda_sweep", "sweep-lambda needs a non-empty lambda_sweep list")
    rep = ph.run("sweep", sweep_lambda, sc)
    ph.run("write", write_csv, out / "sweep_lambda.csv", CSV_SCHEMA["sweep-lambda"], SWEEP_COLUMNS,
           rep["rows"])
    return ["sweep_lambda.csv"], {"slopes": rep["slopes"], "rows": rep["rows"]}, []


def _cmd_converge(sc, out, args, ph):
    rep = ph.run("converge", converge, sc)
    write_json(out / "converge.json", rep)
    return ["converge.json"], {"rk4_order": rep["rk4"]["order"]}, []


def _cmd_estimate(sc, out, args, ph):
    diag = ph.run("estimate", estimate, sc, seed=args.seed)
    keys = ("truth", "estimate", "eps", "delta", "eps0", "seed")
    write_json(out / "estimate.json", {k: diag[k] for k in keys})
    return ["estimate.json"], {"error": abs(diag["estimate"] - diag["truth"]),
                               "variant": diag["variant"]}, []


def _cmd_acceptance(sc, out, args, ph):
    results = ph.run("acceptance", run_acceptance, echo=print)
    write_json(out / "acceptance.json", [r.to_dict() for r in results])
    failures = [{"criterion": r.number, "title": r.title, "detail": r.detail}
                for r in results if not r.passed]
    return ["acceptance.json"], {"passed": sum(r.passed for r in results), "total": len(results)}, failures


HANDLERS = {
    "response": _cmd_response,
    "sweep-lambda": _cmd_sweep,
    "converge": _cmd_converge,
    "estimate": _cmd_estimate,
    "acceptance": _cmd_acceptance,
}


def build_parser():
    p = argparse.ArgumentParser(prog="qrt", description="Generalized two-time response functions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run one experiment on a scenario",
                       epilog=f"Thread count for grid points comes from ${THREADS_ENV}.")
    r.add_argument("scenario", help="scenario JSON file or shipped fixture name (a, b, c)")
    r.add_argument("--cmd", choices=COMMANDS, default="response")
    r.add_argument("--out", required=True, type=Path, help="output directory")
    r.add_argument("--seed", type=int, default=0, help="estimator noise seed")
    r.add_argument("--steps", type=int, default=None, help="RK4 steps per unit time")
    return p


def _fail(out, failures, code=1):
    print(json.dumps({"status": "failed", "failures": failures}), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / "failures.json", failures)
        except OSError:
            pass
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        sc = load_scenario(args.scenario)
        if args.steps is not None:
            sc = sc.with_steps(args.steps)
    except (ScenarioError, InvariantError, DimensionError, FileNotFoundError) as exc:
        field = getattr(exc, "field", None)
        return _fail(out, [{"stage": "load", "field": field, "error": str(exc)}], 2)
    out.mkdir(parents=True, exist_ok=True)
    ph = _Phases()
    try:
        files, diag, failures = HANDLERS[args.cmd](sc, out, args, ph)
    except (ScenarioError, InvariantError, DimensionError, ValueError, RuntimeError) as exc:
        return _fail(out, [{"stage": args.cmd, "error": f"{type(exc).__name__}: {exc}"}])
    manifest = {
        "tool": f"nmqrt {__version__}",
        "command": args.cmd,
        "scenario": {"name": sc.name, "sha256": sc.digest()},
        "config": {"seed": args.seed, "steps_per_unit_time": sc.propagation.steps_per_unit_time,
                   "scheme": sc.propagation.scheme, "rtol": sc.propagation.rtol, "lambda": sc.lam},
        "outputs": files,
        "wall_times": ph.times,
        "diagnostics": diag,
    }
    write_json(out / "manifest.json", manifest)
    if failures:
        return _fail(out, failures)
    return 0


if __name__ == "__main__":
    sys.exit(main())
