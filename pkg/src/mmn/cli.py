"""Command-line interface.

Subcommands: ``fit``, ``sample``, ``skewness``, ``critical-values``,
``power``, ``replay``.  Inputs are CSV (header row, comma separated, ``.``
decimals) and a params JSON of the form::

    {"model": "mmne" | "mmng", "nu": number?, "xi": [...],
     "Omega": [[...]], "delta": [...]}

Exit codes: 0 on success, 2 on input/parse errors, 3 on numerical
failures.  Every command writes a ``<output>.run.json`` sidecar recording
the resolved configuration, seed, output checksums, and wall time;
``mmn replay <sidecar>`` re-executes the recorded command into
``*.replay`` outputs and verifies byte-identical results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import load_csv
from .density import DensityWorkspace
from .em import FitConfig, fit, fit_best
from .errors import MmnError
from .mc import CriticalTable, McConfig, critical_values, power_study
from .mixing import GammaMixing, law_from_spec, model_name
from .params import MmnParams
from .skewness import population_report


class InputError(Exception):
    """User-input problem; maps to exit code 2."""


# -- serialization helpers ----------------------------------------------------


def params_to_dict(params: MmnParams) -> dict:
    out = {
        "model": model_name(params.mixing),
        "xi": [float(v) for v in params.xi],
        "Omega": [[float(v) for v in row] for row in params.omega],
        "delta": [float(v) for v in params.delta],
    }
    if isinstance(params.mixing, GammaMixing):
        out["nu"] = float(params.mixing.nu)
    return out


def params_from_dict(d: dict) -> MmnParams:
    try:
        law = law_from_spec(d["model"], d.get("nu"))
        return MmnParams(np.asarray(d["xi"], dtype=float),
                         np.asarray(d["Omega"], dtype=float),
                         np.asarray(d["delta"], dtype=float), law)
    except (KeyError, TypeError, ValueError, MmnError) as exc:
        raise InputError(f"invalid params JSON: {exc}") from exc


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON {path}: {exc}") from exc


def _write_json(path, obj) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def _write_csv(path, rows) -> str:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)
    return str(path)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_dataset(args):
    try:
        columns = args.columns.split(",") if args.columns else None
        ds = load_csv(args.input, columns=columns)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    if ds.n <= ds.p + 2:
        raise InputError(
            f"insufficient observations: n={ds.n} with p={ds.p}")
    return ds


def _fit_config(args) -> FitConfig:
    init = None
    if getattr(args, "init", None):
        init = params_from_dict(_read_json(args.init))
    return FitConfig(tol=args.tol, max_iter=args.max_iter, init=init)


# -- commands -----------------------------------------------------------------


def cmd_fit(args) -> dict:
    ds = _load_dataset(args)
    law = law_from_spec(args.model, args.nu)
    cfg = _fit_config(args)
    runner = fit_best if args.multistart else fit
    res = runner(ds.values, law, cfg)
    out = params_to_dict(res.params)
    out.update({
        "loglik": res.loglik, "aic": res.aic, "bic": res.bic,
        "iters": res.iters, "converged": res.converged, "n_obs": res.n_obs,
    })
    _write_json(args.out, out)
    return {"outputs": [args.out], "record": args.out + ".run.json",
            "seed": None}


def cmd_sample(args) -> dict:
    params = params_from_dict(_read_json(args.params))
    if args.model and args.model != model_name(params.mixing):
        raise InputError(
            f"--model {args.model} contradicts params model "
            f"{model_name(params.mixing)}")
    if args.n < 0:
        raise InputError("--n must be nonnegative")
    header = [f"y{i + 1}" for i in range(params.p)]
    rows = [header]
    if args.n > 0:
        draws = DensityWorkspace(params).sample(
            np.random.default_rng(args.seed), args.n)
        rows.extend([repr(float(v)) for v in row] for row in draws)
    _write_csv(args.out, rows)
    return {"outputs": [args.out], "record": args.out + ".run.json",
            "seed": args.seed}


def _density_grid_rows(params: MmnParams, size: int, span: float):
    ws = DensityWorkspace(params)
    sd = np.sqrt(np.diag(params.cov))
    mean = params.mean
    ax = [np.linspace(mean[i] - span * sd[i], mean[i] + span * sd[i], size)
          for i in range(2)]
    xx, yy = np.meshgrid(ax[0], ax[1], indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    dens = ws.pdf(pts)
    yield ("x1", "x2", "density")
    for (x1, x2), d in zip(pts, dens):
        yield (repr(float(x1)), repr(float(x2)), repr(float(d)))


def cmd_skewness(args) -> dict:
    if bool(args.params) == bool(args.input):
        raise InputError("give exactly one of --params or --input")
    if args.params:
        params = params_from_dict(_read_json(args.params))
    else:
        ds = _load_dataset(args)
        law = law_from_spec(args.model, args.nu)
        res = fit_best(ds.values, law, _fit_config(args))
        params = res.params
    report = population_report(params)
    _write_json(args.out, report.to_dict())
    outputs = [args.out]
    if args.density_grid:
        if params.p != 2:
            raise InputError("--density-grid requires bivariate parameters")
        _write_csv(args.density_grid,
                   _density_grid_rows(params, args.grid_size, args.grid_span))
        outputs.append(args.density_grid)
    return {"outputs": outputs, "record": args.out + ".run.json",
            "seed": None}


def cmd_critical_values(args) -> dict:
    cfg = McConfig(replicates=args.replicates, dim=args.dim, seed=args.seed,
                   sample_size=args.sample_size, alpha=args.alpha,
                   fit=FitConfig(tol=args.tol, max_iter=args.max_iter),
                   threads=args.threads)
    table = critical_values(cfg)
    csv_path = args.out + ".csv"
    json_path = args.out + ".json"
    _write_csv(csv_path, table.csv_rows())
    _write_json(json_path, table.to_dict())
    return {"outputs": [csv_path, json_path],
            "record": args.out + ".run.json", "seed": args.seed}


def cmd_power(args) -> dict:
    alt = params_from_dict(_read_json(args.alt_params))
    table = CriticalTable.from_dict(_read_json(args.table))
    cfg = McConfig(replicates=args.replicates, dim=alt.p, seed=args.seed,
                   sample_size=table.sample_size, alpha=args.alpha,
                   fit=FitConfig(tol=args.tol, max_iter=args.max_iter),
                   threads=args.threads)
    result = power_study(alt, table, cfg)
    csv_path = args.out + ".csv"
    json_path = args.out + ".json"
    _write_csv(csv_path, result.csv_rows())
    _write_json(json_path, result.to_dict())
    return {"outputs": [csv_path, json_path],
            "record": args.out + ".run.json", "seed": args.seed}


def cmd_replay(args) -> dict:
    record = _read_json(args.record)
    argv = list(record.get("argv", []))
    outputs = record.get("outputs", {})
    if not argv or not outputs:
        raise InputError(f"{args.record}: not a valid run record")
    # substitute every argv token that is a prefix of some output path
    tokens = {}
    for path in outputs:
        for tok in argv:
            if isinstance(tok, str) and path.startswith(tok):
                tokens[tok] = tok + ".replay"
    new_argv = [tokens.get(tok, tok) for tok in argv]
    code = main(new_argv)
    if code != 0:
        raise MmnError(f"replayed command exited with {code}")
    mismatches = []
    for path, digest in outputs.items():
        new_path = path
        for tok, new_tok in tokens.items():
            if path.startswith(tok):
                new_path = new_tok + path[len(tok):]
                break
        if _sha256(new_path) != digest:
            mismatches.append(path)
    if mismatches:
        raise MmnError(f"replay outputs differ for: {mismatches}")
    print(f"replay OK: {len(outputs)} output(s) byte-identical")
    return {"outputs": [], "record": None, "seed": None}


# -- parser -------------------------------------------------------------------


def _add_fit_opts(sp):
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=int, default=2000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmn",
        description="Mean mixtures of multivariate normals: fitting, "
                    "sampling, skewness measures, Monte Carlo tests.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit from a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--columns", default=None,
                   help="comma-separated column subset")
    p.add_argument("--model", required=True, choices=["mmne", "mmng"])
    p.add_argument("--nu", type=float, default=None,
                   help="initial gamma shape (mmng)")
    p.add_argument("--init", default=None, help="params JSON starting point")
    p.add_argument("--multistart", action="store_true",
                   help="refit from sign-pattern starts, keep best")
    p.add_argument("--out", required=True)
    _add_fit_opts(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw samples from given parameters")
    p.add_argument("--params", required=True)
    p.add_argument("--model", default=None, help="consistency check")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("skewness",
                       help="skewness measures from params or a sample")
    p.add_argument("--params", default=None)
    p.add_argument("--input", default=None)
    p.add_argument("--columns", default=None)
    p.add_argument("--model", default="mmne", choices=["mmne", "mmng"])
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--init", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--density-grid", default=None,
                   help="also write a density grid CSV (bivariate only)")
    p.add_argument("--grid-size", type=int, default=101)
    p.add_argument("--grid-span", type=float, default=4.0,
                   help="half-width of the grid in marginal std units")
    _add_fit_opts(p)
    p.set_defaults(func=cmd_skewness)

    p = sub.add_parser("critical-values",
                       help="null critical values of the twelve statistics")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (MMN_THREADS overrides)")
    p.add_argument("--out", required=True, help="output path prefix")
    _add_fit_opts(p)
    p.set_defaults(func=cmd_critical_values)

    p = sub.add_parser("power", help="power against a skewed alternative")
    p.add_argument("--alt-params", required=True)
    p.add_argument("--table", required=True,
                   help="critical-values JSON output")
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="output path prefix")
    _add_fit_opts(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("replay", help="re-run a recorded command and verify")
    p.add_argument("record", help="a .run.json sidecar")
    p.set_defaults(func=cmd_replay)

    return parser


def _write_run_record(args, argv, info, wall: float) -> None:
    if info.get("record") is None:
        return
    config = {k: v for k, v in vars(args).items()
              if k not in ("func", "command") and not callable(v)}
    record = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": info.get("seed"),
        "outputs": {path: _sha256(path) for path in info["outputs"]},
        "wall_time_s": wall,
        "artifact_version": __version__,
    }
    _write_json(info["record"], record)


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        info = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MmnError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    _write_run_record(args, argv, info, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
