"""Command-line entry points.

Exit codes: 0 success, 2 usage or schema error, 3 numerical or estimation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from fcselect.dist import DistributionError, DistributionProfile, to_grid_cdf
from fcselect.estimate import (SCHEMA, DataError, Dataset, EstimationError, bootstrap_se,
                               fit_mle)
from fcselect.fixpoint import FiniteGame, FixedPointConfig, solve_fixed_point, solve_qre
from fcselect.heckman import HeckmanError, heckman_two_step
from fcselect.mc import DgpSpec, dgp_modulus, reproduce_table, simulate_dataset, table_csv
from fcselect.reference import TABLES
from fcselect.selection import (SelectionError, SelectionModel, ThetaVector,
                                check_log_supermodularity, compute_rho_general, compute_rho_star)

log = logging.getLogger("fcselect")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
CDF_POINTS = 300


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


# -- helpers ------------------------------------------------------------------------

def _threads(value: str) -> int:
    if value == "auto":
        return os.cpu_count() or 1
    try:
        t = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'") from None
    if t < 1:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'")
    return t


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _load_json(path: str) -> dict:
    try:
        return json.loads(_existing(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _dump(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _model_from_arg(spec: str, has_x1: bool):
    if spec == "probit":
        return SelectionModel("binary_probit_logprice", J=2, uses_x1=has_x1), None
    if spec == "logistic":
        return SelectionModel("binary_logistic_logprice", J=2, uses_x1=has_x1), None
    try:
        return SelectionModel.from_dict(_load_json(spec))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{spec}: malformed model config ({exc})") from None


def _config(args) -> FixedPointConfig:
    return FixedPointConfig(tol=args.tol, max_iter=args.max_iter, init=args.init)


def _cell_slug(cell: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", cell.replace("=", ""))


def _parse_bounds(text: str):
    try:
        pairs = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError:
        raise UsageError("bounds must look like 'lo:hi,lo:hi'") from None
    if any(len(p) != 2 for p in pairs):
        raise UsageError("bounds must look like 'lo:hi,lo:hi'")
    return pairs


def _covariates(args) -> dict:
    x = {"x2": args.x2}
    if args.x1 is not None:
        x["x1"] = args.x1
    return x


# -- commands -----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        spec = DgpSpec(args.dgp, include_excluded=not args.no_excluded)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.n < 1:
        raise UsageError("n must be at least 1")
    simulate_dataset(spec, args.n, args.seed).data.to_csv(args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    data = Dataset.from_csv(_existing(args.data))
    if args.estimator == "heckman":
        try:
            res = heckman_two_step(data)
        except HeckmanError as exc:
            raise NumericError(str(exc)) from None
        _dump(res.to_dict(), args.out)
        return EXIT_OK
    model, _ = _model_from_arg(args.model, data.has_x1)
    config = _config(args)
    try:
        res = fit_mle(data, model, config)
        if args.bootstrap:
            boot = bootstrap_se(data, model, config, B=args.bootstrap, seed=args.seed,
                                threads=args.threads)
            res.se = boot.se
    except EstimationError as exc:
        raise NumericError(str(exc)) from None
    out = res.to_dict()
    if args.bootstrap:
        out["bootstrap_failures"] = boot.failures
    _dump(out, args.out)
    if args.emit_cdf:
        folder = Path(args.emit_cdf)
        folder.mkdir(parents=True, exist_ok=True)
        for cell, prof in res.offered.items():
            for j, comp in enumerate(prof):
                curve = to_grid_cdf(comp.map_atoms(np.log), CDF_POINTS)
                curve.to_csv(folder / f"cdf_j{j + 1}_{_cell_slug(cell)}.csv")
    return EXIT_OK


def cmd_solve_contraction(args) -> int:
    selected = DistributionProfile.from_dict(_load_json(args.selected))
    model, theta = SelectionModel.from_dict(_load_json(args.model))
    if theta is None:
        raise UsageError("model config must include theta")
    x = _covariates(args)
    modulus = compute_rho_general(model, x, theta, selected.bounds())
    profile, report = solve_fixed_point(selected, model, x, theta, _config(args), modulus)
    _dump({"schema": SCHEMA, "offered": profile.to_dict(), "report": report.to_dict()}, args.out)
    return EXIT_OK if report.converged else EXIT_NUMERIC


def cmd_modulus(args) -> int:
    warnings: list[str] = []
    if args.dgp is not None:
        try:
            spec = DgpSpec(args.dgp)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        report, bounds, warnings = dgp_modulus(spec, args.n, args.seed, args.resolution)
    else:
        if not args.model or not args.bounds:
            raise UsageError("modulus needs --dgp, or --model and --bounds")
        model, theta = SelectionModel.from_dict(_load_json(args.model))
        theta = theta or model.default_theta()
        bounds = _parse_bounds(args.bounds)
        x = _covariates(args)
        if check_log_supermodularity(model, x, theta, bounds, args.resolution):
            report = compute_rho_star(model, x, theta, bounds, args.resolution)
            value = report.rho_star
        else:
            report = compute_rho_general(model, x, theta, bounds, args.resolution)
            value = report.rho
            warnings.append("log supermodularity fails; reporting rho only")
        if value >= 1.0:
            warnings.append("modulus ≥ 1: contraction not guaranteed")
    for w in warnings:
        log.warning(w)
    out = {"schema": SCHEMA, **report.to_dict(), "bounds": [list(b) for b in bounds],
           "warnings": warnings}
    _dump(out, args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    dgps = args.dgp or [1, 2, 3, 4, 5]
    for d in dgps:
        if d not in (1, 2, 3, 4, 5):
            raise UsageError(f"unknown DGP {d}; expected 1..5")
    if args.reps < 1:
        raise UsageError("reps must be at least 1")
    rows = reproduce_table(args.table, dgps, args.reps, args.n, args.seed, args.threads,
                           progress=log.info)
    text = table_csv(args.table, rows, args.reps)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def probit_price_game(k: int, lam: float) -> FiniteGame:
    """Two sellers on a grid of log prices in [0, 1]; payoffs are binary probit choice shares."""
    model = SelectionModel("binary_probit_logprice", J=2, uses_x1=False)
    theta = ThetaVector(1.0, (0.0, 0.0))
    grid = np.linspace(0.0, 1.0, k)
    p = np.exp(grid)
    prices = np.stack(np.meshgrid(p, p, indexing="ij"), axis=-1)
    table = np.stack([model.prob(j, prices, {}, theta) for j in range(2)], axis=-1)
    return FiniteGame([grid, grid], table, lam)


def cmd_qre(args) -> int:
    if args.game:
        spec = _load_json(args.game)
        try:
            game = FiniteGame(spec["strategy_sets"], spec["payoff"],
                              args.lam if args.lam is not None else spec["lambda"])
        except (KeyError, ValueError) as exc:
            raise UsageError(f"malformed game file ({exc})") from None
    else:
        game = probit_price_game(args.grid, args.lam if args.lam is not None else 0.1)
    rng = np.random.Generator(np.random.Philox(args.seed))
    solutions = []
    for s in range(args.starts):
        init = None
        if s > 0:
            init = [rng.dirichlet(np.ones(st.size)) for st in game.strategy_sets]
        mixed, report = solve_qre(game, args.tol, args.max_iter, init)
        solutions.append((mixed, report))
    base = solutions[0][0]
    spread = max(max(float(np.max(np.abs(a - b))) for a, b in zip(m, base))
                 for m, _ in solutions)
    out = {"schema": SCHEMA, "lambda": game.lam,
           "strategy_sets": [s.tolist() for s in game.strategy_sets],
           "mixed": [m.tolist() for m in base],
           "reports": [r.to_dict() for _, r in solutions],
           "max_spread_across_starts": spread}
    _dump(out, args.out)
    return EXIT_OK if all(r.converged for _, r in solutions) else EXIT_NUMERIC


# -- parser ---------------------------------------------------------------------------

def _add_fixpoint_flags(p):
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--init", choices=("selected", "uniform"), default="selected")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fcselect",
                                 description="Offered-distribution recovery under selection.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from one of the five designs")
    p.add_argument("--dgp", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-excluded", action="store_true", help="drop x1 from utility and data")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate theta and offered distributions")
    p.add_argument("--data", required=True)
    p.add_argument("--estimator", choices=("fc", "heckman"), default="fc")
    p.add_argument("--model", default="probit", help="probit, logistic, or a model JSON file")
    p.add_argument("--out")
    p.add_argument("--emit-cdf", metavar="DIR")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_threads, default=1)
    _add_fixpoint_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("solve-contraction", help="recover offered from selected distributions")
    p.add_argument("--selected", required=True, help="profile JSON")
    p.add_argument("--model", required=True, help="model JSON including theta")
    p.add_argument("--x1", type=float)
    p.add_argument("--x2", type=float, default=0.0)
    p.add_argument("--out")
    _add_fixpoint_flags(p)
    p.set_defaults(func=cmd_solve_contraction)

    p = sub.add_parser("modulus", help="contraction moduli")
    p.add_argument("--dgp", type=int)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model")
    p.add_argument("--bounds", help="price bounds 'lo:hi,lo:hi'")
    p.add_argument("--x1", type=float)
    p.add_argument("--x2", type=float, default=0.0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_modulus)

    p = sub.add_parser("reproduce", help="replicate a simulation table")
    p.add_argument("--table", type=int, required=True, choices=sorted(TABLES))
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dgp", type=int, action="append")
    p.add_argument("--threads", type=_threads, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("qre", help="quantal response equilibrium of a finite game")
    p.add_argument("--game", help="game JSON: strategy_sets, payoff table, lambda")
    p.add_argument("--grid", type=int, default=10, help="strategies per player in the built-in game")
    p.add_argument("--lam", type=float)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_qre)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, DataError, DistributionError, SelectionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, EstimationError, HeckmanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
