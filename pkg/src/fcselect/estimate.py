"""Two-step semiparametric maximum likelihood for the selection function.

Step one is the empirical distribution of selected prices per (alternative,
covariate cell). Step two maximizes the average log choice probability, each
probability being an integral of the selection function against the offered
distributions recovered from step one by the fixed-point solver.
"""

from __future__ import annotations

import csv
import logging
import math
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from fcselect.dist import DistributionProfile, empirical_from_sample
from fcselect.fixpoint import (FixedPointConfig, FixedPointReport, SupportKernel,
                               coordinate_difference, iterate_kernel, _profile_from)
from fcselect.selection import TENSOR_BUDGET, SelectionModel, ThetaVector

log = logging.getLogger(__name__)

PENALTY = -1e6
SCHEMA = 1


class DataError(ValueError):
    pass


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Observation:
    choice: int
    covariates: Mapping[str, float]
    price: float


class Dataset:
    """Observed choices (1..J), covariates and the chosen alternative's price."""

    def __init__(self, choice, price, x2, x1=None, J: int = 2, ids=None):
        self.choice = np.asarray(choice, dtype=int)
        self.price = np.asarray(price, dtype=float)
        self.x2 = np.asarray(x2, dtype=float)
        self.x1 = None if x1 is None else np.asarray(x1, dtype=float)
        self.J = int(J)
        n = self.choice.size
        self.ids = np.arange(1, n + 1) if ids is None else np.asarray(ids, dtype=int)
        if n == 0:
            raise DataError("dataset is empty")
        shapes = {self.price.size, self.x2.size, self.ids.size} | (
            {self.x1.size} if self.x1 is not None else set())
        if shapes != {n}:
            raise DataError("columns have different lengths")
        if np.any(self.price <= 0) or not np.all(np.isfinite(self.price)):
            raise DataError("prices must be positive and finite")
        if np.any(self.choice < 1) or np.any(self.choice > self.J):
            raise DataError("choice outside 1..J")

    def __len__(self) -> int:
        return int(self.choice.size)

    @property
    def has_x1(self) -> bool:
        return self.x1 is not None

    @property
    def observations(self) -> list[Observation]:
        return [Observation(int(c), self.covariates(i), float(p))
                for i, (c, p) in enumerate(zip(self.choice, self.price))]

    def covariates(self, i: int) -> dict:
        d = {"x2": float(self.x2[i])}
        if self.x1 is not None:
            d["x1"] = float(self.x1[i])
        return d

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.choice[idx], self.price[idx], self.x2[idx],
                       None if self.x1 is None else self.x1[idx], self.J, self.ids[idx])

    def cells(self) -> dict[str, np.ndarray]:
        """Row indices per covariate cell, keyed like ``"x1=0,x2=1"`` in sorted order."""
        cols = ([("x1", self.x1)] if self.x1 is not None else []) + [("x2", self.x2)]
        keys = np.array([",".join(f"{name}={_fmt(v[i])}" for name, v in cols)
                         for i in range(len(self))])
        return {k: np.flatnonzero(keys == k) for k in sorted(set(keys.tolist()))}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "choice"] + (["x1"] if self.has_x1 else []) + ["x2", "price"])
            for i in range(len(self)):
                row = [int(self.ids[i]), int(self.choice[i])]
                if self.has_x1:
                    row.append(_fmt(self.x1[i]))
                row += [_fmt(self.x2[i]), repr(float(self.price[i]))]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path, J: int = 2) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            required = {"id", "choice", "x2", "price"}
            if not required <= set(header):
                raise DataError(f"dataset header must contain {sorted(required)}; got {header}")
            rows = list(reader)
        try:
            ids = [int(r["id"]) for r in rows]
            choice = [int(r["choice"]) for r in rows]
            x2 = [float(r["x2"]) for r in rows]
            price = [float(r["price"]) for r in rows]
            x1 = [float(r["x1"]) for r in rows] if "x1" in header else None
        except (TypeError, ValueError) as exc:
            raise DataError(f"malformed dataset row: {exc}") from None
        return cls(choice, price, x2, x1, J=J, ids=ids)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def cell_covariates(key: str) -> dict:
    return {k: float(v) for k, v in (part.split("=") for part in key.split(","))}


def estimate_selected_distributions(data: Dataset) -> dict[str, DistributionProfile]:
    """Empirical selected-price distribution per cell, bounded by the realized range."""
    out = {}
    for key, rows in data.cells().items():
        comps = []
        for j in range(1, data.J + 1):
            prices = data.price[rows][data.choice[rows] == j]
            if prices.size == 0:
                raise DataError(f"no selected prices for alternative {j} in cell {key}")
            comps.append(empirical_from_sample(prices, (prices.min(), prices.max())))
        out[key] = DistributionProfile(tuple(comps))
    return out


@dataclass
class _CellSolution:
    probs: np.ndarray
    report: FixedPointReport
    weights: list


class Likelihood:
    """Average log choice probability as a function of theta, with a fixed-point cache.

    The cache is keyed by (cell, theta rounded to 1e-12) and guarded by a lock
    so one instance can serve concurrent evaluations.
    """

    def __init__(self, data: Dataset, model: SelectionModel,
                 config: FixedPointConfig = FixedPointConfig(),
                 selected: Optional[Mapping[str, DistributionProfile]] = None):
        if model.uses_x1 and not data.has_x1:
            raise DataError("model uses x1 but the dataset has no x1 column")
        if model.J != data.J:
            raise DataError("model and dataset disagree on J")
        self.data, self.model, self.config = data, model, config
        self.selected = dict(selected) if selected is not None else estimate_selected_distributions(data)
        cells = data.cells()
        self.counts = {k: np.bincount(data.choice[rows] - 1, minlength=data.J)
                       for k, rows in cells.items()}
        self.covariates = {k: cell_covariates(k) for k in cells}
        self.n = len(data)
        self._cache: dict = {}
        self._lock = threading.Lock()
        self.evaluations = 0
        # theta-free part of the binary index, one matrix per cell
        self._diff = {}
        if model.is_binary and model.kind != "constant":
            for k, prof in self.selected.items():
                if prof[0].size * prof[1].size <= TENSOR_BUDGET:
                    self._diff[k] = coordinate_difference(model, [c.atoms for c in prof])

    @staticmethod
    def _key(theta: ThetaVector) -> tuple:
        return tuple(np.round(theta.free(), 12).tolist())

    def solve_cell(self, key: str, theta: ThetaVector, keep_weights: bool = False) -> _CellSolution:
        ck = (key, self._key(theta))
        with self._lock:
            hit = self._cache.get(ck)
        if hit is not None and (hit.weights or not keep_weights):
            return hit
        sel = self.selected[key]
        x = self.covariates[key]
        kernel = SupportKernel(self.model, [c.atoms for c in sel], x, theta, self._diff.get(key))
        sel_w = [c.weights for c in sel]
        start = (sel_w if self.config.init == "selected"
                 else [np.full(c.size, 1.0 / c.size) for c in sel])
        w, steps, conv = iterate_kernel(kernel, sel_w, start, self.config.tol, self.config.max_iter)
        probs = kernel.joint_probs(w)
        report = FixedPointReport(len(steps), steps[-1], conv, steps)
        sol = _CellSolution(probs, report, w if keep_weights else [])
        with self._lock:
            self._cache[ck] = sol
        return sol

    def __call__(self, theta: ThetaVector) -> float:
        self.model.check_theta(theta)
        self.evaluations += 1
        total = 0.0
        for key, counts in self.counts.items():
            sol = self.solve_cell(key, theta)
            if not sol.report.converged:
                return PENALTY
            p = np.clip(sol.probs, 1e-300, 1.0)
            total += float(counts @ np.log(p))
        return min(total / self.n, 0.0)

    def offered(self, theta: ThetaVector):
        """Plug-in offered profiles and reports per cell at ``theta``."""
        offered, reports = {}, {}
        for key in self.counts:
            sol = self.solve_cell(key, theta, keep_weights=True)
            offered[key] = _profile_from(self.selected[key], sol.weights)
            reports[key] = sol.report
        return offered, reports


def model_choice_prob(j: int, cell: str, theta: ThetaVector,
                      selected: Mapping[str, DistributionProfile], model: SelectionModel,
                      config: FixedPointConfig = FixedPointConfig()) -> tuple[float, bool]:
    """Choice probability of alternative ``j`` (0-based) in ``cell``; second value flags convergence."""
    sel = selected[cell]
    x = cell_covariates(cell)
    kernel = SupportKernel(model, [c.atoms for c in sel], x, theta)
    sel_w = [c.weights for c in sel]
    w, steps, conv = iterate_kernel(kernel, sel_w, sel_w, config.tol, config.max_iter)
    return float(kernel.joint_probs(w)[j]), conv


def log_likelihood(theta: ThetaVector, data: Dataset, selected, model: SelectionModel,
                   config: FixedPointConfig = FixedPointConfig()) -> float:
    return Likelihood(data, model, config, selected)(theta)


@dataclass(frozen=True)
class OptimizerSettings:
    n_starts: int = 3
    max_evals: int = 500
    xatol: float = 1e-6
    fatol: float = 1e-10
    initial_step: float = 0.5
    # lattice offsets as fractions of each coordinate's box half-width
    lattice: tuple[float, ...] = (0.0, 0.1, -0.1)

    def starts(self, box: Sequence[tuple[float, float]]) -> list[np.ndarray]:
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        offs = (list(self.lattice) * self.n_starts)[: self.n_starts]
        return [mid + o * half for o in offs]


@dataclass
class EstimationResult:
    theta_hat: ThetaVector
    loglik: float
    offered: dict
    selected: dict
    reports: dict
    se: Optional[dict] = None
    optimizer_trace: list = field(default_factory=list)
    model: Optional[SelectionModel] = None
    n_obs: int = 0

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "model": self.model.to_dict() if self.model else None,
            "n_obs": self.n_obs,
            "theta_hat": self.theta_hat.to_dict(),
            "loglik": self.loglik,
            "se": self.se,
            "cells": {k: {"selected": self.selected[k].to_dict(),
                          "offered": self.offered[k].to_dict(),
                          "report": self.reports[k].to_dict()} for k in self.offered},
            "optimizer_trace": self.optimizer_trace,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EstimationResult":
        model = SelectionModel.from_dict(d["model"])[0] if d.get("model") else None
        cells = d["cells"]
        return cls(
            theta_hat=ThetaVector.from_dict(d["theta_hat"]),
            loglik=d["loglik"],
            offered={k: DistributionProfile.from_dict(v["offered"]) for k, v in cells.items()},
            selected={k: DistributionProfile.from_dict(v["selected"]) for k, v in cells.items()},
            reports={k: FixedPointReport.from_dict(v["report"]) for k, v in cells.items()},
            se=d.get("se"),
            optimizer_trace=list(d.get("optimizer_trace", [])),
            model=model,
            n_obs=d.get("n_obs", 0),
        )


def fit_mle(data: Dataset, model: SelectionModel, config: FixedPointConfig = FixedPointConfig(),
            optimizer: OptimizerSettings = OptimizerSettings()) -> EstimationResult:
    """Maximize the semiparametric likelihood with bounded Nelder-Mead from a fixed lattice of starts."""
    lik = Likelihood(data, model, config)
    box = model.box()
    J, has_beta = model.J, model.uses_x1
    trace: list = []
    best = {"val": -math.inf, "v": None}

    def negll(v):
        v = np.clip(v, [b[0] for b in box], [b[1] for b in box])
        val = lik(ThetaVector.from_free(v, J, has_beta))
        if val > best["val"]:
            best["val"], best["v"] = val, np.array(v)
        trace.append({"theta": [float(a) for a in v], "loglik": val, "best": best["val"]})
        return -val

    for x0 in optimizer.starts(box):
        simplex = np.vstack([x0] + [x0 + optimizer.initial_step * e for e in np.eye(x0.size)])
        minimize(negll, x0, method="Nelder-Mead", bounds=box,
                 options={"maxfev": optimizer.max_evals, "xatol": optimizer.xatol,
                          "fatol": optimizer.fatol, "initial_simplex": simplex})
    if best["v"] is None or best["val"] <= PENALTY:
        raise EstimationError("likelihood everywhere degenerate")
    theta_hat = ThetaVector.from_free(best["v"], J, has_beta)
    offered, reports = lik.offered(theta_hat)
    return EstimationResult(theta_hat, best["val"], offered, lik.selected, reports,
                            optimizer_trace=trace, model=model, n_obs=len(data))


@dataclass
class BootstrapResult:
    se: dict
    estimates: np.ndarray
    failures: int


def _bootstrap_draw(args):
    data, model, config, optimizer, s = args
    rng = np.random.Generator(np.random.Philox(s))
    try:
        res = fit_mle(data.subset(rng.integers(0, len(data), len(data))), model, config, optimizer)
    except (DataError, EstimationError) as exc:
        log.info("bootstrap resample %d dropped: %s", s, exc)
        return None
    return res.theta_hat


def bootstrap_se(data: Dataset, model: SelectionModel, config: FixedPointConfig = FixedPointConfig(),
                 B: int = 200, seed: int = 0, optimizer: OptimizerSettings = OptimizerSettings(),
                 seeds: Optional[Sequence[int]] = None, threads: int = 1) -> BootstrapResult:
    """Nonparametric bootstrap: resample rows, redo both steps, take the SD of the estimates.

    Resample ``b`` uses seed ``seed + b`` unless ``seeds`` is given.
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    seeds = list(seeds) if seeds is not None else [seed + b for b in range(B)]
    jobs = [(data, model, config, optimizer, s) for s in seeds[:B]]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            thetas = list(pool.map(_bootstrap_draw, jobs))
    else:
        thetas = [_bootstrap_draw(j) for j in jobs]
    ok = [t for t in thetas if t is not None]
    if len(ok) < 2:
        raise EstimationError("fewer than two bootstrap resamples succeeded")
    est = np.array([t.free() for t in ok])
    sd = est.std(axis=0, ddof=1)
    return BootstrapResult(dict(zip(ok[0].names(), sd.tolist())), est, len(thetas) - len(ok))
