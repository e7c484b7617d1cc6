"""Data-generating processes, replication studies and their summary statistics.

Noise laws are parametrized by location and scale: ``N(0, 0.1)`` has standard
deviation 0.1, and ``EV(0, 0.1)`` is the Gumbel (max) law with location 0 and
scale 0.1. Replication ``r`` of a study draws from a Philox
stream seeded with ``base_seed + r``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from fcselect.dist import mixture
from fcselect.estimate import (DataError, Dataset, EstimationError, OptimizerSettings, fit_mle)
from fcselect.fixpoint import FixedPointConfig
from fcselect.reference import REFERENCE, REFERENCE_REPS, TABLES
from fcselect.selection import SelectionModel

log = logging.getLogger(__name__)

N_GRID = 300
GRID_TAIL = 1e-3

# per DGP: pricing form, intercepts, x2 slopes, noise law, noise scales
_PRICING = {
    1: ("additive", (0.2, 0.1), (0.5, 1.0), "normal", (0.1, 0.2)),
    2: ("additive", (0.2, 0.1), (0.5, 1.0), "gumbel", (0.1, 0.2)),
    3: ("scaled", (0.2, 0.1), (0.5, 1.0), "normal", (0.1, 0.3)),
    4: ("exp_scaled", (0.2, 0.1), (0.1, 0.3), "normal", (0.1, 0.2)),
    5: ("inverse", (0.2, 0.1), (0.1, 0.3), "normal", (0.1, 0.2)),
}


@dataclass(frozen=True)
class DgpSpec:
    dgp_id: int
    gamma: float = 1.0
    xi: tuple[float, float] = (0.0, 1.0)
    beta: float = 0.5
    include_excluded: bool = True
    assumed_error: str = "normal"
    px1: float = 0.5
    px2: float = 0.7

    def __post_init__(self):
        if self.dgp_id not in _PRICING:
            raise ValueError(f"unknown DGP {self.dgp_id}; expected 1..5")
        if self.assumed_error not in ("normal", "logistic"):
            raise ValueError("assumed_error must be 'normal' or 'logistic'")
        if not (0 < self.px1 < 1 and 0 < self.px2 < 1):
            raise ValueError("covariate probabilities must lie in (0,1)")

    @property
    def form(self) -> str:
        return _PRICING[self.dgp_id][0]

    @property
    def delta0(self) -> tuple[float, float]:
        return _PRICING[self.dgp_id][1]

    @property
    def delta(self) -> tuple[float, float]:
        return _PRICING[self.dgp_id][2]

    @property
    def noise(self) -> str:
        return _PRICING[self.dgp_id][3]

    @property
    def noise_scale(self) -> tuple[float, float]:
        return _PRICING[self.dgp_id][4]

    def truth(self) -> dict:
        d = {"gamma": self.gamma, "xi2": self.xi[1]}
        if self.include_excluded:
            d["beta"] = self.beta
        return d

    def selection_model(self) -> SelectionModel:
        kind = "binary_probit_logprice" if self.assumed_error == "normal" else "binary_logistic_logprice"
        return SelectionModel(kind, J=2, uses_x1=self.include_excluded)

    # -- offered log-price laws ---------------------------------------------

    def _level(self, j: int, x2):
        return self.delta0[j] + self.delta[j] * np.asarray(x2, dtype=float)

    def draw_noise(self, rng: np.random.Generator, j: int, n: int) -> np.ndarray:
        if self.noise == "normal":
            return rng.standard_normal(n) * self.noise_scale[j]
        return rng.gumbel(0.0, self.noise_scale[j], n)

    def log_price(self, j: int, x2, eta):
        m = self._level(j, x2)
        if self.form == "additive":
            return m + eta
        if self.form == "scaled":
            return m * (1.0 + eta)
        if self.form == "exp_scaled":
            return np.exp(m * (1.0 + eta))
        return m / (1.0 + eta)

    def log_price_cdf(self, j: int, x2: float, y) -> np.ndarray:
        """Exact CDF of alternative ``j``'s offered log price given ``x2``."""
        y = np.asarray(y, dtype=float)
        m = float(self._level(j, x2))
        s = self.noise_scale[j]
        if self.form == "additive":
            if self.noise == "normal":
                return special.ndtr((y - m) / s)
            return np.exp(-np.exp(-(y - m) / s))
        if self.form == "scaled":
            return special.ndtr((y / m - 1.0) / s)
        if self.form == "exp_scaled":
            with np.errstate(divide="ignore", invalid="ignore"):
                z = (np.log(np.where(y > 0, y, 1.0)) / m - 1.0) / s
            return np.where(y > 0, special.ndtr(z), 0.0)
        # m / (1 + eta): negative values come from 1 + eta < 0
        p_neg = special.ndtr(-1.0 / s)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (m / np.where(y != 0, y, 1.0) - 1.0) / s
        pos = p_neg + 1.0 - special.ndtr(z)
        neg = p_neg - special.ndtr(z)
        return np.where(y > 0, pos, np.where(y < 0, neg, p_neg))

    def score_grid(self, j: int, x2: float, n_grid: int = N_GRID) -> np.ndarray:
        """Fixed evaluation grid between the 0.1% and 99.9% quantiles of the offered log price."""
        lo = self._quantile(j, x2, GRID_TAIL)
        hi = self._quantile(j, x2, 1.0 - GRID_TAIL)
        return np.linspace(lo, hi, n_grid)

    def _quantile(self, j: int, x2: float, u: float) -> float:
        from scipy.optimize import brentq
        m = float(self._level(j, x2))
        a, b = m - 1.0, m + 1.0
        while self.log_price_cdf(j, x2, a) > u:
            a -= 2.0 * (b - a)
        while self.log_price_cdf(j, x2, b) < u:
            b += 2.0 * (b - a)
        return brentq(lambda t: float(self.log_price_cdf(j, x2, t)) - u, a, b, xtol=1e-12)


@dataclass
class SimulatedData:
    data: Dataset
    offered_log_prices: np.ndarray  # (n, 2), kept for oracle checks


def simulate_dataset(spec: DgpSpec, n: int, seed: int) -> SimulatedData:
    """Simulate covariates, offered prices and probit choices; only the chosen price is kept."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.Philox(seed))
    x1 = (rng.random(n) < spec.px1).astype(float)
    x2 = (rng.random(n) < spec.px2).astype(float)
    eta = np.column_stack([spec.draw_noise(rng, 0, n), spec.draw_noise(rng, 1, n)])
    eps = rng.standard_normal(n)
    q = np.column_stack([spec.log_price(0, x2, eta[:, 0]), spec.log_price(1, x2, eta[:, 1])])
    shift = spec.beta * x1 if spec.include_excluded else 0.0
    du = -spec.gamma * (q[:, 0] - q[:, 1]) + spec.xi[0] - spec.xi[1] + shift + eps
    choice = np.where(du > 0, 1, 2)
    price = np.exp(q[np.arange(n), choice - 1])
    data = Dataset(choice, price, x2, x1 if spec.include_excluded else None, J=2)
    return SimulatedData(data, q)


# -- scoring --------------------------------------------------------------------

def integrated_errors(curves: np.ndarray, truth: np.ndarray, grid: np.ndarray,
                      measure: str = "truth") -> tuple[float, float]:
    """Integrated squared bias and integrated MSE of replicated curves (trapezoid rule).

    ``measure="truth"`` integrates against the distribution described by the
    true CDF, i.e. over ``d truth(x)``; ``measure="grid"`` integrates over ``dx``.
    """
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    truth = np.asarray(truth, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or curves.shape[1] != grid.size or truth.shape != grid.shape:
        raise ValueError("grid mismatch between curves and truth")
    if measure not in ("truth", "grid"):
        raise ValueError("measure must be 'truth' or 'grid'")
    axis = truth if measure == "truth" else grid
    bias2 = (curves.mean(axis=0) - truth) ** 2
    mse = ((curves - truth) ** 2).mean(axis=0)
    return float(np.trapezoid(bias2, axis)), float(np.trapezoid(mse, axis))


CURVES = ((0, 0.0), (1, 0.0), (0, 1.0), (1, 1.0))


def curve_label(j: int, x2: float) -> str:
    return f"F{j + 1}(.|x2={int(x2)})"


def _fc_curves(spec: DgpSpec, data: Dataset, result) -> dict:
    """Offered log-price CDFs per (j, x2): cells sharing x2 mixed by their sample shares."""
    out = {}
    for j, x2 in CURVES:
        keys = [k for k in result.offered if k.endswith(f"x2={int(x2)}")]
        shares = [np.count_nonzero((data.x2 == x2) & _x1_match(data, k)) for k in keys]
        dist = mixture([result.offered[k][j] for k in keys], shares).map_atoms(np.log)
        out[curve_label(j, x2)] = dist.cdf(spec.score_grid(j, x2))
    return out


def _x1_match(data: Dataset, key: str):
    if not data.has_x1:
        return np.ones(len(data), dtype=bool)
    x1 = float(key.split(",")[0].split("=")[1])
    return data.x1 == x1


def _heckman_curves(spec: DgpSpec, res) -> dict:
    out = {}
    for j, x2 in CURVES:
        mu, sd = res.log_price_law(j, x2)
        out[curve_label(j, x2)] = special.ndtr((spec.score_grid(j, x2) - mu) / sd)
    return out


@dataclass
class ReplicationOutcome:
    index: int
    estimates: dict = field(default_factory=dict)   # estimator -> {param: value}
    curves: dict = field(default_factory=dict)      # estimator -> {label: array}
    failures: dict = field(default_factory=dict)    # estimator -> message
    iterations: int = 0                             # most fixed-point iterations over cells at theta-hat


ESTIMATORS = ("functional_contraction", "heckman")


@dataclass(frozen=True)
class StudyTask:
    spec: DgpSpec
    n: int
    seed: int
    index: int
    estimators: tuple[str, ...]
    config: FixedPointConfig
    optimizer: OptimizerSettings


def run_replication(task: StudyTask) -> ReplicationOutcome:
    from fcselect.heckman import HeckmanError, heckman_two_step

    out = ReplicationOutcome(task.index)
    sim = simulate_dataset(task.spec, task.n, task.seed)
    data = sim.data
    if "functional_contraction" in task.estimators:
        try:
            res = fit_mle(data, task.spec.selection_model(), task.config, task.optimizer)
            out.estimates["functional_contraction"] = _named(res.theta_hat)
            out.curves["functional_contraction"] = _fc_curves(task.spec, data, res)
            out.iterations = max(r.iterations for r in res.reports.values())
        except (DataError, EstimationError) as exc:
            out.failures["functional_contraction"] = str(exc)
    if "heckman" in task.estimators:
        try:
            hk = heckman_two_step(data)
            out.estimates["heckman"] = _named(hk.theta_hat)
            out.curves["heckman"] = _heckman_curves(task.spec, hk)
        except (HeckmanError, DataError, EstimationError) as exc:
            out.failures["heckman"] = str(exc)
    return out


def _named(theta) -> dict:
    d = {"gamma": theta.gamma, "xi2": theta.xi[1]}
    if theta.beta is not None:
        d["beta"] = theta.beta
    return d


@dataclass
class ParamStats:
    bias: float
    sd: float
    rmse: float


@dataclass
class StudySummary:
    spec: DgpSpec
    n: int
    reps: int
    params: dict          # estimator -> {param: ParamStats}
    curves: dict          # estimator -> {label: (ibias2, imse)}
    failures: dict        # estimator -> count
    estimates: dict = field(default_factory=dict)  # estimator -> (R, k) array, row = replication
    iterations: list = field(default_factory=list)  # per replication, see ReplicationOutcome

    def param_table(self) -> list[dict]:
        rows = []
        for est, stats_ in self.params.items():
            for name, s in stats_.items():
                rows.append({"estimator": est, "parameter": name, "bias": s.bias, "sd": s.sd,
                             "rmse": s.rmse})
        return rows


def summarize(spec: DgpSpec, n: int, outcomes: Sequence[ReplicationOutcome],
              estimators: Sequence[str]) -> StudySummary:
    outcomes = sorted(outcomes, key=lambda o: o.index)
    truth = spec.truth()
    params, curves, failures, estimates = {}, {}, {}, {}
    for est in estimators:
        ok = [o for o in outcomes if est in o.estimates]
        failures[est] = len(outcomes) - len(ok)
        if not ok:
            continue
        names = list(truth)
        arr = np.array([[o.estimates[est][p] for p in names] for o in ok])
        estimates[est] = arr
        err = arr - np.array([truth[p] for p in names])
        R = len(ok)
        sd = err.std(axis=0, ddof=1) if R > 1 else np.zeros(len(names))
        params[est] = {p: ParamStats(float(err[:, i].mean()), float(sd[i]),
                                     float(np.sqrt((err[:, i] ** 2).mean())))
                       for i, p in enumerate(names)}
        curves[est] = {}
        for j, x2 in CURVES:
            label = curve_label(j, x2)
            grid = spec.score_grid(j, x2)
            mat = np.array([o.curves[est][label] for o in ok])
            curves[est][label] = integrated_errors(mat, spec.log_price_cdf(j, x2, grid), grid)
    return StudySummary(spec, n, len(outcomes), params, curves, failures, estimates,
                        [o.iterations for o in outcomes])


def run_study(spec: DgpSpec, n: int, reps: int, base_seed: int = 0,
              estimators: Sequence[str] = ESTIMATORS,
              config: FixedPointConfig = FixedPointConfig(),
              optimizer: OptimizerSettings = OptimizerSettings(),
              threads: int = 1,
              progress: Optional[Callable[[int], None]] = None) -> StudySummary:
    """Replicate simulate-estimate-score ``reps`` times; failures are counted, not raised."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    for e in estimators:
        if e not in ESTIMATORS:
            raise ValueError(f"unknown estimator {e!r}")
    tasks = [StudyTask(spec, n, base_seed + r, r, tuple(estimators), config, optimizer)
             for r in range(reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = []
            for o in pool.map(run_replication, tasks):
                outcomes.append(o)
                if progress:
                    progress(len(outcomes))
    else:
        outcomes = []
        for t in tasks:
            outcomes.append(run_replication(t))
            if progress:
                progress(len(outcomes))
    return summarize(spec, n, outcomes, estimators)


# -- table reproduction -----------------------------------------------------------

THETA_STATS = ("bias", "sd", "rmse")
CDF_STATS = ("ibias2", "imse")
CURVE_ORDER = tuple(curve_label(j, x2) for j, x2 in CURVES)


def variant_spec(dgp_id: int, variant: str) -> DgpSpec:
    if variant == "base":
        return DgpSpec(dgp_id)
    if variant == "no_excluded":
        return DgpSpec(dgp_id, include_excluded=False)
    if variant == "logistic":
        return DgpSpec(dgp_id, assumed_error="logistic")
    raise ValueError(f"unknown variant {variant!r}")


def theta_verdict(values: Sequence[float], ref: Sequence[float], reps: int,
                  ref_reps: int = REFERENCE_REPS) -> bool:
    """Bias within max(0.03, 3 MC standard errors); SD and RMSE within a relative band.

    The relative band is 15%, widened to three standard errors of a sample SD
    when either side has few replications.
    """
    bias, sd, rmse = values
    rbias, rsd, rrmse = ref
    if reps < 2:
        return False
    bias_tol = max(0.03, 3.0 * rsd * math.sqrt(1.0 / reps + 1.0 / ref_reps))
    rel = max(0.15, 3.0 * math.sqrt(1.0 / (2 * reps) + 1.0 / (2 * ref_reps)))
    return (abs(bias - rbias) <= bias_tol and abs(sd - rsd) <= rel * rsd
            and abs(rmse - rrmse) <= rel * rrmse)


def cdf_verdict(values: Sequence[float], ref: Sequence[float]) -> bool:
    """IMSE within max(0.0015, 50%) of the reference; IBias^2 at most max(0.002, twice the reference)."""
    ibias2, imse = values
    rb, rm = ref
    return ibias2 <= max(0.002, 2.0 * rb) and abs(imse - rm) <= max(0.0015, 0.5 * rm)


@dataclass
class TableRow:
    dgp: int
    row: str
    cells: dict          # group -> tuple of stats (None when the group failed entirely)
    verdicts: dict       # group -> "pass" | "fail" | "n/a"
    failures: dict       # group -> failed replication count


def reproduce_table(table: int, dgps: Sequence[int] = (1, 2, 3, 4, 5), reps: int = 500,
                    n: Optional[int] = None, base_seed: int = 0, threads: int = 1,
                    config: FixedPointConfig = FixedPointConfig(),
                    optimizer: OptimizerSettings = OptimizerSettings(),
                    progress: Optional[Callable[[str], None]] = None) -> list[TableRow]:
    """Run the studies behind one replication table and score them against the reference.

    ``n`` overrides the sample size of every column group.
    """
    if table not in TABLES:
        raise ValueError(f"unknown table {table}; expected 1..8")
    meta = TABLES[table]
    theta = meta["kind"] == "theta"
    rows: list[TableRow] = []
    for dgp in dgps:
        spec = variant_spec(dgp, meta["variant"])
        # (group, summary, estimator) per column group
        columns = []
        if meta["groups"][0] == "functional_contraction":
            size = n or meta["n"][0]
            summary = run_study(spec, size, reps, base_seed, ESTIMATORS, config, optimizer,
                                threads)
            columns = [(g, summary, g) for g in meta["groups"]]
        else:
            for g, default_n in zip(meta["groups"], meta["n"]):
                summary = run_study(spec, n or default_n, reps, base_seed,
                                    ("functional_contraction",), config, optimizer, threads)
                columns.append((g, summary, "functional_contraction"))
        if progress:
            progress(f"table {table} DGP {dgp} done")
        names = list(spec.truth()) if theta else list(CURVE_ORDER)
        ref_rows = REFERENCE[table][dgp]
        width = len(THETA_STATS) if theta else len(CDF_STATS)
        for name in names:
            cells, verdicts, failures = {}, {}, {}
            for k, (g, summary, est) in enumerate(columns):
                failures[g] = summary.failures.get(est, summary.reps)
                ref = ref_rows[name][k * width:(k + 1) * width]
                if theta:
                    st = summary.params.get(est, {}).get(name)
                    vals = (st.bias, st.sd, st.rmse) if st else None
                    ok = vals is not None and theta_verdict(vals, ref, summary.reps - failures[g])
                else:
                    vals = summary.curves.get(est, {}).get(name)
                    ok = vals is not None and cdf_verdict(vals, ref)
                cells[g] = vals
                verdicts[g] = "pass" if ok else "fail"
            rows.append(TableRow(dgp, name, cells, verdicts, failures))
    return rows


def table_csv(table: int, rows: Sequence[TableRow], reps: int) -> str:
    meta = TABLES[table]
    stats_ = THETA_STATS if meta["kind"] == "theta" else CDF_STATS
    header = ["table", "dgp", "row", "reps"]
    for g in meta["groups"]:
        header += [f"{g}:{s}" for s in stats_] + [f"{g}:failures", f"{g}:verdict"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        line = [table, r.dgp, r.row, reps]
        for g in meta["groups"]:
            vals = r.cells[g]
            line += ([f"{v:.6f}" for v in vals] if vals is not None else ["nan"] * len(stats_))
            line += [r.failures[g], r.verdicts[g]]
        w.writerow(line)
    return buf.getvalue()


def dgp_modulus(spec: DgpSpec, n: int = 1000, seed: int = 0, resolution: int = 64):
    """Moduli at the true theta with bounds equal to each alternative's realized price range.

    Ranges are pooled over covariate cells; the returned report is the cell
    (value of x1) with the largest modulus. Returns (report, bounds, warnings).
    """
    from fcselect.selection import (ThetaVector, check_log_supermodularity, compute_rho_general,
                                    compute_rho_star)

    data = simulate_dataset(spec, n, seed).data
    bounds = [(float(data.price[data.choice == j].min()), float(data.price[data.choice == j].max()))
              for j in (1, 2)]
    model = spec.selection_model()
    theta = ThetaVector(spec.gamma, spec.xi, spec.beta if spec.include_excluded else None)
    best, warnings = None, []
    for x1 in ((0.0, 1.0) if spec.include_excluded else (0.0,)):
        x = {"x1": x1, "x2": 0.0}
        if check_log_supermodularity(model, x, theta, bounds, resolution):
            rep = compute_rho_star(model, x, theta, bounds, resolution)
            key = rep.rho_star
        else:
            rep = compute_rho_general(model, x, theta, bounds, resolution)
            key = rep.rho
            warnings.append("log supermodularity fails; reporting rho only")
        if best is None or key > best[0]:
            best = (key, rep)
    if best[0] >= 1.0:
        warnings.append("modulus ≥ 1: contraction not guaranteed")
    return best[1], bounds, warnings
