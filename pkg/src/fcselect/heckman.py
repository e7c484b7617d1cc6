"""Classic two-step sample-selection baseline for binary choice data.

Stage 1 fits a probit of choosing alternative 1 on ``(1, x1, x2)``. Stage 2
regresses each alternative's log price on ``(1, x2, inverse Mills ratio)``
over the observations that chose it, which assumes log prices are linear in
``x2`` with normal errors. The utility parameters are then re-estimated by
maximum likelihood with the fitted normal offered laws plugged in: with
independent normal log prices the choice probability has the closed form
``Phi((a - gamma (mu1 - mu2)) / sqrt(1 + gamma^2 (s1^2 + s2^2)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import statsmodels.api as sm
from scipy import special
from scipy.optimize import minimize

from fcselect.estimate import SCHEMA, Dataset, OptimizerSettings
from fcselect.selection import DEFAULT_BOX, ThetaVector

RANK_TOL = 1e-8


class HeckmanError(RuntimeError):
    pass


@dataclass(frozen=True)
class HeckmanOptions:
    optimizer: OptimizerSettings = OptimizerSettings()
    box: tuple[float, float] = DEFAULT_BOX


@dataclass
class HeckmanResult:
    theta_hat: ThetaVector
    loglik: float
    probit_coef: np.ndarray                 # (const, x1, x2)
    price_coef: list[np.ndarray]            # per alternative: (const, x2, mills)
    sigma: list[float]                      # per alternative, selection-corrected
    cells: dict = field(default_factory=dict)

    @property
    def mills_coef(self) -> list[float]:
        return [float(c[2]) for c in self.price_coef]

    def log_price_law(self, j: int, x2: float) -> tuple[float, float]:
        """Mean and SD of the fitted offered log price of alternative ``j`` (0-based)."""
        c = self.price_coef[j]
        return float(c[0] + c[1] * x2), self.sigma[j]

    def cdf(self, j: int, x2: float, y) -> np.ndarray:
        mu, sd = self.log_price_law(j, x2)
        return special.ndtr((np.asarray(y, dtype=float) - mu) / sd)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "estimator": "heckman",
            "theta_hat": self.theta_hat.to_dict(),
            "loglik": self.loglik,
            "probit_coef": self.probit_coef.tolist(),
            "price_coef": [c.tolist() for c in self.price_coef],
            "sigma": list(self.sigma),
        }


def _stage_two(q: np.ndarray, x2: np.ndarray, mills: np.ndarray, delta: np.ndarray):
    X = np.column_stack([np.ones_like(q), x2, mills])
    if np.linalg.matrix_rank(X, tol=RANK_TOL * max(1.0, np.abs(X).max())) < 3:
        raise HeckmanError("Mills ratio collinear")
    coef, *_ = np.linalg.lstsq(X, q, rcond=None)
    resid = q - X @ coef
    # the residual variance understates sigma^2 by b_mills^2 * mean(delta)
    var = resid @ resid / q.size + coef[2] ** 2 * float(delta.mean())
    if not var > 0:
        raise HeckmanError("non-positive corrected price variance")
    return coef, math.sqrt(var)


def heckman_two_step(data: Dataset, options: HeckmanOptions = HeckmanOptions()) -> HeckmanResult:
    if data.J != 2:
        raise HeckmanError("the two-step baseline needs binary choice data")
    if not data.has_x1:
        # with only the binary x2 the stage-2 Mills term is a function of x2
        raise HeckmanError("Mills ratio collinear")
    d = (data.choice == 1).astype(float)
    if d.min() == d.max():
        raise HeckmanError("every observation chose the same alternative")
    Z = np.column_stack([np.ones(len(data)), data.x1, data.x2])
    try:
        fit = sm.Probit(d, Z).fit(disp=0, method="newton", maxiter=100)
    except Exception as exc:  # perfect separation and singular Hessians surface here
        raise HeckmanError(f"stage-1 probit failed: {exc}") from exc
    alpha = np.asarray(fit.params, dtype=float)
    z = Z @ alpha
    q = np.log(data.price)
    lam1 = np.exp(_log_phi(z) - special.log_ndtr(z))      # phi / Phi
    lam2 = np.exp(_log_phi(z) - special.log_ndtr(-z))     # phi / (1 - Phi)
    coefs, sigmas = [], []
    for j, (rows, mills, delta) in enumerate([
        (d == 1, lam1, lam1 * (lam1 + z)),
        (d == 0, -lam2, lam2 * (lam2 - z)),
    ]):
        c, s = _stage_two(q[rows], data.x2[rows], mills[rows], delta[rows])
        coefs.append(c)
        sigmas.append(s)

    cells = data.cells()
    stats = []
    for key, rows in cells.items():
        x1 = float(data.x1[rows[0]])
        x2 = float(data.x2[rows[0]])
        n1 = float(np.count_nonzero(data.choice[rows] == 1))
        stats.append((x1, n1, rows.size - n1, float(coefs[0][0] + coefs[0][1] * x2),
                      float(coefs[1][0] + coefs[1][1] * x2)))
    stats_arr = np.array(stats)
    s2 = sigmas[0] ** 2 + sigmas[1] ** 2
    n = len(data)

    def negll(v):
        gamma, xi2, beta = v
        a = beta * stats_arr[:, 0] - xi2 - gamma * (stats_arr[:, 3] - stats_arr[:, 4])
        t = a / math.sqrt(1.0 + gamma ** 2 * s2)
        ll = stats_arr[:, 1] @ special.log_ndtr(t) + stats_arr[:, 2] @ special.log_ndtr(-t)
        return -ll / n

    box = [options.box] * 3
    best = None
    opt = options.optimizer
    for x0 in opt.starts(box):
        simplex = np.vstack([x0] + [x0 + opt.initial_step * e for e in np.eye(3)])
        r = minimize(negll, x0, method="Nelder-Mead", bounds=box,
                     options={"maxfev": opt.max_evals, "xatol": opt.xatol, "fatol": opt.fatol,
                              "initial_simplex": simplex})
        if best is None or r.fun < best.fun:
            best = r
    gamma, xi2, beta = (float(v) for v in best.x)
    return HeckmanResult(ThetaVector(gamma, (0.0, xi2), beta), float(-best.fun), alpha, coefs, sigmas)


def _log_phi(z: np.ndarray) -> np.ndarray:
    return -0.5 * z * z - 0.5 * math.log(2.0 * math.pi)
