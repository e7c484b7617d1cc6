"""Parametric selection functions, per-price choice probabilities and contraction moduli.

Alternatives are indexed from 0 in this API (alternative 1 of a data file is
index 0). Prices passed to a selection model are always price *levels*; the
``*_logprice`` kinds take logs internally and measure semi-elasticities and
price ranges in log price.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import special
from scipy.stats import qmc

from fcselect.dist import AtomicDistribution

KINDS = ("binary_probit_logprice", "binary_logistic_logprice", "multinomial_logit_linear", "constant")

# exact tensor summation up to this many points, quasi-Monte Carlo beyond
TENSOR_BUDGET = 2_000_000
QMC_POINTS = 4096
QMC_SEED = 20240917

FD_REL_STEP = 1e-5
SUPERMODULAR_SLACK = 1e-8
DEFAULT_BOX = (-10.0, 10.0)
# logistic errors are taken with mean 0 and variance 1
LOGISTIC_UNIT_VARIANCE_SCALE = math.sqrt(3.0) / math.pi
PROB_FLOOR = 1e-300
PROB_CEIL = float(np.nextafter(1.0, 0.0))


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class ThetaVector:
    """Selection-function parameters: price sensitivity, alternative effects, excluded-variable slope."""

    gamma: float
    xi: tuple[float, ...]
    beta: Optional[float] = None

    def __post_init__(self):
        xi = tuple(float(v) for v in self.xi)
        if not xi or xi[0] != 0.0:
            raise SelectionError("xi[0] must be exactly 0 (normalization)")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.beta is not None:
            object.__setattr__(self, "beta", float(self.beta))

    @property
    def J(self) -> int:
        return len(self.xi)

    def free(self) -> np.ndarray:
        """Unrestricted coordinates ``[gamma, xi_2..xi_J, (beta)]``."""
        v = [self.gamma, *self.xi[1:]]
        if self.beta is not None:
            v.append(self.beta)
        return np.array(v, dtype=float)

    @classmethod
    def from_free(cls, v, J: int, has_beta: bool) -> "ThetaVector":
        v = [float(a) for a in v]
        beta = v[J] if has_beta else None
        return cls(gamma=v[0], xi=(0.0, *v[1:J]), beta=beta)

    def names(self) -> list[str]:
        n = ["gamma"] + [f"xi{j + 1}" for j in range(1, self.J)]
        return n + (["beta"] if self.beta is not None else [])

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "xi": list(self.xi), "beta": self.beta}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ThetaVector":
        return cls(gamma=d["gamma"], xi=tuple(d["xi"]), beta=d.get("beta"))


@dataclass(frozen=True)
class SelectionModel:
    """A family ``f_j(p; x, theta)`` of choice probabilities.

    ``binary_*_logprice``: ``f_1 = H(beta*x1 + xi_1 - xi_2 - gamma*(log p_1 - log p_2))``
    and ``f_2 = 1 - f_1`` with ``H`` the standard normal or (unit-variance)
    logistic CDF. ``multinomial_logit_linear``: ``f_j`` proportional to
    ``exp(gamma*p_j + xi_j + beta*x1*[j == 0])``. ``constant``: ``f_j = constants[j]``.
    """

    kind: str
    J: int = 2
    uses_x1: bool = True
    theta_space: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: {"gamma": DEFAULT_BOX, "xi": DEFAULT_BOX, "beta": DEFAULT_BOX})
    constants: Optional[tuple[float, ...]] = None
    logistic_scale: float = LOGISTIC_UNIT_VARIANCE_SCALE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SelectionError(f"unknown selection kind {self.kind!r}")
        if self.J < 2:
            raise SelectionError("J must be at least 2")
        if self.kind.startswith("binary") and self.J != 2:
            raise SelectionError(f"{self.kind} requires J = 2")
        if self.kind == "constant":
            c = self.constants if self.constants is not None else (1.0 / self.J,) * self.J
            c = tuple(float(v) for v in c)
            if len(c) != self.J or min(c) <= 0 or max(c) >= 1 or sum(c) > 1 + 1e-12:
                raise SelectionError("constants must lie in (0,1) and sum to at most 1")
            object.__setattr__(self, "constants", c)
        space = {"gamma": DEFAULT_BOX, "xi": DEFAULT_BOX, "beta": DEFAULT_BOX}
        space.update({k: (float(v[0]), float(v[1])) for k, v in dict(self.theta_space).items()})
        object.__setattr__(self, "theta_space", space)

    @property
    def log_coordinates(self) -> bool:
        return self.kind.endswith("_logprice")

    @property
    def is_binary(self) -> bool:
        return self.J == 2 and self.kind != "multinomial_logit_linear"

    def coord(self, p):
        """Map price levels to the coordinate in which semi-elasticities are measured."""
        return np.log(p) if self.log_coordinates else np.asarray(p, dtype=float)

    def uncoord(self, q):
        return np.exp(q) if self.log_coordinates else np.asarray(q, dtype=float)

    def default_theta(self) -> ThetaVector:
        return ThetaVector(0.0, (0.0,) * self.J, 0.0 if self.uses_x1 else None)

    def check_theta(self, theta: ThetaVector) -> None:
        if theta.J != self.J:
            raise SelectionError("theta has the wrong number of alternatives")
        if (theta.beta is not None) != self.uses_x1:
            raise SelectionError("theta.beta must be present exactly when the model uses x1")
        lo, hi = self.theta_space["gamma"]
        ok = lo <= theta.gamma <= hi
        lo, hi = self.theta_space["xi"]
        ok &= all(lo <= v <= hi for v in theta.xi)
        if theta.beta is not None:
            lo, hi = self.theta_space["beta"]
            ok &= lo <= theta.beta <= hi
        if not ok:
            raise SelectionError("theta out of bounds")

    def box(self) -> list[tuple[float, float]]:
        """Bounds for the free coordinates of :meth:`ThetaVector.free`."""
        b = [self.theta_space["gamma"]] + [self.theta_space["xi"]] * (self.J - 1)
        return b + ([self.theta_space["beta"]] if self.uses_x1 else [])

    # -- evaluation ---------------------------------------------------------

    def _shift(self, x: Mapping[str, float], theta: ThetaVector) -> float:
        if theta.beta is None:
            return 0.0
        return theta.beta * float(x.get("x1", 0.0))

    def binary_index(self, q1, q2, x, theta):
        """Latent index of alternative 0 given coordinates (log prices)."""
        a = self._shift(x, theta) + theta.xi[0] - theta.xi[1]
        return a - theta.gamma * (np.asarray(q1) - np.asarray(q2))

    def binary_table(self, diff: np.ndarray, x, theta) -> np.ndarray:
        """``f_1`` on a grid of coordinate differences ``q1 - q2`` (fresh array, built in place)."""
        a = self._shift(x, theta) + theta.xi[0] - theta.xi[1]
        t = np.multiply(diff, -theta.gamma)
        t += a
        if self.kind == "binary_probit_logprice":
            return special.ndtr(t, out=t)
        t /= self.logistic_scale
        return special.expit(t, out=t)

    def _cdf(self, t):
        if self.kind == "binary_probit_logprice":
            return special.ndtr(t)
        return special.expit(t / self.logistic_scale)

    def _logcdf(self, t):
        if self.kind == "binary_probit_logprice":
            return special.log_ndtr(t)
        return -np.logaddexp(0.0, -np.asarray(t) / self.logistic_scale)

    def _utilities(self, p, x, theta):
        v = theta.gamma * p + np.asarray(theta.xi)
        if theta.beta is not None:
            v = v.copy()
            v[..., 0] += self._shift(x, theta)
        return v

    def prob(self, j: int, p, x: Mapping[str, float], theta: ThetaVector) -> np.ndarray:
        """``f_j`` at price levels ``p`` with trailing axis of length J (vectorized)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "constant":
            return np.full(p.shape[:-1], self.constants[j])
        if self.kind == "multinomial_logit_linear":
            v = self._utilities(p, x, theta)
            f = np.exp(v[..., j] - special.logsumexp(v, axis=-1))
        else:
            t = self.binary_index(np.log(p[..., 0]), np.log(p[..., 1]), x, theta)
            f = self._cdf(t if j == 0 else -t)
        # keep evaluations strictly inside (0, 1) where the index saturates double precision
        return np.clip(f, PROB_FLOOR, PROB_CEIL)

    def log_prob(self, j: int, p, x: Mapping[str, float], theta: ThetaVector) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "constant":
            return np.full(p.shape[:-1], math.log(self.constants[j]))
        if self.kind == "multinomial_logit_linear":
            v = self._utilities(p, x, theta)
            return v[..., j] - special.logsumexp(v, axis=-1)
        t = self.binary_index(np.log(p[..., 0]), np.log(p[..., 1]), x, theta)
        return self._logcdf(t if j == 0 else -t)

    def to_dict(self, theta: Optional[ThetaVector] = None) -> dict:
        d = {"kind": self.kind, "J": self.J, "uses_x1": self.uses_x1,
             "theta_space": {k: list(v) for k, v in self.theta_space.items()}}
        if self.constants is not None:
            d["constants"] = list(self.constants)
        if self.kind == "binary_logistic_logprice":
            d["logistic_scale"] = self.logistic_scale
        if theta is not None:
            d["theta"] = theta.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> tuple["SelectionModel", Optional[ThetaVector]]:
        """Parse a model config; returns the model and the embedded theta, if any."""
        theta = ThetaVector.from_dict(d["theta"]) if d.get("theta") is not None else None
        uses_x1 = d.get("uses_x1", theta.beta is not None if theta is not None else True)
        kw = {}
        if "theta_space" in d:
            kw["theta_space"] = {k: tuple(v) for k, v in d["theta_space"].items()}
        if d.get("constants") is not None:
            kw["constants"] = tuple(d["constants"])
        if "logistic_scale" in d:
            kw["logistic_scale"] = float(d["logistic_scale"])
        return cls(kind=d["kind"], J=int(d.get("J", 2)), uses_x1=bool(uses_x1), **kw), theta


def eval_f(model: SelectionModel, j: int, p: Sequence[float], x: Mapping[str, float],
           theta: ThetaVector) -> float:
    model.check_theta(theta)
    p = np.asarray(p, dtype=float)
    if p.shape != (model.J,) or np.any(p <= 0) and model.log_coordinates:
        raise SelectionError("prices must be a positive J-vector")
    return float(model.prob(j, p, x, theta))


# -- integration over rivals' prices -----------------------------------------

def _rival_points(others: Sequence[AtomicDistribution]) -> tuple[np.ndarray, np.ndarray]:
    """Support points (M, J-1) and probabilities (M,) of the product of rival distributions."""
    sizes = [o.size for o in others]
    if math.prod(sizes) <= TENSOR_BUDGET:
        grids = np.meshgrid(*[o.atoms for o in others], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        w = np.ones(pts.shape[0])
        wgrids = np.meshgrid(*[o.weights for o in others], indexing="ij")
        for g in wgrids:
            w = w * g.ravel()
        return pts, w
    u = qmc.Sobol(d=len(others), scramble=True, seed=QMC_SEED).random(QMC_POINTS)
    cols = []
    for k, o in enumerate(others):
        cum = np.cumsum(o.weights)
        cum[-1] = 1.0
        cols.append(o.atoms[np.minimum(np.searchsorted(cum, u[:, k], side="right"), o.size - 1)])
    return np.stack(cols, axis=-1), np.full(QMC_POINTS, 1.0 / QMC_POINTS)


def _assemble(j: int, own: np.ndarray, rivals: np.ndarray) -> np.ndarray:
    """Full price array (len(own), M, J) with ``own`` in slot j."""
    n, m = own.size, rivals.shape[0]
    J = rivals.shape[1] + 1
    out = np.empty((n, m, J))
    out[:, :, j] = own[:, None]
    idx = [k for k in range(J) if k != j]
    out[:, :, idx] = rivals[None, :, :]
    return out


def choice_prob_given_own_price(model: SelectionModel, j: int, own_price,
                                others: Sequence[AtomicDistribution], x: Mapping[str, float],
                                theta: ThetaVector):
    """Probability of choosing ``j`` at its own price, integrating rivals' prices.

    ``others`` lists the J-1 rival distributions in alternative order with ``j``
    removed. Returns a float for scalar ``own_price`` and an array otherwise.
    """
    if len(others) != model.J - 1:
        raise SelectionError("expected J-1 rival distributions")
    scalar = np.ndim(own_price) == 0
    own = np.atleast_1d(np.asarray(own_price, dtype=float))
    pts, w = _rival_points(others)
    chunk = max(1, 4_000_000 // max(pts.shape[0], 1))
    out = np.empty(own.size)
    for s in range(0, own.size, chunk):
        f = model.prob(j, _assemble(j, own[s:s + chunk], pts), x, theta)
        out[s:s + chunk] = f @ w
    return float(out[0]) if scalar else out


# -- contraction moduli -------------------------------------------------------

@dataclass(frozen=True)
class ModulusReport:
    M: tuple[float, ...]
    rho: float
    rho_star: Optional[float] = None
    supermodular: bool = False

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(float(m) for m in self.M))

    def to_dict(self) -> dict:
        return {"M": list(self.M), "rho": self.rho, "rho_star": self.rho_star,
                "supermodular": self.supermodular}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModulusReport":
        return cls(tuple(d["M"]), d["rho"], d.get("rho_star"), bool(d.get("supermodular", False)))


def _coord_bounds(model: SelectionModel, bounds) -> np.ndarray:
    b = np.asarray(bounds, dtype=float)
    if b.shape != (model.J, 2) or np.any(b[:, 1] < b[:, 0]):
        raise SelectionError("bounds must be J (lower, upper) pairs")
    return model.coord(b)


def _semi_elasticity(model, j, q, x, theta, h):
    """Central difference of ln f_j in coordinate j; ``q`` has trailing axis J."""
    up = q.copy()
    dn = q.copy()
    up[..., j] += h
    dn[..., j] -= h
    s = (model.log_prob(j, model.uncoord(up), x, theta)
         - model.log_prob(j, model.uncoord(dn), x, theta)) / (2.0 * h)
    if not np.all(np.isfinite(s)):
        raise SelectionError("selection function not differentiable on grid")
    return s


def _rival_grid(qb: np.ndarray, j: int, resolution: int) -> np.ndarray:
    """Rival coordinate points (M, J-1): the full tensor grid, or corners plus Sobol points."""
    idx = [k for k in range(qb.shape[0]) if k != j]
    axes = [np.linspace(qb[k, 0], qb[k, 1], resolution) for k in idx]
    if resolution ** (len(idx) + 1) <= TENSOR_BUDGET:
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)
    corners = np.array(list(itertools.product(*[(qb[k, 0], qb[k, 1]) for k in idx])))
    u = qmc.Sobol(d=len(idx), scramble=True, seed=QMC_SEED).random(QMC_POINTS)
    lo = qb[idx, 0]
    sob = lo + u * (qb[idx, 1] - lo)
    return np.concatenate([corners, sob])


def _check_resolution(resolution: int) -> None:
    if resolution < 8:
        raise SelectionError("resolution must be at least 8")


def compute_rho_general(model: SelectionModel, x: Mapping[str, float], theta: ThetaVector,
                        bounds, resolution: int = 64) -> ModulusReport:
    """Grid approximation of the maximum semi-elasticity differences and the general modulus."""
    _check_resolution(resolution)
    qb = _coord_bounds(model, bounds)
    J = model.J
    width = qb[:, 1] - qb[:, 0]
    M = []
    for j in range(J):
        if width[j] == 0.0:
            M.append(0.0)
            continue
        h = FD_REL_STEP * width[j]
        own = np.linspace(qb[j, 0], qb[j, 1], resolution)
        riv = _rival_grid(qb, j, resolution)
        q = _assemble(j, own, riv)
        s = _semi_elasticity(model, j, q, x, theta, h)
        M.append(float(np.max(s.max(axis=1) - s.min(axis=1))))
    rho = (J - 1) / 4.0 * max(w * m for w, m in zip(width, M))
    return ModulusReport(tuple(M), float(rho), None, False)


def check_log_supermodularity(model: SelectionModel, x: Mapping[str, float], theta: ThetaVector,
                              bounds, resolution: int = 64) -> bool:
    """True iff each own semi-elasticity is nondecreasing in every rival price on the grid."""
    _check_resolution(resolution)
    qb = _coord_bounds(model, bounds)
    J = model.J
    width = qb[:, 1] - qb[:, 0]
    for j in range(J):
        if width[j] == 0.0:
            continue
        h = FD_REL_STEP * width[j]
        axes = [np.linspace(qb[k, 0], qb[k, 1], resolution) for k in range(J)]
        if resolution ** J <= TENSOR_BUDGET:
            q = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            s = _semi_elasticity(model, j, q, x, theta, h)
            for k in range(J):
                if k != j and np.any(np.diff(s, axis=k) < -SUPERMODULAR_SLACK):
                    return False
            continue
        base = qb[:, 0] + qmc.Sobol(d=J, scramble=True, seed=QMC_SEED).random(256) * width
        for k in range(J):
            if k == j:
                continue
            lines = np.repeat(base[:, None, :], resolution, axis=1)
            lines[:, :, k] = axes[k][None, :]
            s = _semi_elasticity(model, j, lines, x, theta, h)
            if np.any(np.diff(s, axis=1) < -SUPERMODULAR_SLACK):
                return False
    return True


def compute_rho_star(model: SelectionModel, x: Mapping[str, float], theta: ThetaVector,
                     bounds, resolution: int = 64) -> ModulusReport:
    """Four-corner modulus, valid when own semi-elasticities increase in rival prices.

    ``M`` and ``rho`` are reported from the boundary form of the semi-elasticity
    difference, which is where its supremum sits under that monotonicity.
    """
    if not check_log_supermodularity(model, x, theta, bounds, resolution):
        raise SelectionError("log supermodularity violated; use compute_rho_general")
    b = np.asarray(bounds, dtype=float)
    qb = model.coord(b)
    J = model.J
    lo, hi = b[:, 0], b[:, 1]
    width = qb[:, 1] - qb[:, 0]
    terms, M = [], []
    for j in range(J):
        own_lo_riv_hi = hi.copy()
        own_lo_riv_hi[j] = lo[j]
        own_hi_riv_lo = lo.copy()
        own_hi_riv_lo[j] = hi[j]
        corners = np.stack([hi, own_lo_riv_hi, own_hi_riv_lo, lo])
        lf = model.log_prob(j, corners, x, theta)
        terms.append(float(lf[0] - lf[1] - lf[2] + lf[3]))
        if width[j] == 0.0:
            M.append(0.0)
            continue
        own = np.linspace(qb[j, 0], qb[j, 1], resolution)
        riv = np.array([np.delete(qb[:, 1], j), np.delete(qb[:, 0], j)])
        s = _semi_elasticity(model, j, _assemble(j, own, riv), x, theta, FD_REL_STEP * width[j])
        M.append(float(np.max(np.abs(s[:, 0] - s[:, 1]))))
    rho = (J - 1) / 4.0 * max(w * m for w, m in zip(width, M))
    rho_star = (J - 1) / 4.0 * max(terms)
    return ModulusReport(tuple(M), float(rho), float(max(rho_star, 0.0)), True)
