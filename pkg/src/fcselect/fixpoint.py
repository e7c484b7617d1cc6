"""The inversion operator, the forward selection map, and fixed-point solvers.

Everything here works on atomic profiles. The operator reweights the atoms of
the selected distribution, so after one application every iterate lives on
the selected support; :class:`SupportKernel` precomputes the selection
function on that support so that an iteration is a handful of tensor
contractions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from fcselect.dist import (AtomicDistribution, DistributionProfile, log_ratio_spread,
                           profile_distance)
from fcselect.selection import (TENSOR_BUDGET, ModulusReport, SelectionError, SelectionModel,
                                ThetaVector, _rival_points, choice_prob_given_own_price,
                                compute_rho_general)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-10
    max_iter: int = 200
    init: Union[str, DistributionProfile] = "selected"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if isinstance(self.init, str) and self.init not in ("selected", "uniform"):
            raise ValueError("init must be 'selected', 'uniform' or a DistributionProfile")


@dataclass
class FixedPointReport:
    iterations: int
    final_step: float
    converged: bool
    per_iteration_steps: list[float] = field(default_factory=list)
    modulus: Optional[ModulusReport] = None

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "final_step": _json_float(self.final_step),
                "converged": self.converged,
                "per_iteration_steps": [_json_float(s) for s in self.per_iteration_steps],
                "modulus": self.modulus.to_dict() if self.modulus else None}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FixedPointReport":
        mod = ModulusReport.from_dict(d["modulus"]) if d.get("modulus") else None
        return cls(d["iterations"], float(d["final_step"]), d["converged"],
                   [float(s) for s in d["per_iteration_steps"]], mod)


def _json_float(v: float):
    return v if math.isfinite(v) else str(v)


class SupportKernel:
    """Selection probabilities tabulated on a fixed product support.

    For J = 2 with complementary choice probabilities only one matrix is
    stored. Above the tensor budget, rival prices are integrated with a fixed
    quasi-Monte Carlo design drawn from the current weights.
    """

    def __init__(self, model: SelectionModel, supports: Sequence[np.ndarray],
                 x: Mapping[str, float], theta: ThetaVector, diff: Optional[np.ndarray] = None):
        self.model, self.x, self.theta = model, x, theta
        self.supports = [np.asarray(s, dtype=float) for s in supports]
        self.J = len(self.supports)
        sizes = [s.size for s in self.supports]
        self.exact = math.prod(sizes) <= TENSOR_BUDGET
        self.binary = model.is_binary
        self.tables: list[np.ndarray] = []
        if not self.exact:
            return
        if self.binary:
            if model.kind == "constant":
                self.tables = [np.full((sizes[0], sizes[1]), model.constants[0])]
                return
            if diff is None:
                diff = coordinate_difference(model, self.supports)
            self.tables = [model.binary_table(diff, x, theta)]
            return
        grids = np.meshgrid(*self.supports, indexing="ij")
        p = np.stack(grids, axis=-1)
        self.tables = [model.prob(j, p, x, theta) for j in range(self.J)]

    def choice_probs(self, weights: Sequence[np.ndarray]) -> list[np.ndarray]:
        """``Pr_j`` at each own atom, rivals distributed by ``weights``."""
        if self.binary and self.exact:
            F = self.tables[0]
            if self.model.kind == "constant":
                c = self.model.constants
                return [np.full(F.shape[0], c[0]), np.full(F.shape[1], c[1])]
            return [F @ weights[1], 1.0 - weights[0] @ F]
        out = []
        for j in range(self.J):
            if self.exact:
                t = self.tables[j]
                for k in reversed(range(self.J)):
                    if k != j:
                        t = np.tensordot(t, weights[k], axes=([k], [0]))
                out.append(t)
            else:
                others = [AtomicDistribution(self.supports[k], weights[k],
                                             (self.supports[k][0], self.supports[k][-1]))
                          for k in range(self.J) if k != j]
                out.append(choice_prob_given_own_price(self.model, j, self.supports[j], others,
                                                       self.x, self.theta))
        return out

    def joint_probs(self, weights: Sequence[np.ndarray]) -> np.ndarray:
        """Unconditional choice probabilities when prices are drawn from ``weights``."""
        pr = self.choice_probs(weights)
        return np.array([float(w @ p) for w, p in zip(weights, pr)])


def coordinate_difference(model: SelectionModel, supports: Sequence[np.ndarray]) -> np.ndarray:
    """``q1 - q2`` over the product of two supports; reusable across theta for binary kinds."""
    q1 = model.coord(np.asarray(supports[0], dtype=float))
    q2 = model.coord(np.asarray(supports[1], dtype=float))
    return np.subtract.outer(q1, q2)


def _profile_from(supports_like: DistributionProfile, weights: Sequence[np.ndarray]) -> DistributionProfile:
    return DistributionProfile(tuple(c.with_weights(w) for c, w in zip(supports_like, weights)))


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / v.sum()


def forward_map(offered: DistributionProfile, model: SelectionModel, x: Mapping[str, float],
                theta: ThetaVector) -> DistributionProfile:
    """Selected distributions implied by offered ones (Bayes' rule with ``Pr_j``)."""
    kernel = SupportKernel(model, [c.atoms for c in offered], x, theta)
    w = [c.weights for c in offered]
    pr = kernel.choice_probs(w)
    return _profile_from(offered, [_normalize(wj * pj) for wj, pj in zip(w, pr)])


def _invert_step(selected_w, pr):
    return [_normalize(g / p) for g, p in zip(selected_w, pr)]


def apply_T(candidate: DistributionProfile, selected: DistributionProfile, model: SelectionModel,
            x: Mapping[str, float], theta: ThetaVector) -> DistributionProfile:
    """One application of the inversion operator: reweight ``selected`` by ``1/Pr_j(.; candidate)``."""
    if candidate.J != selected.J:
        raise ValueError("profile arity mismatch")
    if all(c.same_support(s) for c, s in zip(candidate, selected)):
        kernel = SupportKernel(model, [s.atoms for s in selected], x, theta)
        pr = kernel.choice_probs([c.weights for c in candidate])
    else:
        pr = [choice_prob_given_own_price(model, j, selected[j].atoms,
                                          [candidate[k] for k in range(candidate.J) if k != j],
                                          x, theta)
              for j in range(selected.J)]
    return _profile_from(selected, _invert_step([s.weights for s in selected], pr))


def _initial_weights(selected: DistributionProfile, model, x, theta, config):
    init = config.init
    if isinstance(init, DistributionProfile):
        if all(c.same_support(s) for c, s in zip(init, selected)):
            return [c.weights for c in init], False
        return [c.weights for c in apply_T(init, selected, model, x, theta)], True
    if init == "uniform":
        return [np.full(s.size, 1.0 / s.size) for s in selected], False
    return [s.weights for s in selected], False


def iterate_kernel(kernel: SupportKernel, selected_w: Sequence[np.ndarray],
                   start_w: Sequence[np.ndarray], tol: float, max_iter: int,
                   steps: Optional[list] = None):
    """Iterate the operator on a fixed support; returns (weights, steps, converged)."""
    steps = [] if steps is None else steps
    w = list(start_w)
    converged = False
    while len(steps) < max_iter:
        new = _invert_step(selected_w, kernel.choice_probs(w))
        step = max(log_ratio_spread(a, b) for a, b in zip(new, w))
        steps.append(max(step, 0.0))
        w = new
        if not math.isfinite(step):
            break
        if step <= tol:
            converged = True
            break
    return w, steps, converged


def solve_fixed_point(selected: DistributionProfile, model: SelectionModel, x: Mapping[str, float],
                      theta: ThetaVector, config: FixedPointConfig = FixedPointConfig(),
                      modulus: Optional[ModulusReport] = None,
                      kernel: Optional[SupportKernel] = None):
    """Recover offered distributions from selected ones by iterating the operator.

    Non-convergence is reported (``converged=False``), never raised.
    """
    if kernel is None:
        kernel = SupportKernel(model, [s.atoms for s in selected], x, theta)
    start, counted = _initial_weights(selected, model, x, theta, config)
    steps: list[float] = []
    if counted:
        init = config.init
        first = _profile_from(selected, start)
        steps.append(profile_distance(first, init))
    w, steps, converged = iterate_kernel(kernel, [s.weights for s in selected], start,
                                         config.tol, config.max_iter, steps)
    report = FixedPointReport(len(steps), steps[-1], converged and steps[-1] <= config.tol,
                              steps, modulus)
    if not report.converged:
        log.debug("fixed point not reached after %d iterations (step %.3g)", report.iterations,
                  report.final_step)
    return _profile_from(selected, w), report


@dataclass
class LipschitzDiagnostics:
    rho: float
    forward_ratio_max: float
    inverse_ratio_max: float
    forward_bound: float
    inverse_bound: float
    pairs_used: int
    pairs_skipped: int

    @property
    def within_bounds(self) -> bool:
        return (self.forward_ratio_max <= self.forward_bound + 1e-6
                and self.inverse_ratio_max <= self.inverse_bound + 1e-6)


def random_profile_pair(supports: Sequence[np.ndarray], bounds, rng: np.random.Generator,
                        concentration: float = 1.0):
    """Two random profiles on the same supports (Dirichlet weights)."""
    def one():
        return DistributionProfile(tuple(
            AtomicDistribution(s, _normalize(rng.dirichlet(np.full(s.size, concentration)) + 1e-12),
                               tuple(b))
            for s, b in zip(supports, bounds)))
    return one(), one()


def lipschitz_diagnostics(model: SelectionModel, x: Mapping[str, float], theta: ThetaVector,
                          sampler: Callable[[np.random.Generator], tuple], n_pairs: int,
                          bounds, seed: int = 0, resolution: int = 64,
                          config: FixedPointConfig = FixedPointConfig(tol=1e-13, max_iter=2000),
                          ) -> LipschitzDiagnostics:
    """Empirical Lipschitz ratios of the forward map and its inverse.

    ``sampler(rng)`` returns a pair of profiles on shared supports inside
    ``bounds``. Pairs at distance zero are skipped.
    """
    mod = compute_rho_general(model, x, theta, bounds, resolution)
    if mod.rho >= 1:
        raise SelectionError("forward-map Lipschitz bounds need rho < 1")
    rng = np.random.Generator(np.random.Philox(seed))
    fwd = inv = 0.0
    used = skipped = 0
    for _ in range(n_pairs):
        a, b = sampler(rng)
        d = profile_distance(a, b)
        if d == 0.0:
            skipped += 1
            continue
        used += 1
        fwd = max(fwd, profile_distance(forward_map(a, model, x, theta),
                                        forward_map(b, model, x, theta)) / d)
        ia, _ = solve_fixed_point(a, model, x, theta, config)
        ib, _ = solve_fixed_point(b, model, x, theta, config)
        inv = max(inv, profile_distance(ia, ib) / d)
    return LipschitzDiagnostics(mod.rho, fwd, inv, 1.0 + mod.rho, 1.0 / (1.0 - mod.rho),
                                used, skipped)


# -- quantal response equilibria ---------------------------------------------

class FiniteGame:
    """Normal-form game whose payoff assigns each player a probability.

    ``payoff(profile)`` maps a pure-strategy profile (one strategy value per
    player) to a vector of per-player payoffs in (0, 1) summing to at most 1.
    """

    def __init__(self, strategy_sets: Sequence[Sequence[float]], payoff, lam: float):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.strategy_sets = [np.asarray(s, dtype=float) for s in strategy_sets]
        self.n_players = len(self.strategy_sets)
        self.lam = float(lam)
        shape = tuple(s.size for s in self.strategy_sets)
        if callable(payoff):
            table = np.empty(shape + (self.n_players,))
            for idx in np.ndindex(*shape):
                prof = tuple(self.strategy_sets[k][i] for k, i in enumerate(idx))
                table[idx] = payoff(prof)
        else:
            table = np.asarray(payoff, dtype=float)
        if table.shape != shape + (self.n_players,):
            raise ValueError("payoff table has the wrong shape")
        if np.any(table <= 0) or np.any(table >= 1) or np.any(table.sum(-1) > 1 + 1e-12):
            raise ValueError("payoffs must lie in (0,1) and sum to at most 1")
        self.table = table

    def expected_payoffs(self, mixed: Sequence[np.ndarray]) -> list[np.ndarray]:
        out = []
        for j in range(self.n_players):
            t = self.table[..., j]
            for k in reversed(range(self.n_players)):
                if k != j:
                    t = np.tensordot(t, mixed[k], axes=([k], [0]))
            out.append(t)
        return out


def qre_step(game: FiniteGame, mixed: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Logit response to expected payoffs, with weights ``exp(-lambda * Pr_j)``."""
    out = []
    for pr in game.expected_payoffs([np.asarray(m, dtype=float) for m in mixed]):
        z = -game.lam * pr
        e = np.exp(z - z.max())
        out.append(e / e.sum())
    return out


def solve_qre(game: FiniteGame, tol: float = 1e-12, max_iter: int = 10_000,
              init: Optional[Sequence[np.ndarray]] = None):
    if init is None:
        g = [np.full(s.size, 1.0 / s.size) for s in game.strategy_sets]
    else:
        g = [np.asarray(m, dtype=float) for m in init]
    steps: list[float] = []
    converged = False
    while len(steps) < max_iter:
        new = qre_step(game, g)
        step = max(float(np.max(np.abs(a - b))) for a, b in zip(new, g))
        steps.append(step)
        g = new
        if step <= tol:
            converged = True
            break
    return g, FixedPointReport(len(steps), steps[-1], converged, steps)
