"""Atomic outcome distributions and the metrics the contraction is stated in.

Distributions are kept as weighted atoms on the observed support. Smoothing
would distort the density ratios that drive both the operator and the
metric, so CDF grids are produced only for reporting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

WEIGHT_FLOOR = 1e-300
SUM_TOL = 1e-12
DEDUP_RTOL = 1e-12


class DistributionError(ValueError):
    """Raised when a distribution violates its construction invariants."""


def _merge_close(atoms: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # adjacent atoms within DEDUP_RTOL (relative) collapse into one
    if atoms.size < 2:
        return atoms, weights
    scale = np.maximum(np.maximum(np.abs(atoms[1:]), np.abs(atoms[:-1])), 1.0)
    close = (atoms[1:] - atoms[:-1]) <= DEDUP_RTOL * scale
    if not close.any():
        return atoms, weights
    starts = np.concatenate(([True], ~close))
    group = np.cumsum(starts) - 1
    merged_w = np.bincount(group, weights=weights)
    return atoms[starts], merged_w


@dataclass(frozen=True, eq=False)
class AtomicDistribution:
    """A discrete probability measure on ``[bounds[0], bounds[1]]``.

    Atoms must be ascending; atoms closer than a relative 1e-12 are merged.
    Every weight must be strictly positive and the weights must sum to one.
    """

    atoms: np.ndarray
    weights: np.ndarray
    bounds: tuple[float, float]

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.size == 0 or atoms.shape != weights.shape:
            raise DistributionError("atoms and weights must be nonempty and equally long")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(weights)):
            raise DistributionError("non-finite atom or weight")
        if np.any(np.diff(atoms) < 0):
            raise DistributionError("atoms must be ascending")
        atoms, weights = _merge_close(atoms, weights)
        if np.any(weights < WEIGHT_FLOOR):
            raise DistributionError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > SUM_TOL:
            raise DistributionError(f"weights sum to {weights.sum()!r}, not 1")
        lo, hi = float(self.bounds[0]), float(self.bounds[1])
        if not lo <= atoms[0] or not atoms[-1] <= hi:
            raise DistributionError("support violation: atoms outside bounds")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bounds", (lo, hi))

    @classmethod
    def from_unnormalized(cls, atoms, mass, bounds) -> "AtomicDistribution":
        mass = np.asarray(mass, dtype=float)
        return cls(atoms, mass / mass.sum(), bounds)

    @classmethod
    def degenerate(cls, point: float, bounds=None) -> "AtomicDistribution":
        return cls([point], [1.0], bounds if bounds is not None else (point, point))

    @property
    def size(self) -> int:
        return int(self.atoms.size)

    def same_support(self, other: "AtomicDistribution") -> bool:
        return self.atoms.shape == other.atoms.shape and bool(np.all(self.atoms == other.atoms))

    def with_weights(self, weights) -> "AtomicDistribution":
        """Same atoms and bounds, new (already normalized) weights."""
        return AtomicDistribution(self.atoms, weights, self.bounds)

    def cdf(self, x) -> np.ndarray:
        """Right-continuous CDF evaluated at ``x``."""
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def mean(self) -> float:
        return float(self.atoms @ self.weights)

    def map_atoms(self, func) -> "AtomicDistribution":
        """Push the measure through an increasing function (e.g. ``np.log``)."""
        lo, hi = self.bounds
        return AtomicDistribution(func(self.atoms), self.weights, (float(func(lo)), float(func(hi))))

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist(),
                "bounds": [self.bounds[0], self.bounds[1]]}

    @classmethod
    def from_dict(cls, d: dict) -> "AtomicDistribution":
        return cls(d["atoms"], d["weights"], tuple(d["bounds"]))

    def __eq__(self, other):
        if not isinstance(other, AtomicDistribution):
            return NotImplemented
        return (self.bounds == other.bounds and self.same_support(other)
                and bool(np.all(self.weights == other.weights)))

    def __repr__(self):
        return f"AtomicDistribution(n_atoms={self.size}, bounds={self.bounds})"


@dataclass(frozen=True, eq=False)
class DistributionProfile:
    """One distribution per alternative; the object the operator acts on."""

    components: tuple[AtomicDistribution, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 2:
            raise DistributionError("a profile needs at least two alternatives")
        if not all(isinstance(c, AtomicDistribution) for c in comps):
            raise DistributionError("profile components must be AtomicDistribution")
        object.__setattr__(self, "components", comps)

    @property
    def J(self) -> int:
        return len(self.components)

    def __getitem__(self, j: int) -> AtomicDistribution:
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    def __eq__(self, other):
        if not isinstance(other, DistributionProfile):
            return NotImplemented
        return self.J == other.J and all(a == b for a, b in zip(self, other))

    def bounds(self) -> list[tuple[float, float]]:
        return [c.bounds for c in self.components]

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionProfile":
        return cls(tuple(AtomicDistribution.from_dict(c) for c in d["components"]))


@dataclass(frozen=True)
class CdfCurve:
    grid: np.ndarray
    values: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["grid", "value"])
            for g, v in zip(self.grid, self.values):
                w.writerow([repr(float(g)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "CdfCurve":
        rows = list(csv.DictReader(Path(path).open()))
        return cls(np.array([float(r["grid"]) for r in rows]), np.array([float(r["value"]) for r in rows]))


def empirical_from_sample(values: Sequence[float], bounds) -> AtomicDistribution:
    """Empirical measure of ``values``: one atom per distinct value, weight = multiplicity / n."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise DistributionError("empty sample")
    lo, hi = float(bounds[0]), float(bounds[1])
    if x.min() < lo or x.max() > hi:
        raise DistributionError("support violation")
    atoms, counts = np.unique(x, return_counts=True)
    return AtomicDistribution(atoms, counts / x.size, (lo, hi))


def log_ratio_spread(w_a: np.ndarray, w_b: np.ndarray) -> float:
    """``ln max(a/b) + ln max(b/a)`` for weight vectors on a common support."""
    r = np.log(w_a) - np.log(w_b)
    return float(r.max() - r.min())


def thompson_distance(a: AtomicDistribution, b: AtomicDistribution) -> float:
    """Symmetrised log-sup Radon-Nikodym distance; ``inf`` unless mutually absolutely continuous."""
    if not a.same_support(b):
        return math.inf
    return max(log_ratio_spread(a.weights, b.weights), 0.0)


def profile_distance(a: DistributionProfile, b: DistributionProfile) -> float:
    if a.J != b.J:
        raise DistributionError("profile arity mismatch")
    return max(thompson_distance(x, y) for x, y in zip(a, b))


def total_variation(a: AtomicDistribution, b: AtomicDistribution) -> float:
    """Sum of absolute weight differences over the union of atoms (range [0, 2])."""
    atoms = np.union1d(a.atoms, b.atoms)
    wa = np.zeros(atoms.size)
    wb = np.zeros(atoms.size)
    wa[np.searchsorted(atoms, a.atoms)] = a.weights
    wb[np.searchsorted(atoms, b.atoms)] = b.weights
    return float(np.abs(wa - wb).sum())


def to_grid_cdf(a: AtomicDistribution, n_grid: int) -> CdfCurve:
    if n_grid < 2:
        raise DistributionError("n_grid must be at least 2")
    grid = np.linspace(a.bounds[0], a.bounds[1], n_grid)
    values = a.cdf(grid)
    values[-1] = 1.0
    return CdfCurve(grid, values)


def mixture(components: Sequence[AtomicDistribution], probs: Sequence[float]) -> AtomicDistribution:
    """Finite mixture of atomic distributions (atoms pooled, weights scaled)."""
    probs = np.asarray(probs, dtype=float)
    keep = [(c, p) for c, p in zip(components, probs) if p > 0]
    atoms = np.concatenate([c.atoms for c, _ in keep])
    weights = np.concatenate([c.weights * p for c, p in keep])
    order = np.argsort(atoms, kind="stable")
    lo = min(c.bounds[0] for c, _ in keep)
    hi = max(c.bounds[1] for c, _ in keep)
    return AtomicDistribution.from_unnormalized(atoms[order], weights[order], (lo, hi))
