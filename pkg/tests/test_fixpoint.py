import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from fcselect.dist import AtomicDistribution, DistributionProfile, profile_distance
from fcselect.fixpoint import (FiniteGame, FixedPointConfig, FixedPointReport, apply_T,
                               forward_map, lipschitz_diagnostics, qre_step, random_profile_pair,
                               solve_fixed_point, solve_qre)
from fcselect.selection import SelectionError, SelectionModel, ThetaVector, compute_rho_general

PROBIT = SelectionModel("binary_probit_logprice")
CONST = SelectionModel("constant", constants=(0.4, 0.6))
X0 = {"x1": 0.0}

# f_1(1, 1) = 0.8 and f_1(2, 1) = 0.4 with the rival price degenerate at 1
GAMMA = (norm.ppf(0.8) - norm.ppf(0.4)) / math.log(2.0)
HAND_THETA = ThetaVector(GAMMA, (0.0, -norm.ppf(0.8)), 0.0)
RIVAL = AtomicDistribution.degenerate(1.0, (1.0, 1.0))


def hand_profile(w1):
    return DistributionProfile((AtomicDistribution([1.0, 2.0], [w1, 1 - w1], (1.0, 2.0)), RIVAL))


def probit_instance(seed):
    rng = np.random.default_rng(seed)
    supports = [np.sort(np.exp(rng.uniform(0.0, 0.8, int(k)))) for k in rng.integers(2, 7, 2)]
    bounds = [(float(s[0]), float(s[-1])) for s in supports]
    theta = ThetaVector(float(rng.uniform(-1.5, 1.5)), (0.0, float(rng.uniform(-1, 1))),
                        float(rng.uniform(-1, 1)))
    return supports, bounds, theta, rng


# -- forward map ------------------------------------------------------------------

def test_forward_map_hand_example():
    assert PROBIT.prob(0, np.array([1.0, 1.0]), X0, HAND_THETA) == pytest.approx(0.8, abs=1e-12)
    sel = forward_map(hand_profile(0.5), PROBIT, X0, HAND_THETA)
    np.testing.assert_allclose(sel[0].weights, [2 / 3, 1 / 3], atol=1e-12)
    np.testing.assert_array_equal(sel[1].weights, [1.0])


def test_forward_map_without_selection_is_identity():
    g = DistributionProfile((AtomicDistribution([1.0, 2.0, 3.0], [0.2, 0.3, 0.5], (1, 3)),
                             AtomicDistribution([1.5, 2.5], [0.9, 0.1], (1, 3))))
    out = forward_map(g, CONST, X0, ThetaVector(0.0, (0.0, 0.0), 0.0))
    assert profile_distance(out, g) < 1e-12


def test_forward_map_keeps_degenerate_components():
    g = DistributionProfile((AtomicDistribution.degenerate(1.3), AtomicDistribution.degenerate(2.0)))
    out = forward_map(g, PROBIT, X0, HAND_THETA)
    assert out == g


# -- operator T --------------------------------------------------------------------

def test_apply_T_inverts_hand_example():
    out = apply_T(hand_profile(0.5), hand_profile(2 / 3), PROBIT, X0, HAND_THETA)
    np.testing.assert_allclose(out[0].weights, [0.5, 0.5], atol=1e-12)


def test_apply_T_true_offered_is_fixed():
    g = hand_profile(0.3)
    sel = forward_map(g, PROBIT, X0, HAND_THETA)
    assert profile_distance(apply_T(g, sel, PROBIT, X0, HAND_THETA), g) < 1e-12


def test_apply_T_own_price_independent_selection_returns_selected():
    sel = hand_profile(0.7)
    out = apply_T(hand_profile(0.2), sel, CONST, X0, ThetaVector(0.0, (0.0, 0.0), 0.0))
    assert profile_distance(out, sel) < 1e-12


def test_apply_T_preserves_selected_support():
    supports, bounds, theta, rng = probit_instance(4)
    sel, cand = random_profile_pair(supports, bounds, rng)
    other = DistributionProfile(tuple(AtomicDistribution(b, [0.5, 0.5], b) for b in bounds))
    for c in (cand, other):
        out = apply_T(c, sel, PROBIT, X0, theta)
        for o, s in zip(out, sel):
            np.testing.assert_array_equal(o.atoms, s.atoms)


# -- solve_fixed_point --------------------------------------------------------------

def test_solve_recovers_hand_example():
    rec, rep = solve_fixed_point(hand_profile(2 / 3), PROBIT, X0, HAND_THETA)
    assert rep.converged
    assert profile_distance(rec, hand_profile(0.5)) <= 1e-10


def test_constant_selection_converges_in_one_iteration():
    rec, rep = solve_fixed_point(hand_profile(0.3), CONST, X0, ThetaVector(0.0, (0.0, 0.0), 0.0))
    assert rep.converged and rep.iterations == 1
    assert profile_distance(rec, hand_profile(0.3)) < 1e-12


def test_non_convergence_is_reported():
    supports, bounds, theta, rng = probit_instance(5)
    sel, _ = random_profile_pair(supports, bounds, rng)
    _, rep = solve_fixed_point(sel, PROBIT, X0, theta, FixedPointConfig(tol=1e-15, max_iter=2))
    assert not rep.converged and rep.iterations == 2


def test_uniform_initialization():
    rec, rep = solve_fixed_point(hand_profile(2 / 3), PROBIT, X0, HAND_THETA,
                                 FixedPointConfig(init="uniform"))
    assert rep.converged and profile_distance(rec, hand_profile(0.5)) <= 1e-10


def test_report_json_roundtrip():
    _, rep = solve_fixed_point(hand_profile(2 / 3), PROBIT, X0, HAND_THETA)
    assert FixedPointReport.from_dict(json.loads(json.dumps(rep.to_dict()))) == rep


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_contraction_roundtrip_and_geometric_decay(seed):
    supports, bounds, theta, rng = probit_instance(seed)
    rho = compute_rho_general(PROBIT, X0, theta, bounds).rho
    if rho >= 1:
        return
    g, psi = random_profile_pair(supports, bounds, rng)
    sel = forward_map(g, PROBIT, X0, theta)
    # contraction on the selected support
    a, b = random_profile_pair(supports, bounds, rng)
    assert profile_distance(apply_T(a, sel, PROBIT, X0, theta), apply_T(b, sel, PROBIT, X0, theta)) \
        <= rho * profile_distance(a, b) + 1e-9
    rec, rep = solve_fixed_point(sel, PROBIT, X0, theta, FixedPointConfig(tol=1e-13, max_iter=5000))
    assert rep.converged
    assert profile_distance(rec, g) <= 1e-8
    assert profile_distance(apply_T(rec, sel, PROBIT, X0, theta), rec) <= 1e-12
    steps = rep.per_iteration_steps
    for k in range(len(steps) - 1):
        assert steps[k + 1] <= rho * steps[k] + 1e-12


# -- Lipschitz diagnostics ------------------------------------------------------------

def test_lipschitz_constant_selection_ratios_at_most_one():
    supports = [np.array([1.0, 2.0, 3.0]), np.array([1.5, 2.5])]
    bounds = [(1.0, 3.0), (1.5, 2.5)]
    diag = lipschitz_diagnostics(CONST, X0, ThetaVector(0.0, (0.0, 0.0), 0.0),
                                 lambda r: random_profile_pair(supports, bounds, r), 20, bounds)
    assert diag.rho == 0.0
    assert diag.forward_ratio_max <= 1 + 1e-12 and diag.inverse_ratio_max <= 1 + 1e-12


def test_lipschitz_identical_pairs_are_skipped():
    g = hand_profile(0.5)
    diag = lipschitz_diagnostics(PROBIT, X0, HAND_THETA, lambda r: (g, g), 5, [(1.0, 2.0), (1.0, 1.0)])
    assert diag.pairs_skipped == 5 and diag.pairs_used == 0


def test_lipschitz_probit_within_bounds():
    supports, bounds, theta, _ = probit_instance(11)
    theta = ThetaVector(1.0, (0.0, 1.0), 0.5)
    diag = lipschitz_diagnostics(PROBIT, {"x1": 1.0}, theta,
                                 lambda r: random_profile_pair(supports, bounds, r), 100, bounds)
    assert diag.rho < 1
    assert diag.within_bounds


def test_lipschitz_refuses_large_modulus():
    bounds = [(1.0, 1e4), (1.0, 1e4)]
    with pytest.raises(SelectionError):
        lipschitz_diagnostics(PROBIT, X0, ThetaVector(5.0, (0.0, 0.0), 0.0),
                              lambda r: None, 1, bounds)


# -- quantal response equilibria ---------------------------------------------------------

def pennies(lam):
    table = np.empty((2, 2, 2))
    for a in range(2):
        for b in range(2):
            table[a, b] = (0.4, 0.1) if a == b else (0.1, 0.4)
    return FiniteGame([[0.0, 1.0], [0.0, 1.0]], table, lam)


def random_game(seed, lam, sizes=(4, 3)):
    rng = np.random.default_rng(seed)
    table = rng.uniform(0.05, 0.45, tuple(sizes) + (2,))
    return FiniteGame([np.arange(k, dtype=float) for k in sizes], table, lam)


def test_qre_step_zero_lambda_is_uniform():
    g = random_game(1, 0.0)
    out = qre_step(g, [np.array([0.7, 0.1, 0.1, 0.1]), np.array([0.2, 0.3, 0.5])])
    np.testing.assert_array_equal(out[0], np.full(4, 0.25))
    np.testing.assert_array_equal(out[1], np.full(3, 1 / 3))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 50.0))
def test_qre_step_output_is_positive_and_normalized(seed, lam):
    g = random_game(seed, lam)
    rng = np.random.default_rng(seed)
    out = qre_step(g, [rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))])
    for m in out:
        assert np.all(m > 0)
        assert m.sum() == pytest.approx(1.0, abs=1e-14)


def test_solve_qre_zero_lambda_one_iteration():
    mixed, rep = solve_qre(random_game(2, 0.0), init=[np.array([1, 0, 0, 0.0]), np.array([0, 1, 0.0])])
    assert rep.iterations == 2 and rep.converged     # one move to uniform, one to confirm
    np.testing.assert_array_equal(mixed[0], np.full(4, 0.25))


def test_small_lambda_unique_limit_from_five_starts():
    g = random_game(3, 0.01)
    rng = np.random.default_rng(0)
    limits = [solve_qre(g, tol=1e-14, init=[rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))])[0]
              for _ in range(5)]
    for m in limits[1:]:
        for a, b in zip(m, limits[0]):
            assert np.max(np.abs(a - b)) <= 1e-12


def test_symmetric_game_has_symmetric_equilibrium():
    table = np.empty((2, 2, 2))
    base = np.array([[0.3, 0.2], [0.1, 0.25]])
    table[..., 0] = base
    table[..., 1] = base.T
    mixed, rep = solve_qre(FiniteGame([[0.0, 1.0], [0.0, 1.0]], table, 2.0), tol=1e-14)
    assert rep.converged
    np.testing.assert_allclose(mixed[0], mixed[1], atol=1e-12)


def test_pennies_qre_matches_grid_search_and_damped_oracle():
    g = pennies(0.1)
    mixed, rep = solve_qre(g, tol=1e-14)
    assert rep.converged
    # brute force over a 50 x 50 grid of mixed strategies
    grid = np.linspace(0.0, 1.0, 50)
    best, arg = math.inf, None
    for u in grid:
        for v in grid:
            m = [np.array([u, 1 - u]), np.array([v, 1 - v])]
            r = max(np.max(np.abs(a - b)) for a, b in zip(qre_step(g, m), m))
            if r < best:
                best, arg = r, (u, v)
    assert abs(mixed[0][0] - arg[0]) <= 1 / 49 and abs(mixed[1][0] - arg[1]) <= 1 / 49
    # damped iteration written out directly on the payoff table
    p, q = 0.9, 0.2
    for _ in range(2000):
        e1 = g.table[:, :, 0] @ np.array([q, 1 - q])
        e2 = np.array([p, 1 - p]) @ g.table[:, :, 1]
        r1 = np.exp(-0.1 * e1) / np.exp(-0.1 * e1).sum()
        r2 = np.exp(-0.1 * e2) / np.exp(-0.1 * e2).sum()
        p, q = 0.5 * p + 0.5 * r1[0], 0.5 * q + 0.5 * r2[0]
    assert mixed[0][0] == pytest.approx(p, abs=1e-12)
    assert mixed[1][0] == pytest.approx(q, abs=1e-12)
    assert abs(p - 0.5) < 0.02 and abs(q - 0.5) < 0.02


def test_game_rejects_invalid_payoffs():
    with pytest.raises(ValueError):
        FiniteGame([[0.0, 1.0], [0.0, 1.0]], np.full((2, 2, 2), 0.6), 1.0)
    with pytest.raises(ValueError):
        FiniteGame([[0.0, 1.0], [0.0, 1.0]], np.full((2, 2, 2), 0.3), -1.0)
