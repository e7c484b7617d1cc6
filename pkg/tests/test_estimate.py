import json
import math

import numpy as np
import pytest

from fcselect.dist import profile_distance
from fcselect.estimate import (DataError, Dataset, EstimationResult, Likelihood, OptimizerSettings,
                               bootstrap_se, estimate_selected_distributions, fit_mle,
                               log_likelihood, model_choice_prob)
from fcselect.fixpoint import forward_map
from fcselect.heckman import HeckmanError, heckman_two_step
from fcselect.mc import DgpSpec, simulate_dataset
from fcselect.selection import SelectionModel, ThetaVector

PROBIT = SelectionModel("binary_probit_logprice")
TRUTH = ThetaVector(1.0, (0.0, 1.0), 0.5)


@pytest.fixture(scope="module")
def dgp1_small():
    return simulate_dataset(DgpSpec(1), 600, 11).data


@pytest.fixture(scope="module")
def dgp1_fit(dgp1_small):
    return fit_mle(dgp1_small, PROBIT)


# -- data --------------------------------------------------------------------------

def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset([1, 3], [1.0, 2.0], [0, 1])
    with pytest.raises(DataError):
        Dataset([1, 2], [1.0, -2.0], [0, 1])
    with pytest.raises(DataError):
        Dataset([1, 2], [1.0], [0, 1])


def test_dataset_csv_roundtrip(tmp_path, dgp1_small):
    dgp1_small.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.price, dgp1_small.price)
    np.testing.assert_array_equal(back.choice, dgp1_small.choice)
    np.testing.assert_array_equal(back.x1, dgp1_small.x1)


def test_dataset_header_checked(tmp_path):
    (tmp_path / "bad.csv").write_text("id,choice,price\n1,1,2.0\n")
    with pytest.raises(DataError):
        Dataset.from_csv(tmp_path / "bad.csv")


# -- selected distributions -----------------------------------------------------------

def test_selected_distributions_by_counting():
    sel = estimate_selected_distributions(Dataset([1, 1, 2], [1.0, 1.0, 2.0], [0, 0, 0]))
    assert list(sel) == ["x2=0"]
    prof = sel["x2=0"]
    np.testing.assert_array_equal(prof[0].atoms, [1.0])
    np.testing.assert_array_equal(prof[0].weights, [1.0])
    np.testing.assert_array_equal(prof[1].atoms, [2.0])


def test_selected_distributions_per_cell(dgp1_small):
    sel = estimate_selected_distributions(dgp1_small)
    assert sorted(sel) == ["x1=0,x2=0", "x1=0,x2=1", "x1=1,x2=0", "x1=1,x2=1"]
    for prof in sel.values():
        for comp in prof:
            assert comp.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_cell_without_one_alternative_is_a_data_error():
    with pytest.raises(DataError):
        estimate_selected_distributions(Dataset([1, 1, 2], [1.0, 1.5, 2.0], [0, 0, 1]))


# -- model choice probabilities and likelihood ------------------------------------------

def test_constant_selection_probability_and_loglik():
    model = SelectionModel("constant", constants=(0.5, 0.5), uses_x1=False)
    data = Dataset([1, 2, 1, 2], [1.0, 2.0, 1.5, 2.5], [0, 0, 0, 0])
    sel = estimate_selected_distributions(data)
    theta = ThetaVector(0.0, (0.0, 0.0))
    assert model_choice_prob(0, "x2=0", theta, sel, model)[0] == pytest.approx(0.5)
    assert log_likelihood(theta, data, sel, model) == pytest.approx(math.log(0.5), abs=1e-12)


def test_binary_probabilities_complement(dgp1_small):
    sel = estimate_selected_distributions(dgp1_small)
    for cell in sel:
        p1, c1 = model_choice_prob(0, cell, TRUTH, sel, PROBIT)
        p2, c2 = model_choice_prob(1, cell, TRUTH, sel, PROBIT)
        assert c1 and c2
        assert p1 + p2 == pytest.approx(1.0, abs=1e-10)


def test_model_probability_matches_choice_shares_at_truth():
    data = simulate_dataset(DgpSpec(1), 6000, 5).data
    sel = estimate_selected_distributions(data)
    for cell, rows in data.cells().items():
        share = float(np.mean(data.choice[rows] == 1))
        p, conv = model_choice_prob(0, cell, TRUTH, sel, PROBIT)
        assert conv
        assert abs(p - share) <= 3 * math.sqrt(share * (1 - share) / rows.size)


def test_loglik_nonpositive_and_lower_far_from_truth():
    data = simulate_dataset(DgpSpec(1), 5000, 2).data
    lik = Likelihood(data, PROBIT)
    at_truth = lik(TRUTH)
    far = lik(ThetaVector(-5.0, (0.0, 1.0), 0.5))
    assert at_truth <= 0 and far <= 0
    assert far < at_truth


def test_loglik_invariant_to_observation_order(dgp1_small):
    perm = np.random.default_rng(0).permutation(len(dgp1_small))
    shuffled = dgp1_small.subset(perm)
    a = Likelihood(dgp1_small, PROBIT)(TRUTH)
    b = Likelihood(shuffled, PROBIT)(TRUTH)
    assert a == pytest.approx(b, abs=1e-13)


def test_model_without_x1_column_rejected():
    data = Dataset([1, 2], [1.0, 2.0], [0, 0])
    with pytest.raises(DataError):
        Likelihood(data, PROBIT)


# -- fit_mle --------------------------------------------------------------------------

def test_fit_close_to_truth(dgp1_fit):
    t = dgp1_fit.theta_hat
    assert abs(t.gamma - 1.0) < 0.8 and abs(t.xi[1] - 1.0) < 0.35 and abs(t.beta - 0.5) < 0.4


def test_fit_offered_profiles_reproduce_selected(dgp1_fit):
    for cell, off in dgp1_fit.offered.items():
        x = {k: float(v) for k, v in (p.split("=") for p in cell.split(","))}
        again = forward_map(off, PROBIT, x, dgp1_fit.theta_hat)
        assert profile_distance(again, dgp1_fit.selected[cell]) <= 1e-8
        assert dgp1_fit.reports[cell].converged


def test_fit_trace_best_is_monotone(dgp1_fit):
    best = [t["best"] for t in dgp1_fit.optimizer_trace]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
    assert best[-1] == dgp1_fit.loglik


def test_fit_is_deterministic(dgp1_small, dgp1_fit):
    again = fit_mle(dgp1_small, PROBIT)
    assert again.theta_hat == dgp1_fit.theta_hat
    for cell in again.offered:
        assert again.offered[cell] == dgp1_fit.offered[cell]


def test_result_json_roundtrip(dgp1_fit):
    back = EstimationResult.from_dict(json.loads(json.dumps(dgp1_fit.to_dict())))
    assert back.theta_hat == dgp1_fit.theta_hat
    assert back.loglik == dgp1_fit.loglik
    for cell in back.offered:
        assert back.offered[cell] == dgp1_fit.offered[cell]
        assert back.reports[cell] == dgp1_fit.reports[cell]


def test_price_irrelevant_choices_give_zero_gamma():
    data = simulate_dataset(DgpSpec(1, gamma=0.0), 2000, 3).data
    res = fit_mle(data, PROBIT)
    # Monte Carlo SD of gamma-hat is about 0.14 at this size
    assert abs(res.theta_hat.gamma) <= 3 * 0.14


# -- bootstrap ------------------------------------------------------------------------

def test_bootstrap_duplicated_seed_gives_zero_se(dgp1_small):
    fast = OptimizerSettings(n_starts=1, max_evals=150)
    res = bootstrap_se(dgp1_small, PROBIT, B=2, seeds=[4, 4], optimizer=fast)
    assert res.failures == 0
    assert all(v == 0.0 for v in res.se.values())


def test_bootstrap_se_nonnegative_and_parallel_matches_serial(dgp1_small):
    fast = OptimizerSettings(n_starts=1, max_evals=150)
    serial = bootstrap_se(dgp1_small, PROBIT, B=3, seed=9, optimizer=fast)
    parallel = bootstrap_se(dgp1_small, PROBIT, B=3, seed=9, optimizer=fast, threads=2)
    assert set(serial.se) == {"gamma", "xi2", "beta"}
    assert all(v >= 0 for v in serial.se.values())
    assert serial.se == parallel.se


# -- two-step baseline -----------------------------------------------------------------

def test_two_step_refuses_data_without_x1():
    data = simulate_dataset(DgpSpec(1, include_excluded=False), 500, 1).data
    with pytest.raises(HeckmanError, match="Mills ratio collinear"):
        heckman_two_step(data)


def test_two_step_correct_specification_near_truth():
    res = heckman_two_step(simulate_dataset(DgpSpec(1), 5000, 8).data)
    t = res.theta_hat
    assert abs(t.gamma - 1.0) < 0.3 and abs(t.xi[1] - 1.0) < 0.15 and abs(t.beta - 0.5) < 0.15
    assert res.sigma[0] == pytest.approx(0.1, rel=0.3)
    assert res.sigma[1] == pytest.approx(0.2, rel=0.3)


def test_two_step_zero_mills_coefficient_without_selection():
    rng = np.random.default_rng(17)
    n = 100_000
    x1 = (rng.random(n) < 0.5).astype(float)
    x2 = (rng.random(n) < 0.7).astype(float)
    choice = np.where(rng.standard_normal(n) + 0.4 * x1 - 0.3 * x2 > 0, 1, 2)
    q = np.where(choice == 1, 0.2 + 0.5 * x2 + 0.1 * rng.standard_normal(n),
                 0.1 + 1.0 * x2 + 0.2 * rng.standard_normal(n))
    res = heckman_two_step(Dataset(choice, np.exp(q), x2, x1))
    assert all(abs(m) < 0.03 for m in res.mills_coef)


def test_two_step_result_serializes():
    res = heckman_two_step(simulate_dataset(DgpSpec(1), 800, 2).data)
    d = json.loads(json.dumps(res.to_dict()))
    assert d["schema"] == 1 and d["estimator"] == "heckman"
    assert np.all(np.diff(res.cdf(0, 0.0, np.linspace(-1, 2, 20))) >= 0)


def test_bootstrap_se_matches_monte_carlo_spread():
    # 200 resamples of one n=1000 dataset; the Monte Carlo SD of gamma-hat is 0.1958
    data = simulate_dataset(DgpSpec(1), 1000, 31).data
    res = bootstrap_se(data, PROBIT, B=200, seed=500)
    assert res.failures == 0
    assert res.se["gamma"] == pytest.approx(0.1958, rel=0.30)
