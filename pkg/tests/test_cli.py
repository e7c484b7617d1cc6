import csv
import json

import pytest

from fcselect.cli import main
from fcselect.dist import AtomicDistribution, DistributionProfile
from fcselect.estimate import EstimationResult
from fcselect.selection import SelectionModel, ThetaVector


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "d.csv"
    assert run("simulate", "--dgp", 1, "--n", 500, "--seed", 7, "--out", path) == 0
    return path


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--dgp", "1", "--n", "5", "--seed", "1", "--out", "x.csv", "--bogus"])
    assert exc.value.code == 2


def test_simulate_rows_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run("simulate", "--dgp", 1, "--n", 1000, "--seed", 7, "--out", p) == 0
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 1000
    assert list(rows[0]) == ["id", "choice", "x1", "x2", "price"]
    assert a.read_bytes() == b.read_bytes()


def test_simulate_invalid_dgp(tmp_path, capsys):
    assert run("simulate", "--dgp", 9, "--n", 10, "--seed", 1, "--out", tmp_path / "x.csv") == 2
    assert "unknown DGP" in capsys.readouterr().err


def test_estimate_writes_result_and_cdfs(tmp_path, dataset):
    out = tmp_path / "r.json"
    cdf_dir = tmp_path / "cdf"
    assert run("estimate", "--data", dataset, "--out", out, "--emit-cdf", cdf_dir) == 0
    d = json.loads(out.read_text())
    assert d["schema"] == 1
    res = EstimationResult.from_dict(d)
    assert json.loads(json.dumps(res.to_dict())) == d
    assert len(d["cells"]) == 4
    files = sorted(p.name for p in cdf_dir.iterdir())
    assert len(files) == 8 and "cdf_j1_x10_x20.csv" in files
    rows = list(csv.DictReader((cdf_dir / files[0]).open()))
    assert len(rows) == 300 and float(rows[-1]["value"]) == 1.0


def test_estimate_logistic_runs(tmp_path, dataset):
    out = tmp_path / "r.json"
    assert run("estimate", "--data", dataset, "--model", "logistic", "--out", out) == 0
    assert json.loads(out.read_text())["model"]["kind"] == "binary_logistic_logprice"


def test_estimate_model_json(tmp_path, dataset):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps(SelectionModel("binary_probit_logprice").to_dict()))
    assert run("estimate", "--data", dataset, "--model", cfg, "--out", tmp_path / "r.json") == 0


def test_estimate_schema_violation(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,choice,price\n1,1,2.0\n")
    assert run("estimate", "--data", bad) == 2
    assert run("estimate", "--data", tmp_path / "missing.csv") == 2


def test_heckman_without_x1_fails_numerically(tmp_path, capsys):
    path = tmp_path / "nox1.csv"
    assert run("simulate", "--dgp", 1, "--n", 300, "--seed", 2, "--out", path, "--no-excluded") == 0
    assert run("estimate", "--data", path, "--estimator", "heckman") == 3
    assert "Mills ratio collinear" in capsys.readouterr().err


def test_heckman_estimate(tmp_path, dataset):
    out = tmp_path / "h.json"
    assert run("estimate", "--data", dataset, "--estimator", "heckman", "--out", out) == 0
    assert json.loads(out.read_text())["estimator"] == "heckman"


def test_modulus_dgp1(tmp_path):
    out = tmp_path / "m.json"
    assert run("modulus", "--dgp", 1, "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["schema"] == 1 and d["supermodular"]
    assert 0.27 <= d["rho_star"] <= 0.47
    assert d["warnings"] == []


def test_modulus_constant_model_is_zero(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SelectionModel("constant", uses_x1=False).to_dict()))
    out = tmp_path / "m.json"
    assert run("modulus", "--model", cfg, "--bounds", "1:2,1:3", "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["M"] == [0.0, 0.0] and d["rho"] == 0.0 and d["rho_star"] == 0.0


def test_modulus_warning_when_at_least_one(tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps(SelectionModel("binary_probit_logprice", uses_x1=False)
                              .to_dict(ThetaVector(3.0, (0.0, 0.0)))))
    out = tmp_path / "m.json"
    assert run("modulus", "--model", cfg, "--bounds", "1:20,1:20", "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["rho_star"] >= 1
    assert any(w.startswith("modulus ≥ 1") for w in d["warnings"])


def test_modulus_needs_inputs():
    assert run("modulus") == 2
    assert run("modulus", "--dgp", 7) == 2


def _selected_file(tmp_path):
    prof = DistributionProfile((AtomicDistribution([1.0, 1.5, 2.0], [0.5, 0.3, 0.2], (1.0, 2.0)),
                                AtomicDistribution([1.2, 1.8], [0.4, 0.6], (1.2, 1.8))))
    path = tmp_path / "sel.json"
    path.write_text(json.dumps(prof.to_dict()))
    return path


def test_solve_contraction(tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps(SelectionModel("binary_probit_logprice")
                              .to_dict(ThetaVector(1.0, (0.0, 1.0), 0.5))))
    out = tmp_path / "o.json"
    assert run("solve-contraction", "--selected", _selected_file(tmp_path), "--model", cfg,
               "--x1", 1, "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["report"]["converged"] and d["report"]["modulus"]["rho"] < 1
    DistributionProfile.from_dict(d["offered"])


def test_solve_contraction_non_convergence_exit_three(tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps(SelectionModel("binary_probit_logprice")
                              .to_dict(ThetaVector(1.0, (0.0, 1.0), 0.5))))
    assert run("solve-contraction", "--selected", _selected_file(tmp_path), "--model", cfg,
               "--x1", 1, "--max-iter", 1, "--out", tmp_path / "o.json") == 3


def test_solve_contraction_needs_theta(tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps(SelectionModel("binary_probit_logprice").to_dict()))
    assert run("solve-contraction", "--selected", _selected_file(tmp_path), "--model", cfg) == 2


def test_qre_builtin_game(tmp_path):
    out = tmp_path / "q.json"
    assert run("qre", "--grid", 6, "--lam", 0.5, "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["max_spread_across_starts"] <= 1e-8
    assert len(d["reports"]) == 5


def test_qre_game_file_zero_lambda(tmp_path):
    game = tmp_path / "g.json"
    game.write_text(json.dumps({"strategy_sets": [[0, 1, 2], [0, 1]], "lambda": 0.0,
                                "payoff": [[[0.2, 0.3]] * 2] * 3}))
    out = tmp_path / "q.json"
    assert run("qre", "--game", game, "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["mixed"] == [[1 / 3] * 3, [0.5, 0.5]]


def test_qre_bad_game_file(tmp_path):
    game = tmp_path / "g.json"
    game.write_text(json.dumps({"strategy_sets": [[0, 1]]}))
    assert run("qre", "--game", game) == 2


def test_reproduce_smoke_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run("reproduce", "--table", 6, "--reps", 2, "--n", 250, "--dgp", 1, "--seed", 3,
                   "--out", p) == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert "n=1000:ibias2" in header and "n=5000:verdict" in header


def test_reproduce_rejects_unknown_dgp():
    assert run("reproduce", "--table", 1, "--dgp", 8) == 2
