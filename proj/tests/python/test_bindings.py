import pytest

stochsafe = pytest.importorskip("stochsafe")
pytest.importorskip("stochsafe._core")


def test_load_and_bound(problems_dir):
    p = stochsafe.load_problem(str(problems_dir / "cubic.json"))
    assert p.num_states == 2
    rec = stochsafe.bound(p, 2)
    assert rec["solver_status"] == "Optimal"
    assert 0.0 < rec["bound"] < 1.0
    assert rec["residuals"]["verified"]


def test_initial_point_inside_unsafe_gives_one(problems_dir):
    p = stochsafe.load_problem(str(problems_dir / "cubic.json"), x0=[0.6, 0.0])
    assert stochsafe.bound(p, 2)["bound"] == pytest.approx(1.0, abs=1e-3)


def test_simulation_is_reproducible(problems_dir):
    p = stochsafe.load_problem(str(problems_dir / "discrete.json"))
    a = stochsafe.simulate(p, n=200, seed=3)
    b = stochsafe.simulate(p, n=200, seed=3)
    assert a == b
    assert a["N"] == 200 and a["ci_lo"] <= a["p_hat"] <= a["ci_hi"]


def test_export_and_errors(problems_dir):
    p = stochsafe.load_problem(str(problems_dir / "cubic.json"))
    text, manifest = stochsafe.export_sdpa(p, 1)
    assert text and '"num_free"' in manifest
    lo, hi = stochsafe.clopper_pearson(0, 100)
    assert lo == 0.0 and 0.0 < hi < 0.06
    with pytest.raises(stochsafe.ConfigError):
        stochsafe.load_problem(str(problems_dir / "missing.json"))
