import json
import subprocess

import pytest

sdpa = pytest.importorskip("sdpa")


def run(cli, *args):
    return subprocess.run([cli, *map(str, args)], capture_output=True, text=True)


def test_bound_writes_records(cli, problems_dir, tmp_path):
    r = run(cli, "bound", problems_dir / "cubic.json", "--orders", "1..2", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    records = json.loads((tmp_path / "bounds.json").read_text())
    assert [rec["order"] for rec in records] == [1, 2]
    assert records[0]["bound"] == pytest.approx(1.0, abs=1e-6)
    assert records[1]["bound"] <= records[0]["bound"]
    assert records[1]["residuals"]["verified"]


def test_missing_config_exits_one(cli, tmp_path):
    r = run(cli, "bound", tmp_path / "nope.json", "--out", tmp_path)
    assert r.returncode == 1
    assert not (tmp_path / "bounds.json").exists()


def test_contour_grid_header(cli, problems_dir, tmp_path):
    r = run(cli, "contour", problems_dir / "cubic.json", "--orders", "1..2", "--grid", "5", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    rows = (tmp_path / "contour.csv").read_text().splitlines()
    assert rows[0] == "x1,x2,q,order"
    assert len(rows) == 1 + 25
    assert all(0.0 <= float(row.split(",")[2]) <= 1.0 for row in rows[1:])


@pytest.mark.parametrize("order", [1, 2])
def test_exported_program_matches_external_solver(cli, problems_dir, tmp_path, order):
    r = run(cli, "bound", problems_dir / "cubic.json", "--orders", order, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    gamma = json.loads((tmp_path / "bounds.json").read_text())[0]["bound"]

    r = run(cli, "export", problems_dir / "cubic.json", "--orders", order, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    text = (tmp_path / f"cubic_unsafe_bound_k{order}.dat-s").read_text()
    man = sdpa.manifest((tmp_path / f"cubic_unsafe_bound_k{order}.manifest.json").read_text())
    assert "gamma" in man["free_names"]

    status, value = sdpa.solve_sdpa_dual(text)
    assert status in ("optimal", "optimal_inaccurate")
    assert -value == pytest.approx(gamma, abs=1e-3)
