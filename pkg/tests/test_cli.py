import json

import numpy as np
import pytest

from lowps import io
from lowps.cli import main


@pytest.fixture
def rank_two(tmp_path, rng):
    a = (rng.standard_normal((12, 2)) @ rng.standard_normal((2, 12))) / 12
    path = tmp_path / "a.mtx"
    io.write_matrix(path, a)
    return path


def _grid_args(path, out, *extra):
    return ["grid", "--matrix", str(path), "--grid=-1,1,-1,1,7,6", "--eps", "0.05,0.2",
            "--out-dir", str(out), *extra]


def test_zero_matrix_grid(tmp_path):
    path = tmp_path / "zero.mtx"
    io.write_matrix(path, np.zeros((3, 3)))
    assert main(["grid", "--matrix", str(path), "--l", "1", "--grid=-1,1,-1,1,3,3",
                 "--out-dir", str(tmp_path)]) == 0
    header, rows = io.read_csv(tmp_path / "grid.csv")
    assert header == ["re", "im", "mu"]
    np.testing.assert_allclose(rows[:, 2], np.abs(rows[:, 0] + 1j * rows[:, 1]), atol=1e-14)
    assert (tmp_path / "grid.csv").read_bytes().count(b"\r\n") == 10


def test_exact_matches_oracle_masks(tmp_path, rank_two):
    assert main(_grid_args(rank_two, tmp_path / "lr", "--l", "2")) == 0
    assert main(_grid_args(rank_two, tmp_path / "dense", "--l", "2", "--oracle")) == 0
    a = json.loads((tmp_path / "lr" / "levels.json").read_text())
    b = json.loads((tmp_path / "dense" / "levels.json").read_text())
    assert a == b
    _, lr = io.read_csv(tmp_path / "lr" / "grid.csv")
    _, dense = io.read_csv(tmp_path / "dense" / "grid.csv")
    for eps in (0.05, 0.2):
        assert np.array_equal(lr[:, 2] <= eps, dense[:, 2] <= eps)


def test_randomized_is_byte_identical(tmp_path, rank_two):
    args = ["--mode", "randomized", "--l", "2", "--k", "5", "--seed", "9"]
    assert main(_grid_args(rank_two, tmp_path / "x", *args)) == 0
    assert main(_grid_args(rank_two, tmp_path / "y", *args)) == 0
    assert (tmp_path / "x" / "grid.csv").read_bytes() == (tmp_path / "y" / "grid.csv").read_bytes()
    assert (tmp_path / "x" / "levels.json").read_bytes() == (tmp_path / "y" / "levels.json").read_bytes()


def test_truncated_mode_has_inflation(tmp_path, rng):
    path = tmp_path / "full.mtx"
    io.write_matrix(path, np.diag([3.0, 2.0, 1.0]))
    assert main(["grid", "--matrix", str(path), "--mode", "truncated", "--l", "2",
                 "--grid=0,4,-1,1,5,3", "--out-dir", str(tmp_path)]) == 0
    header, rows = io.read_csv(tmp_path / "grid.csv")
    assert header[-1] == "inflation" and np.all(rows[:, 3] == 1.0)


def test_stability_d2i(tmp_path):
    a = np.zeros((5, 5))
    a[0, 0] = 0.5
    io.write_matrix(tmp_path / "a.mtx", a)
    assert main(["stability", "--matrix", str(tmp_path / "a.mtx"), "--task", "d2i", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["value"] == pytest.approx(0.5, abs=1e-12)
    assert main(["stability", "--matrix", str(tmp_path / "a.mtx"), "--task", "kreiss", "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["value"] == pytest.approx(1.0, abs=1e-2)


def test_stability_factor_files(tmp_path, rng):
    u = rng.standard_normal((20, 2)) / 20
    v = rng.standard_normal((20, 2)) / 20
    io.write_matrix(tmp_path / "u.mtx", u)
    io.write_matrix(tmp_path / "v.mtx", v)
    assert main(["stability", "--u", str(tmp_path / "u.mtx"), "--v", str(tmp_path / "v.mtx"),
                 "--task", "radius", "--eps", "0.1", "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["value"] >= 0.1


def test_simulate_and_koopman(tmp_path):
    assert main(["simulate", "ou", "--n", "60", "--seed", "2", "--out-dir", str(tmp_path)]) == 0
    assert main(["koopman", "--traj", str(tmp_path / "traj.csv"), "--r", "3", "--bandwidth", "0.5",
                 "--grid=-1,1,-1,1,4,4", "--kreiss-eps", "0.05,0.5", "--out-dir", str(tmp_path)]) == 0
    header, rows = io.read_csv(tmp_path / "koop_grid.csv")
    assert header == ["re", "im", "mu_h", "mu_l2"] and rows.shape == (16, 4)
    model = json.loads((tmp_path / "model.json").read_text())
    assert model["r"] == 3 and model["kreiss_h"] >= 1
    assert main(["simulate", "logistic", "--n", "40", "--out-dir", str(tmp_path / "lg")]) == 0


def test_bench_single_point(tmp_path):
    assert main(["bench", "--dims", "30", "--ranks", "2", "--grid-m", "1", "--trials", "1",
                 "--out-dir", str(tmp_path)]) == 0
    header, rows = io.read_csv(tmp_path / "bench.csv")
    assert rows.shape == (1, len(header))


@pytest.mark.parametrize("argv, code", [
    (["koopman", "--traj", "missing.csv"], 6),
    (["grid", "--matrix", "x.mtx", "--grid=-1,1,-1,1,2000,2000", "--l", "1"], 5),
])
def test_exit_codes(tmp_path, monkeypatch, argv, code):
    monkeypatch.chdir(tmp_path)
    io.write_matrix(tmp_path / "x.mtx", np.zeros((3, 3)))
    assert main(argv) == code


def test_malformed_inputs(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,zz\n")
    assert main(["koopman", "--traj", str(tmp_path / "bad.csv"), "--out-dir", str(tmp_path)]) == 2
    (tmp_path / "bad.mtx").write_text("not a matrix\n")
    assert main(["grid", "--matrix", str(tmp_path / "bad.mtx"), "--l", "1", "--out-dir", str(tmp_path)]) == 2
    (tmp_path / "c.json").write_text('{"unknown": 1}')
    assert main(["stability", "--config", str(tmp_path / "c.json"), "--matrix", "m.mtx"]) == 2


def test_precondition_exit(tmp_path):
    io.write_matrix(tmp_path / "u.mtx", np.eye(4)[:, :1] * 2.0)
    io.write_matrix(tmp_path / "v.mtx", np.eye(4)[:, :1])
    assert main(["stability", "--u", str(tmp_path / "u.mtx"), "--v", str(tmp_path / "v.mtx"),
                 "--task", "d2i", "--out-dir", str(tmp_path)]) == 3


def test_config_file_values(tmp_path, rank_two):
    cfg = {"mode": "exact", "l": 2, "eps": [0.1], "grid": {"n_re": 3, "n_im": 2}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["grid", "--config", str(tmp_path / "c.json"), "--matrix", str(rank_two),
                 "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "levels.json").read_text())["points"] == 6
