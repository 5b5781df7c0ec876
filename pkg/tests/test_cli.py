import json
import subprocess
import sys

import numpy as np
import pytest

from pooledloss.cli import main
from pooledloss.io import read_csv


def base_config(**run):
    cfg = {
        "portfolio": {
            "names": 200,
            "types": [{"alpha": 4.0, "lambda_bar": 0.2, "sigma": 0.9, "lambda0": 0.2,
                       "beta_c": 1.0, "beta_s": 1.0, "weight": 1.0}],
        },
        "systematic": {"kind": "ou", "mean": 1.0, "speed": 2.0, "vol": 1.0, "x0": 1.0},
        "grid": {"horizon": 0.2, "dt": 0.01},
        "run": {"K": 3, "paths": 40, "finite_paths": 100, "seed": 3},
    }
    cfg["run"].update(run)
    return cfg


@pytest.fixture
def config(tmp_path):
    def make(name="cfg.json", mutate=None, **run):
        cfg = base_config(**run)
        if mutate:
            mutate(cfg)
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return str(path)

    return make


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", cfg, "--out", str(out), *extra])


def test_simulate_row_count_and_determinism(config, tmp_path):
    cfg = config()
    assert run("simulate", cfg, tmp_path / "a", "--paths", "10000", "--trajectories", "2") == 0
    header, body = read_csv(tmp_path / "a" / "losses.csv")
    assert header == ["path_id", "loss_at_t"] and body.shape == (10000, 2)
    header, traj = read_csv(tmp_path / "a" / "trajectories.csv")
    assert header == ["path_id", "t", "loss", "x"] and traj.shape == (2 * 21, 4)
    # trajectories are the same paths as the loss table
    np.testing.assert_array_equal(traj[traj[:, 1] == 0.2][:, 2], body[:2, 1])
    assert run("simulate", cfg, tmp_path / "b", "--paths", "10000", "--trajectories", "2", "--threads", "3") == 0
    for f in ("losses.csv", "trajectories.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest_simulate.json").read_text())
    assert man["seed"] == 3 and "losses.csv" in man["outputs"]


def test_simulate_rejects_zero_paths(config, tmp_path):
    assert run("simulate", config(), tmp_path, "--paths", "0") == 2


@pytest.mark.parametrize("scheme", ["first_order", "scheme1", "scheme2"])
def test_approx_outputs(config, tmp_path, scheme):
    out = tmp_path / scheme
    assert run("approx", config(), out, "--scheme", scheme, "-J", "5") == 0
    header, lat = read_csv(out / "lattice.csv")
    assert header == ["loss", "cdf", "pdf"] and lat.shape == (1001, 3)
    assert np.all(np.diff(lat[:, 1]) >= 0)
    header, var = read_csv(out / "var.csv")
    assert header == ["level", "var_first_order", "var_second_order", "var_finite_system"]
    np.testing.assert_array_equal(var[:, 0], [0.95, 0.99])
    assert (out / "lln.csv").exists() and (out / "manifest_approx.json").exists()


def test_approx_scheme2_components(config, tmp_path):
    assert run("approx", config(), tmp_path, "--scheme", "scheme2", "-M", "64") == 0
    _, comp = read_csv(tmp_path / "components.csv")
    assert comp.shape == (64, 4)


def test_approx_deterministic_across_threads(config, tmp_path):
    cfg = config()
    for name, threads in (("a", "1"), ("b", "4")):
        assert run("approx", cfg, tmp_path / name, "--scheme", "scheme2", "-M", "300", "--threads", threads) == 0
    for f in ("lattice.csv", "var.csv", "components.csv", "lln.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_gaussian_requires_zero_beta_s(config, tmp_path):
    assert run("approx", config(), tmp_path, "--scheme", "gaussian") == 2


def test_gaussian_case_runs(config, tmp_path):
    def no_exposure(cfg):
        cfg["portfolio"]["types"][0]["beta_s"] = 0.0

    assert run("approx", config(mutate=no_exposure), tmp_path, "--scheme", "gaussian") == 0
    assert (tmp_path / "covariance.csv").exists()


def test_heterogeneous_config(config, tmp_path):
    def two_types(cfg):
        t = dict(cfg["portfolio"]["types"][0], weight=0.5)
        cfg["portfolio"]["types"] = [dict(t, lambda0=0.1), dict(t, lambda0=0.4)]

    cfg = config(mutate=two_types)
    assert run("approx", cfg, tmp_path, "--scheme", "scheme1", "-M", "4", "-J", "20") == 0
    header, body = read_csv(tmp_path / "lln_types.csv")
    assert header[:3] == ["t", "type_id", "u0"]
    np.testing.assert_array_equal(np.unique(body[:, 1]), [0, 1])
    assert run("approx", cfg, tmp_path, "--scheme", "scheme2") == 2


def test_var_table(config, tmp_path):
    assert run("var", config(), tmp_path, "-M", "64") == 0
    _, var = read_csv(tmp_path / "var.csv")
    assert np.all(np.isfinite(var))


def test_skeleton(config, tmp_path):
    assert run("skeleton", config(), tmp_path, "-M", "2", "-J", "3", "--points", "4") == 0
    header, body = read_csv(tmp_path / "skeleton.csv")
    assert header == ["path_id", "sample_id", "t", "loss", "v0"]
    assert body.shape == (2 * 3 * 4, 5)


def test_compare_has_ratio_column(config, tmp_path):
    assert run("compare", config(), tmp_path, "--budget", "0.3") == 0
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert lines[0] == "scheme,estimate,std_error,wall_time,samples,std_error_ratio"
    rows = [ln.split(",") for ln in lines[1:]]
    assert [r[0] for r in rows] == ["finite_system", "scheme2"]
    ratio = float(rows[0][2]) / float(rows[1][2])
    assert float(rows[0][5]) == pytest.approx(ratio)


def test_compare_zero_budget(config, tmp_path):
    assert run("compare", config(), tmp_path, "--budget", "0") == 2


def test_allocate(config, tmp_path):
    assert run("allocate", config(), tmp_path, "--budget", "2", "--strike", "0.03") == 0
    header, body = read_csv(tmp_path / "allocation.csv")
    assert header[-2:] == ["M", "J"] and body[0, -2] >= 1 and body[0, -1] >= 1


def test_auto_budget(config, tmp_path):
    assert run("approx", config(strike=0.03), tmp_path, "--scheme", "scheme1", "--auto-budget", "1") == 0
    man = json.loads((tmp_path / "manifest_approx.json").read_text())
    assert {"M", "J"} <= set(man["diagnostics"]["allocation"])


def test_out_of_reach_strike_is_degenerate(config, tmp_path):
    assert run("allocate", config(), tmp_path, "--budget", "1", "--strike", "0.9") == 2


def test_numerical_failure_exit_code(config, tmp_path):
    def explosive(cfg):
        cfg["portfolio"]["types"][0].update(beta_s=40.0, sigma=3.0)
        cfg["grid"] = {"horizon": 1.0, "dt": 0.1}

    assert run("approx", config(mutate=explosive), tmp_path, "--scheme", "scheme2", "-K", "6") == 3


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c["portfolio"]["types"][0].update(beta_c=-0.5),
        lambda c: c["portfolio"]["types"][0].update(weight=0.5),
        lambda c: c["grid"].update(dt=0.03),
        lambda c: c["run"].update(seed=-1),
    ],
)
def test_bad_configs_exit_2(config, tmp_path, mutate):
    assert run("approx", config(mutate=mutate), tmp_path, "--scheme", "first_order") == 2


def test_missing_config(tmp_path):
    assert run("approx", str(tmp_path / "nope.json"), tmp_path) == 2


def test_module_entry_point(config, tmp_path):
    cfg = config()
    ok = subprocess.run([sys.executable, "-m", "pooledloss", "simulate", "--config", cfg, "--out", str(tmp_path), "-M", "5"],
                        capture_output=True, text=True)
    assert ok.returncode == 0, ok.stderr
    bad = subprocess.run([sys.executable, "-m", "pooledloss", "simulate", "--config", cfg, "--out", str(tmp_path), "-M", "0"],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "invalid input" in bad.stderr
