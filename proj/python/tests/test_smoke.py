import json
import math

import numpy as np
import pytest

import fbflow


def test_expression():
    assert fbflow.eval_expression("x^2 + sin(pi*y)", 3.0, 0.0) == pytest.approx(9.0)
    with pytest.raises(fbflow.ConfigError, match="position 2"):
        fbflow.eval_expression("x*", 0.0, 0.0)


def test_profile_limits():
    assert fbflow.g0(0.0) == pytest.approx(0.69412120140619186, abs=1e-8)
    assert abs(fbflow.g0(8.0)) <= 1e-6


def test_zero_data_gives_zero_solution():
    out = fbflow.solve_shear(17, 17, "0")
    assert out["u"].shape == (17, 17)
    assert np.all(out["u"] == 0.0)


def test_manufactured_shear_solution():
    p = "y^3*(1-y^2)^3"
    # u = p (1 + x): source y u_x - u_yy
    f = "y*{p} - (1+x)*(6*y*(1-y^2)^3 - 42*y^3*(1-y^2)^2 + 24*y^5*(1-y^2))".format(p=p)
    out = fbflow.solve_shear(65, 65, f, p, "2*" + p, graded=False)
    x = np.asarray(out["x"])[:, None]
    y = np.asarray(out["y"])[None, :]
    exact = y**3 * (1 - y**2) ** 3 * (1 + x)
    assert np.max(np.abs(out["u"] - exact)) < 5e-3
    assert out["residual_inf"] < 1e-9


def test_run_config(tmp_path):
    cfg = {"problem": "linear-shear", "grid": {"nx": 17, "ny": 17}, "data": {"preset": "zero"}}
    report = json.loads(fbflow.run_config("solve-linear", json.dumps(cfg), str(tmp_path)))
    assert len(report["config_hash"]) == 16
    assert (tmp_path / "u.csv").exists()
    with pytest.raises(fbflow.ConfigError, match="grid"):
        fbflow.run_config("solve-linear", json.dumps({"data": {}}), str(tmp_path))
