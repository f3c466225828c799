import json
import math
import os
import tempfile

import numpy as np
import pytest

import sqiv

DATA_DIR = os.environ.get(
    "SQIV_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data")
)


def test_indicator_is_vectorized_and_antisymmetric():
    u = np.linspace(-1.2, 1.2, 41)
    v = sqiv.smoothed_indicator(u)
    assert v.shape == u.shape
    np.testing.assert_allclose(v + sqiv.smoothed_indicator(-u), 1.0, atol=1e-15)
    assert sqiv.kernel_moment(4) == pytest.approx(-1.0 / 33.0, abs=1e-12)


def test_moments_and_jacobian_shapes():
    d = sqiv.gen_dgp(4, 100, seed=1)
    m, j = sqiv.smoothed_moments(
        d["Y"], d["X"], d["Z"], d["x_in_z"], np.array([0.2, 0.0]), 0.5, 0.1, jacobian=True
    )
    assert m.shape == (d["Z"].shape[1],)
    assert j.shape == (d["Z"].shape[1], 2)


def test_estimate_linear_mm_and_baselines():
    d = sqiv.gen_dgp(2, 200, seed=3)
    r = sqiv.estimate_linear(d["Y"], d["X"], d["Z"], d["x_in_z"], 0.5, estimator="mm", h=0.1)
    assert r["converged"]
    assert r["moment_norm"] <= 1e-8 * d["Z"].shape[1]
    assert abs(r["beta_hat"][0] - sqiv.dgp_truth(2, 0.5)) < 1.0
    iv = sqiv.estimate_linear(d["Y"], d["X"], d["Z"], d["x_in_z"], 0.5, estimator="2sls")
    assert np.all(np.isfinite(iv["beta_hat"]))


def test_solver_failure_raises_library_error():
    d = sqiv.gen_dgp(1, 50, seed=1)
    z = d["Z"].copy()
    z[:, 1] = 0.0
    with pytest.raises(sqiv.SqivError):
        sqiv.estimate_linear(d["Y"], d["X"], z, d["x_in_z"], 0.5)


def test_robust_rmse():
    s = sqiv.robust_rmse([1.0, 2.0, 3.0, float("nan")], 2.0)
    assert s["failures"] == 1
    assert s["median_bias"] == pytest.approx(0.0)


def test_monte_carlo_cells():
    cells = sqiv.run_monte_carlo([2], [50], [0.5], ["mm", "qr"], reps=5, seed=2)
    assert [c["estimator"] for c in cells] == ["mm", "qr"]
    assert all(len(c["estimates"]) == 5 for c in cells)
    again = sqiv.run_monte_carlo([2], [50], [0.5], ["mm", "qr"], reps=5, seed=2, threads=2)
    assert [c["estimates"] for c in cells] == [c["estimates"] for c in again]


def test_euler_decile_table():
    series = sqiv.synthetic_macro_series(600, seed=1)
    rows = sqiv.decile_table(series, taus=[0.3, 0.5, 0.7])
    assert [r["label"] for r in rows][-1] == "2SLS"
    for r in rows:
        assert r["ok"]
        assert 0.9 < r["beta"] < 1.1


def test_cli_in_process():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "res")
        code, _, err = sqiv.run_cli(
            ["estimate", "--data", os.path.join(DATA_DIR, "dgp1_n500.csv"), "--outcome", "y",
             "--endogenous", "d", "--instruments", "z", "--tau", "0.5", "--format", "json",
             "--out", out]
        )
        assert code == 0, err
        with open(out + ".json") as f:
            res = json.load(f)
        est = res["results"][0]["parameters"][0]["estimate_full"]
        assert math.isfinite(est)
        code, _, _ = sqiv.run_cli(["estimate", "--data", os.path.join(tmp, "none.csv"),
                                   "--outcome", "y", "--out", out + "2"])
        assert code == 3
