import json

import numpy as np
import pytest

from chanforecast.diagnostics import (
    evaluate,
    mae,
    mse,
    persistence_baseline,
    risk_decompose,
    w_diff_mahalanobis,
)
from chanforecast.series import DesignMatrices, WindowedDataset, make_windows, stack
from chanforecast.solver import ols_ci
from chanforecast.synth import ArSpec, DriftSpec, gen_multichannel
from conftest import make_series


def _designs(seed=0, drift=None):
    s = gen_multichannel([ArSpec((0.7,), 3000, seed=seed), ArSpec((0.3, 0.4), 3000, seed=seed)],
                         drift=drift, mixing=0.3)
    tr, te = s.slice(0, 2000), s.slice(2000, 3000)
    return stack(make_windows(tr, 6, 3)), stack(make_windows(te, 6, 3))


def test_identical_sets():
    d, _ = _designs()
    for strategy in ("cd", "ci"):
        r = risk_decompose(d, d, strategy)
        assert r.w_diff == pytest.approx(0, abs=1e-20)
        assert r.gen_error == pytest.approx(r.test_error, rel=1e-12)


@pytest.mark.parametrize("strategy", ["cd", "ci"])
def test_pythagorean_identity(strategy):
    tr, te = _designs(drift=DriftSpec("coefficient_shift", 2000, (0,), new_coefficients=(0.1,)))
    # orthogonality oracle first
    from chanforecast.solver import ols_cd

    W_te = (ols_cd if strategy == "cd" else ols_ci)(te).W
    A, B = te.for_strategy(strategy)
    assert np.abs(A.T @ (B - A @ W_te)).max() < 1e-8 * np.abs(A.T @ B).max()
    r = risk_decompose(tr, te, strategy)
    assert r.well_conditioned
    assert abs(r.w_diff - (r.gen_error - r.test_error)) <= 1e-8 * r.gen_error
    assert r.pythagorean_residual < 1e-8
    assert r.w_diff_mahalanobis == pytest.approx(r.w_diff, rel=1e-8)


def test_capacity_ordering():
    tr, te = _designs(seed=2)
    cd, ci = risk_decompose(tr, te, "cd"), risk_decompose(tr, te, "ci")
    assert cd.train_error <= ci.train_error + 1e-9
    assert cd.test_error <= ci.test_error + 1e-9


def test_scalar_w_diff():
    A = np.array([[1.0], [1.0]])
    delta = np.array([[2.0 - 1.0]])
    assert float(np.sum((A @ delta) ** 2)) == 2.0
    assert w_diff_mahalanobis(A, delta) == 2.0


def test_risk_report_json(tmp_path):
    tr, te = _designs()
    r = risk_decompose(tr, te, "ci", dataset="synth")
    d = json.loads(r.to_json(tmp_path / "r.json"))
    assert set(d) == {"dataset", "L", "H", "strategy", "train_error", "test_error", "gen_error",
                      "w_diff", "pythagorean_residual", "cond_train", "cond_test"}
    assert all(d[k] >= 0 for k in ("train_error", "test_error", "gen_error", "w_diff"))


def test_rank_deficient_test_solve_is_minimum_norm(rng):
    # CD with LC > N_test: the test solve is rank deficient but still an exact minimizer
    tr = stack(make_windows(rng.standard_normal((400, 4)), 8, 2))
    te = stack(make_windows(rng.standard_normal((30, 4)), 8, 2))
    r = risk_decompose(tr, te, "cd")
    assert not r.well_conditioned
    assert r.test_error < 1e-20
    assert r.pythagorean_residual < 1e-8


def test_mismatched_designs(rng):
    a = stack(make_windows(rng.standard_normal((50, 2)), 4, 2))
    b = stack(make_windows(rng.standard_normal((50, 2)), 3, 2))
    with pytest.raises(ValueError):
        risk_decompose(a, b, "ci")


def test_metrics_examples():
    y = np.zeros((2, 3, 2))
    assert mse(y, y) == 0 and mae(y, y) == 0
    assert mse(y + 0.5, y) == 0.25 and mae(y + 0.5, y) == 0.5
    with pytest.raises(ValueError):
        mse(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        mae(np.zeros(0), np.zeros(0))


def test_evaluate_coefficients_and_empty(rng):
    d = make_windows(rng.standard_normal((100, 2)), 3, 2)
    c = ols_ci(stack(d))
    assert evaluate(c, d, "mse") > 0 and evaluate(c, d, "MAE") > 0
    empty = WindowedDataset(np.zeros((0, 3, 2)), np.zeros((0, 2, 2)))
    with pytest.raises(ValueError):
        evaluate(c, empty)


def test_persistence_constant_series():
    d = make_windows(make_series(np.full(20, 3.0)), 4, 3)
    _, m = persistence_baseline(d)
    assert m == {"mse": 0.0, "mae": 0.0}


@pytest.mark.parametrize("slope,H", [(1.0, 3), (0.5, 5)])
def test_persistence_linear_series(slope, H):
    d = make_windows(make_series(slope * np.arange(50.0)), 4, H)
    pred, m = persistence_baseline(d)
    np.testing.assert_array_equal(pred[:, 0, 0], d.X[:, -1, 0])
    assert m["mae"] == pytest.approx(slope * (H + 1) / 2)
