"""Acceptance criteria, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see
conftest.py). Criteria 3, 4a, 5, 6 and 8 need the public benchmark CSVs in
``$CHANFORECAST_DATA`` (default ``./data``); without them they fail with a
"dataset not found" message rather than being skipped.
"""

import time

import numpy as np
import pytest

from chanforecast.acf import build_blocks_from_windows
from chanforecast.bench.config import DATASETS, ExperimentConfig, resolve_dataset
from chanforecast.bench.runner import Point, drift, risk, run_points
from chanforecast.diagnostics import persistence_baseline, risk_decompose
from chanforecast.exceptions import DatasetNotFoundError
from chanforecast.models import ModelSpec, TrainConfig, fit, init_params, loss
from chanforecast.models import layers
from chanforecast.series import make_windows, stack
from chanforecast.solver import ols_cd, ols_ci, training_loss, yule_walker_cd, yule_walker_ci
from chanforecast.synth import ArSpec, DriftSpec, gen_ar, gen_multichannel

pytestmark = pytest.mark.acceptance


def _report(cid, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}")
    assert ok, detail


def _require(*names):
    missing = []
    for n in names:
        try:
            resolve_dataset(n)
        except DatasetNotFoundError as exc:
            missing.append(str(exc))
    if missing:
        pytest.fail("benchmark data not available: " + "; ".join(missing), pytrace=False)


def _equalized(seed, T=6000, mixing=0.4):
    s = gen_multichannel([ArSpec((0.7,), T, seed=seed), ArSpec((0.2, 0.5), T, seed=seed),
                          ArSpec((-0.3, 0.1), T, seed=seed)], mixing=mixing)
    return (s.values - s.values.mean(0)) / s.values.std(0)


# ---------------------------------------------------------------------------
# 1. algebraic identities
# ---------------------------------------------------------------------------


@pytest.mark.criterion("1a", "Pythagorean identity W diff = gen - test to 1e-8 relative")
def test_c1a_pythagorean():
    worst = 0.0
    for seed in range(5):
        s = gen_multichannel([ArSpec((0.8,), 3000, seed=seed), ArSpec((0.4, 0.3), 3000, seed=seed)],
                             DriftSpec("coefficient_shift", 2000, (0,), new_coefficients=(0.2,)), mixing=0.3)
        tr = stack(make_windows(s.slice(0, 2000), 8, 4))
        te = stack(make_windows(s.slice(2000, 3000), 8, 4))
        for strategy in ("cd", "ci"):
            r = risk_decompose(tr, te, strategy)
            assert r.cond_test < 1e10
            worst = max(worst, abs(r.w_diff - (r.gen_error - r.test_error)) / r.gen_error,
                        abs(r.w_diff_mahalanobis - r.w_diff) / r.w_diff)
    _report("1a", worst <= 1e-8, f"max relative residual {worst:.2e} (tol 1e-8)")


@pytest.mark.criterion("1b", "OLS and Yule-Walker agree to 1e-6 on variance-equalized AR data")
def test_c1b_ols_yule_walker():
    worst = 0.0
    for seed in range(3):
        d = make_windows(_equalized(seed), 8, 4)
        blocks = build_blocks_from_windows(d)
        m = stack(d)
        worst = max(worst, np.abs(ols_cd(m).W - yule_walker_cd(blocks).W).max(),
                    np.abs(ols_ci(m).W - yule_walker_ci(blocks).W).max())
    _report("1b", worst <= 1e-6, f"max |W_ols - W_yw| = {worst:.2e} (tol 1e-6)")


@pytest.mark.criterion("1c", "CD/CI nesting: train loss CD <= CI + 1e-9")
def test_c1c_nesting():
    gaps = []
    for seed in range(5):
        m = stack(make_windows(_equalized(seed, T=2000), 6, 3))
        gaps.append(training_loss(ols_cd(m), m) - training_loss(ols_ci(m), m))
    _report("1c", max(gaps) <= 1e-9, f"max L_cd - L_ci = {max(gaps):.2e}")


@pytest.mark.criterion("1d", "yule_walker_ci depends only on the ACF sum (swap test, 1e-6)")
def test_c1d_swap():
    from chanforecast.acf import AcfProfile, build_blocks

    rho_a = 0.8 ** np.arange(20)
    rho_b = np.cos(np.arange(20) / 3) * 0.9 ** np.arange(20)
    w1 = yule_walker_ci(build_blocks(AcfProfile(np.stack([rho_a, rho_b])), 6, 4)).W
    w2 = yule_walker_ci(build_blocks(AcfProfile(np.stack([rho_b, rho_a])), 6, 4)).W
    # same check on data: two datasets whose channel ACFs are exchanged
    v = _equalized(0, T=4000)[:, :2]
    w3 = yule_walker_ci(build_blocks(v, 6, 4)).W
    w4 = yule_walker_ci(build_blocks(v[:, ::-1], 6, 4)).W
    err = max(np.abs(w1 - w2).max(), np.abs(w3 - w4).max())
    _report("1d", err <= 1e-6, f"max |W - W_swapped| = {err:.2e}")


# ---------------------------------------------------------------------------
# 2. AR recovery
# ---------------------------------------------------------------------------


@pytest.mark.criterion("2", "AR(1)/AR(2) recovery within 0.02 over 10 seeds in < 10 s")
def test_c2_ar_recovery():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        for phi in ((0.8,), (0.5, 0.3)):
            x = gen_ar(ArSpec(phi, 20000, seed=seed))
            W = ols_ci(stack(make_windows(x, len(phi), 1))).W[::-1, 0]
            worst = max(worst, np.abs(W - phi).max())
    dt = time.perf_counter() - t0
    _report("2", worst <= 0.02 and dt < 10, f"max coefficient error {worst:.4f}, {dt:.2f} s")


# ---------------------------------------------------------------------------
# 3. published Linear results on ETT
# ---------------------------------------------------------------------------

REFERENCE_MSE = {"ETTh1": {"cd": 0.402, "ci": 0.345}, "ETTh2": {"cd": 0.711, "ci": 0.226}}


def _trained(dataset, strategies, horizon=48, **kw):
    cfg = ExperimentConfig(dataset=dataset, mode="train", lookback=96, horizons=(horizon,),
                           strategies=tuple(s for s in strategies if s != "prreg") or ("cd",), **kw)
    pts = [Point(s, horizon, 96, cfg.model, *(("lambda", kw.get("reg_lambda", 0.0)) if s == "prreg" else ()))
           for s in strategies]
    table, _ = run_points(cfg, pts)
    return {(r["strategy"], r["sweep_value"]): r for r in table.rows()}


@pytest.mark.slow
@pytest.mark.criterion("3", "published Linear MSE on ETTh1/ETTh2 within 15%, improvement signs match")
def test_c3_table3():
    _require("ETTh1", "ETTh2")
    notes, ok = [], True
    for name, ref in REFERENCE_MSE.items():
        rows = _trained(name, ("cd", "ci"))
        got = {s: rows[(s, None)]["mse"] for s in ("cd", "ci")}
        for s in ("cd", "ci"):
            rel = abs(got[s] - ref[s]) / ref[s]
            ok &= rel <= 0.15
            notes.append(f"{name} {s.upper()} {got[s]:.3f} vs {ref[s]} ({100 * rel:.0f}%)")
        ok &= np.sign(got["cd"] - got["ci"]) == np.sign(ref["cd"] - ref["ci"])
    _report("3", bool(ok), "; ".join(notes))


# ---------------------------------------------------------------------------
# 4. PRReg
# ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion("4a", "PRReg lambda sweep on ETTh2: best < CD, within 25% of 0.239, U-shaped")
def test_c4a_prreg_sweep():
    _require("ETTh2")
    grid = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    cfg = ExperimentConfig(dataset="ETTh2", mode="train", lookback=96, horizons=(48,), sweep="lambda",
                           lambda_grid=grid, strategies=("cd",))
    from chanforecast.bench.runner import points

    table, _ = run_points(cfg, points(cfg))
    rows = table.rows()
    cd = next(r["mse"] for r in rows if r["strategy"] == "cd")
    curve = [next(r["mse"] for r in rows if r["strategy"] == "prreg" and r["sweep_value"] == lam) for lam in grid]
    best = int(np.argmin(curve))
    ok = curve[best] < cd and abs(curve[best] - 0.239) / 0.239 <= 0.25
    ok &= 0 < best < len(grid) - 1 and curve[0] > curve[best] and curve[-1] > curve[best]
    _report("4a", bool(ok), f"CD {cd:.3f}; PRReg curve {[round(c, 3) for c in curve]}")


@pytest.mark.criterion("4b", "PRReg Linear at lambda=1e6 matches persistence metrics to 1e-3")
def test_c4b_persistence():
    s = gen_multichannel([ArSpec((0.9,), 3000, seed=0), ArSpec((0.5, 0.3), 3000, seed=0),
                          ArSpec((0.2,), 3000, seed=0)], mixing=0.3)
    z = (s.values - s.values.mean(0)) / s.values.std(0)
    tr, te = make_windows(z[:2000], 24, 12), make_windows(z[2000:], 24, 12)
    m = fit(ModelSpec("linear", "prreg", reg_lambda=1e6), tr, TrainConfig(epochs=20))
    _, base = persistence_baseline(te)
    pred = m.predict(te.X)
    got = {"mse": float(np.mean((pred - te.Y) ** 2)), "mae": float(np.mean(np.abs(pred - te.Y)))}
    gap = max(abs(got[k] - base[k]) for k in base)
    _report("4b", gap <= 1e-3, f"max metric gap {gap:.2e} (MSE {got['mse']:.4f} vs {base['mse']:.4f})")


# ---------------------------------------------------------------------------
# 5. drift report
# ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion("5", "sum diff below >=50% of channel diffs on >=7/9 datasets; ETTh2 max/sum >= 10")
def test_c5_drift():
    _require(*DATASETS)
    hits, ratio = 0, 0.0
    for name in DATASETS:
        rep = drift(ExperimentConfig(dataset=name))
        hits += rep.fraction_above_sum >= 0.5
        if name == "ETTh2":
            ratio = rep.diff.max() / rep.sum_diff
    _report("5", hits >= 7 and ratio >= 10, f"{hits}/9 datasets; ETTh2 max/sum = {ratio:.1f}")


# ---------------------------------------------------------------------------
# 6. risk ordering
# ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion("6", "ETT risk ordering: W diff CD > CI, test CD <= CI, gen CI < CD")
def test_c6_risk():
    names = ("ETTh1", "ETTh2", "ETTm1", "ETTm2")
    _require(*names)
    ok, notes = True, []
    for name in names:
        reps = {r.strategy: r for r in risk(ExperimentConfig(dataset=name, horizons=(48,)))}
        cd, ci = reps["cd"], reps["ci"]
        this = cd.w_diff > ci.w_diff and cd.test_error <= ci.test_error and ci.gen_error < cd.gen_error
        ok &= this
        notes.append(f"{name}:{'ok' if this else 'x'}")
    _report("6", bool(ok), " ".join(notes))


# ---------------------------------------------------------------------------
# 7. gradients, determinism, CI invariance
# ---------------------------------------------------------------------------


@pytest.mark.criterion("7", "finite-difference gradients <= 1e-4, determinism, exact CI channel invariance")
def test_c7_gradients_determinism():
    worst = 0.0
    for arch, kw in (("linear", {}), ("mlp", {"hidden_units": 6}), ("lowrank", {"rank_rate": 2})):
        for kind in ("l2",):
            r = np.random.default_rng(3)
            p = init_params(arch, r, 6, 4, **kw)
            x, y = r.standard_normal((9, 6)), r.standard_normal((9, 4))
            fwd, bwd = layers.ARCHITECTURES[arch]
            g = bwd(p, x, loss(kind, fwd(p, x), y)[1])
            for k, v in p.items():
                fd = np.zeros_like(v)
                for idx in np.ndindex(v.shape):
                    old = v[idx]
                    v[idx] = old + 1e-5
                    up = loss(kind, fwd(p, x), y)[0]
                    v[idx] = old - 1e-5
                    fd[idx] = (up - loss(kind, fwd(p, x), y)[0]) / 2e-5
                    v[idx] = old
                worst = max(worst, np.abs(g[k] - fd).max() / max(np.abs(fd).max(), 1e-12))

    s = gen_multichannel([ArSpec((0.7,), 600, seed=1), ArSpec((0.3,), 600, seed=1), ArSpec((0.5,), 600, seed=1)])
    d = make_windows(s.values, 12, 4)
    same = True
    for strategy in ("cd", "ci", "prreg"):
        spec = ModelSpec("mlp", strategy, hidden_units=8, reg_lambda=0.1)
        a = fit(spec, d, TrainConfig(epochs=2, seed=5))
        b = fit(spec, d, TrainConfig(epochs=2, seed=5))
        same &= all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
        same &= np.array_equal(a.predict(d.X), b.predict(d.X))

    m = fit(ModelSpec("mlp", "ci", hidden_units=8), d, TrainConfig(epochs=2))
    X = d.X[:10].copy()
    base = m.predict(X)[:, :, 0]
    X[:, :, 1:] = np.random.default_rng(0).standard_normal(X[:, :, 1:].shape) * 100
    invariant = np.array_equal(m.predict(X)[:, :, 0], base)

    ok = worst <= 1e-4 and same and invariant
    _report("7", ok, f"max grad rel err {worst:.1e}; deterministic={same}; CI invariant={invariant}")


# ---------------------------------------------------------------------------
# 8. L1 loss direction
# ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion("8", "ETTh2 Linear CD: MAE with L1 training <= MAE with L2 training")
def test_c8_l1_direction():
    _require("ETTh2")
    l2 = _trained("ETTh2", ("cd",), loss="l2")[("cd", None)]["mae"]
    l1 = _trained("ETTh2", ("cd",), loss="l1")[("cd", None)]["mae"]
    _report("8", l1 <= l2, f"MAE L1 {l1:.4f} vs L2 {l2:.4f}")
