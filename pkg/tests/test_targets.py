import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from stmala.sparse_state import embed, from_dense, zero_state
from stmala.targets import (
    L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget, c_lambda, log_c_lambda,
    spectral_norm_sq,
)


def scalar_target(**kw):
    return L21RegressionTarget([[2.0]], [[1.0]], tau=1.0, **kw)


def test_g_value_examples():
    rng = np.random.default_rng(0)
    Y, G = rng.normal(size=(5, 2)), rng.normal(size=(5, 3))
    tg = L21RegressionTarget(Y, G, tau=0.7)
    assert tg.g_value(np.zeros((3, 2))) == pytest.approx(np.sum(Y**2) / 1.4)
    assert scalar_target().g_value([[1.0]]) == pytest.approx(0.5)
    ss = SpikeSlabTarget(Y[:, :1], G, theta=2.5)
    assert ss.g_value(np.zeros((3, 1))) == pytest.approx(1.25 * np.sum(Y[:, 0] ** 2))


def test_g_grad_examples():
    np.testing.assert_allclose(scalar_target().g_grad([[1.0]]), [[-1.0]])
    rng = np.random.default_rng(1)
    G = rng.normal(size=(6, 3))
    x = rng.normal(size=(3, 2))
    tg = L21RegressionTarget(G @ x, G, tau=2.0)
    np.testing.assert_allclose(tg.g_grad(x), 0.0, atol=1e-12)


def test_shape_mismatch_raises():
    tg = scalar_target()
    with pytest.raises(ValueError):
        tg.g_value(np.zeros((2, 1)))
    with pytest.raises(ValueError):
        tg.g_grad(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        L21RegressionTarget(np.zeros((3, 1)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        L21RegressionTarget([[1.0]], [[1.0]], tau=0.0)
    with pytest.raises(ValueError):
        RidgedExampleTarget([[1.0]], [[1.0]], v=0.0)
    with pytest.raises(ValueError):
        SpikeSlabTarget([[1.0]], [[1.0]], omega_star=1.0)


def test_c_lambda_values():
    for t in (1, 2, 5):
        assert c_lambda(t, 0.0) == 1.0
    assert c_lambda(1, 1.0) == pytest.approx(2.0)
    assert c_lambda(2, 1.0) == pytest.approx(2 * math.pi)
    # large T must not overflow in log space
    assert np.isfinite(log_c_lambda(400, 3.0))


@pytest.mark.parametrize("t", [1, 2, 3])
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_c_lambda_normalises_radial_density(t, lam):
    # integrate exp(-lam r) over R^t in polar form
    surface = 2 * math.pi ** (t / 2) / math.gamma(t / 2)
    mass = integrate.quad(lambda r: surface * r ** (t - 1) * math.exp(-lam * r), 0, np.inf)[0]
    assert mass / c_lambda(t, lam) == pytest.approx(1.0, abs=1e-4)


def test_log_pi_examples():
    rng = np.random.default_rng(2)
    Y, G = rng.normal(size=(7, 1)), rng.normal(size=(7, 4))
    tg = L21RegressionTarget(Y, G, tau=1.5, lam=0.0, omega=0.2)
    assert tg.log_c_lambda == 0.0
    expect = -np.sum(Y**2) / 3.0 + 4 * math.log(0.8)
    assert tg.log_pi_unnorm(zero_state(4)) == pytest.approx(expect)
    ss = SpikeSlabTarget(Y, G[:, :2], theta=0.8, omega_star=0.5)
    assert ss.log_pi_unnorm(zero_state(2)) == pytest.approx(-0.4 * np.sum(Y**2) + 2 * math.log(0.5))


def test_log_pi_matches_formula():
    rng = np.random.default_rng(3)
    Y, G = rng.normal(size=(8, 2)), rng.normal(size=(8, 5))
    x = np.zeros((5, 2))
    x[[0, 3]] = rng.normal(size=(2, 2))
    s = from_dense(x)
    tau, lam, omega, v = 0.9, 1.3, 0.3, 0.4
    base = -np.sum((Y - G @ x) ** 2) / (2 * tau) - lam * np.sum(np.linalg.norm(x, axis=1))
    prior = 2 * math.log(omega) + 3 * math.log(1 - omega) - 2 * log_c_lambda(2, lam)
    tg = L21RegressionTarget(Y, G, tau=tau, lam=lam, omega=omega)
    assert tg.log_pi_unnorm(s) == pytest.approx(base + prior, rel=1e-12)
    rd = RidgedExampleTarget(Y, G, tau=tau, lam=lam, v=v, omega=omega)
    assert rd.log_pi_unnorm(s) == pytest.approx(base + prior - v * np.sum(x**2), rel=1e-12)

    y1 = Y[:, :1]
    x1 = x[:, :1]
    ss = SpikeSlabTarget(y1, G, theta=1.7, a=2.0, K=0.08, omega_star=0.1)
    slab = 2.5 * np.sum(np.log1p(x1[[0, 3], 0] ** 2 / 0.32))
    expect = -0.85 * np.sum((y1 - G @ x1) ** 2) - slab + 2 * math.log(0.1) + 3 * math.log(0.9)
    assert ss.log_pi_unnorm(from_dense(x1)) == pytest.approx(expect, rel=1e-12)


def test_slab_constant_option():
    rng = np.random.default_rng(4)
    Y, G = rng.normal(size=(6, 1)), rng.normal(size=(6, 3))
    x = np.array([[0.5], [0.0], [-1.0]])
    plain = SpikeSlabTarget(Y, G, a=2.0, K=0.08)
    full = SpikeSlabTarget(Y, G, a=2.0, K=0.08, slab_constant=True)
    # the constant normalises the slab factor to a density on R
    const = integrate.quad(lambda u: (1 + u * u / 0.32) ** -2.5, -np.inf, np.inf)[0]
    diff = full.log_pi_dense(x) - plain.log_pi_dense(x)
    assert diff == pytest.approx(-2 * math.log(const), rel=1e-8)


def test_ridged_converges_to_l21():
    rng = np.random.default_rng(5)
    Y, G = rng.normal(size=(6, 1)), rng.normal(size=(6, 3))
    a, b = rng.normal(size=(3, 1)), rng.normal(size=(3, 1))
    l21 = L21RegressionTarget(Y, G, lam=0.0)
    rd = RidgedExampleTarget(Y, G, lam=0.0, v=1e-12)
    d1 = l21.log_pi_dense(a) - l21.log_pi_dense(b)
    d2 = rd.log_pi_dense(a) - rd.log_pi_dense(b)
    assert d1 == pytest.approx(d2, abs=1e-8)


@given(st.integers(0, 10_000), st.sampled_from(["l21", "ridged", "slab"]))
def test_same_stratum_differences(seed, kind):
    rng = np.random.default_rng(seed)
    n, p, t = 6, 4, 1 if kind == "slab" else 2
    Y, G = rng.normal(size=(n, t)), rng.normal(size=(n, p))
    mask = rng.random(p) < 0.5
    xa = np.zeros((p, t))
    xb = np.zeros((p, t))
    xa[mask] = rng.normal(size=(mask.sum(), t))
    xb[mask] = rng.normal(size=(mask.sum(), t))
    if kind == "l21":
        tg = L21RegressionTarget(Y, G, tau=1.2, lam=0.7)
        f = lambda x: -np.sum((Y - G @ x) ** 2) / 2.4 - 0.7 * np.sum(np.linalg.norm(x, axis=1))
    elif kind == "ridged":
        tg = RidgedExampleTarget(Y, G, tau=1.2, lam=0.7, v=0.3)
        f = lambda x: -np.sum((Y - G @ x) ** 2) / 2.4 - 0.7 * np.sum(np.linalg.norm(x, axis=1)) - 0.3 * np.sum(x**2)
    else:
        tg = SpikeSlabTarget(Y, G, theta=1.1, a=1.5, K=0.2)
        f = lambda x: -0.55 * np.sum((Y - G @ x) ** 2) - 2.0 * np.sum(np.log1p(x**2 / 0.6))
    got = tg.log_pi_unnorm(from_dense(xa)) - tg.log_pi_unnorm(from_dense(xb))
    assert got == pytest.approx(f(xa) - f(xb), abs=1e-10 * (1 + abs(f(xa))))


def _fd(tg, x, h):
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        out[idx] = (tg.g_value(x + e) - tg.g_value(x - e)) / (2 * h)
    return out


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    worst = 0.0
    for i in range(100):
        n, p, t = rng.integers(3, 10), rng.integers(1, 6), rng.integers(1, 4)
        Y, G = rng.normal(size=(n, t)), rng.normal(size=(n, p))
        tg = [
            L21RegressionTarget(Y, G, tau=rng.uniform(0.3, 3), lam=rng.uniform(0, 2)),
            RidgedExampleTarget(Y, G, tau=rng.uniform(0.3, 3), v=rng.uniform(0.1, 2)),
            SpikeSlabTarget(Y, G, theta=rng.uniform(0.3, 3), a=rng.uniform(0.5, 3), K=rng.uniform(0.05, 1)),
        ][i % 3]
        x = rng.normal(size=(p, t))
        h = 1e-6 * max(np.linalg.norm(x), 1.0)
        g = tg.g_grad(x)
        worst = max(worst, np.linalg.norm(_fd(tg, x, h) - g) / np.linalg.norm(g))
    assert worst <= 1e-5


def test_grad_rows_agrees_with_full_gradient():
    rng = np.random.default_rng(7)
    Y, G = rng.normal(size=(9, 1)), rng.normal(size=(9, 6))
    x = rng.normal(size=(6, 1))
    for tg in (L21RegressionTarget(Y, G, tau=0.5), SpikeSlabTarget(Y, G, theta=2.0)):
        idx = np.array([4, 1])
        np.testing.assert_allclose(tg.grad_rows(x[idx], tg.residual(x), idx), tg.g_grad(x)[idx], rtol=1e-12)


def test_lipschitz_examples():
    tg = L21RegressionTarget(np.zeros((2, 1)), np.eye(2), tau=1.0)
    assert tg.lipschitz_bound() == pytest.approx(1.0, rel=1e-8)
    tg = L21RegressionTarget([[1.0]], [[3.0]], tau=0.5)
    assert tg.lipschitz_bound() == pytest.approx(18.0, rel=1e-8)
    rng = np.random.default_rng(8)
    G = rng.normal(size=(5, 7))
    assert spectral_norm_sq(G) == pytest.approx(np.linalg.eigvalsh(G @ G.T)[-1], rel=1e-6)
    ss = SpikeSlabTarget(np.zeros((5, 1)), G, theta=2.0, a=2.0, K=0.08)
    expect = 2.0 * np.linalg.eigvalsh(G @ G.T)[-1] + 2.5 / 0.16
    assert ss.lipschitz_bound() == pytest.approx(expect, rel=1e-6)
    assert tg.default_sigma() == pytest.approx(math.sqrt(2 / 18.0))


def test_power_iteration_nonconvergence():
    # an unreachable tolerance within three iterations
    G = np.diag([1.0, 0.999999999])
    with pytest.raises(RuntimeError):
        spectral_norm_sq(G, rtol=1e-30, max_iter=3)
