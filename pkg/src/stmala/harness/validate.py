"""Self-checks run by ``stmala validate``.

Each check returns ``(name, passed, detail)``. They are quick versions of
the properties the test suite asserts at full size.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize, stats

from ..operators import OperatorKind, apply_operator, stvs_penalty
from ..proposal import atom_prob, log_row_densities, ncx2_cdf_series
from ..targets import L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget

__all__ = ["continuous_mass", "check_normalization", "check_gradients",
           "check_atom_probs", "check_stvs_prox", "run_all"]


def continuous_mass(kind, sigma, gamma, c, n_angle=256) -> float:
    """Integral of the continuous proposal density of one row (T = 1 or 2)."""
    kind = OperatorKind.parse(kind)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    t = len(c)
    lo = gamma if kind is OperatorKind.HARD else 0.0
    # the density is negligible once the row is this far from the drift's image
    hi = float(np.linalg.norm(c)) + gamma + 40.0 * sigma

    if t == 1:
        def f(z):
            return math.exp(log_row_densities(kind, sigma, gamma, c[None, :], np.array([[z]]))[0])

        pos = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
        neg = integrate.quad(lambda z: f(-z), lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
        return pos + neg
    if t != 2:
        raise ValueError("quadrature implemented for T <= 2")
    th = 2.0 * math.pi * np.arange(n_angle) / n_angle
    unit = np.stack([np.cos(th), np.sin(th)], axis=1)
    C = np.repeat(c[None, :], n_angle, axis=0)

    def ring(r):
        # periodic trapezoid rule in the angle is spectrally accurate
        if r <= lo:
            return 0.0
        d = np.exp(log_row_densities(kind, sigma, gamma, C, r * unit))
        return r * d.mean() * 2.0 * math.pi

    return integrate.quad(ring, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)[0]


def check_normalization(tol=1e-5, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in OperatorKind:
        for t in (1, 2):
            for _ in range(4):
                sigma = rng.uniform(0.05, 1.0)
                gamma = rng.uniform(0.05, 1.0)
                c = rng.normal(scale=1.0, size=t)
                total = atom_prob(c, sigma, gamma) + continuous_mass(kind, sigma, gamma, c)
                worst = max(worst, abs(total - 1.0))
    return "proposal normalization", worst <= tol, f"max |mass - 1| = {worst:.2e}"


def _random_targets(rng):
    n, p, t = rng.integers(5, 15), rng.integers(2, 8), rng.integers(1, 4)
    G = rng.normal(size=(n, p))
    Y = rng.normal(size=(n, t))
    yield L21RegressionTarget(Y, G, tau=rng.uniform(0.5, 2.0), lam=rng.uniform(0, 2))
    yield RidgedExampleTarget(Y, G, tau=rng.uniform(0.5, 2.0), lam=rng.uniform(0, 2), v=rng.uniform(0.1, 2))
    yield SpikeSlabTarget(Y, G, theta=rng.uniform(0.5, 2.0), a=rng.uniform(1, 3), K=rng.uniform(0.05, 1))


def fd_gradient_error(target, x, h=1e-6) -> float:
    g = target.g_grad(x)
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        fd[idx] = (target.g_value(x + e) - target.g_value(x - e)) / (2 * h)
    return float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12))


def check_gradients(n_cases=10, tol=1e-5, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        for tg in _random_targets(rng):
            x = rng.normal(size=tg.dims)
            worst = max(worst, fd_gradient_error(tg, x))
    return "gradient finite differences", worst <= tol, f"max relative error = {worst:.2e}"


def check_atom_probs(tol=1e-9, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(40):
        t = int(rng.integers(1, 6))
        x, nc = rng.uniform(0.1, 30), rng.uniform(0, 60)
        worst = max(worst, abs(ncx2_cdf_series(x, t, nc) - stats.ncx2.cdf(x, t, max(nc, 1e-300))))
        c, s, g = rng.normal(size=1), rng.uniform(0.1, 1), rng.uniform(0.05, 2)
        closed = atom_prob(c, s, g)
        series = ncx2_cdf_series((g / s) ** 2, 1, float(c @ c) / s**2)
        worst = max(worst, abs(closed - series))
    return "atom probability cross-check", worst <= tol, f"max abs difference = {worst:.2e}"


def check_stvs_prox(n_cases=20, tol=1e-4, seed=0):
    """The STVS operator minimises ``penalty(x) + |x - u|^2 / 2`` (scalar case)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        gamma = rng.uniform(0.1, 2.0)
        u = rng.normal(scale=3.0)
        obj = lambda x: stvs_penalty(gamma, x) + 0.5 * (x - u) ** 2
        lo, hi = min(0.0, u) - 1.0, max(0.0, u) + 1.0
        grid = np.linspace(lo, hi, 4001)
        x0 = grid[np.argmin([obj(v) for v in grid])]
        step = grid[1] - grid[0]
        res = optimize.minimize_scalar(obj, bounds=(x0 - step, x0 + step), method="bounded",
                                       options={"xatol": 1e-10})
        best = res.x if res.fun <= obj(x0) else x0
        worst = max(worst, abs(best - float(apply_operator("stvs", gamma, np.array([u]))[0])))
    return "STVS proximal identity", bool(worst <= tol), f"max |argmin - operator| = {worst:.2e}"


def run_all(seed=0):
    return [
        check_normalization(seed=seed),
        check_gradients(seed=seed),
        check_atom_probs(seed=seed),
        check_stvs_prox(seed=seed),
    ]
