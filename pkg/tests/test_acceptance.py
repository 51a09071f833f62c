"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with the measured quantity and
the tolerance it is held to, then asserts. Run with ``pytest -v`` to see
the lines alongside the test names.
"""
import itertools
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from stmala.harness.config import ExperimentConfig
from stmala.harness.experiment import build_problem, run_experiment, run_sampler
from stmala.harness.validate import check_stvs_prox, continuous_mass, fd_gradient_error
from stmala.operators import OperatorKind, apply_operator
from stmala.proposal import atom_prob, log_row_densities, ncx2_cdf_johnson, ncx2_cdf_series
from stmala.rng import make_rng
from stmala.targets import L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget

KINDS = [k.value for k in OperatorKind]


@pytest.fixture
def report(capsys):
    def emit(number, name, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}: {detail}")
        return passed

    return emit


# ---------------------------------------------------------------- 1

def _param_grid(t):
    """12 (mu, sigma, gamma) points: 3 drift sizes x 2 noise levels x 2 thresholds."""
    direction = np.array([1.0]) if t == 1 else np.array([math.cos(1.0), math.sin(1.0)])
    for m, s, g in itertools.product((0.0, 0.6, 2.5), (0.15, 1.0), (0.2, 1.1)):
        yield m * direction, s, g


def test_proposal_normalization(report):
    t0 = time.time()
    worst = 0.0
    for kind in KINDS:
        for t in (1, 2):
            for mu, s, g in _param_grid(t):
                worst = max(worst, abs(atom_prob(mu, s, g) + continuous_mass(kind, s, g, mu) - 1.0))
    secs = time.time() - t0
    ok = worst <= 1e-5 and secs < 10
    report(1, "proposal normalization", ok, f"max |mass - 1| = {worst:.2e} (tol 1e-5), {secs:.1f} s")
    assert ok


# ---------------------------------------------------------------- 2

def _expected_bins(kind, mu, s, g, edges):
    t = len(mu)
    if t == 1:
        f = lambda z: math.exp(log_row_densities(kind, s, g, mu[None, :], np.array([[z]]))[0])
    else:
        th = 2.0 * math.pi * np.arange(256) / 256
        unit = np.stack([np.cos(th), np.sin(th)], axis=1)
        C = np.repeat(mu[None, :], 256, axis=0)
        f = lambda r: r * 2.0 * math.pi * float(np.exp(log_row_densities(kind, s, g, C, r * unit)).mean())
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if kind == "hard" and max(abs(a), abs(b)) <= g and a * b >= 0:
            out.append(0.0)
            continue
        lo, hi = a, b
        if kind == "hard":
            # only the part of the bin outside the threshold ball carries mass
            if t == 2 or a >= 0:
                lo = max(a, g)
            elif b <= 0:
                hi = min(b, -g)
        out.append(integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-10)[0] if hi > lo else 0.0)
    return np.array(out)


# few, wide bins: every bin is held to 3 SE, so the number of bins sets the
# false-alarm rate of the whole check (about 36 comparisons per kind here)
N_BINS = 12

MC_CASES = [
    (np.array([0.4]), 0.5, 0.3),
    (np.array([-1.5]), 0.8, 0.6),
    (np.array([0.3, -0.2]), 0.4, 0.35),
]


@pytest.mark.parametrize("kind", KINDS)
def test_monte_carlo_density_match(report, kind):
    n = 1_000_000
    t0 = time.time()
    worst_bin = worst_atom = 0.0
    min_p = 1.0
    for case, (mu, s, g) in enumerate(MC_CASES):
        rng = make_rng(11, (KINDS.index(kind), case))
        z = apply_operator(kind, g, mu[None, :] + s * rng.standard_normal((n, len(mu))))
        nrm = np.linalg.norm(z, axis=1)
        zero = nrm == 0.0
        p0 = atom_prob(mu, s, g)
        worst_atom = max(worst_atom, abs(zero.mean() - p0) / math.sqrt(p0 * (1 - p0) / n))

        if len(mu) == 1:
            vals = z[~zero, 0]
            span = abs(mu[0]) + g + 5 * s
            edges = np.unique(np.concatenate([np.linspace(-span, span, N_BINS + 1), [-g, 0.0, g]]))
        else:
            vals = nrm[~zero]
            edges = np.unique(np.concatenate([np.linspace(0.0, np.linalg.norm(mu) + g + 5 * s, N_BINS + 1), [g]]))
        counts = np.histogram(vals, bins=edges)[0]
        pr = _expected_bins(kind, mu, s, g, edges)
        live = pr * n >= 5
        se = np.sqrt(n * pr[live] * (1 - pr[live]))
        zs = (counts[live] - n * pr[live]) / se
        worst_bin = max(worst_bin, float(np.max(np.abs(zs))))
        min_p = min(min_p, float(stats.chi2.sf(np.sum(zs**2), live.sum())))
        # nothing may fall where the density vanishes
        assert np.all(counts[pr == 0.0] == 0)
    secs = time.time() - t0
    ok = worst_bin <= 3 and worst_atom <= 3 and secs < 30
    report(2, f"Monte Carlo density match ({kind})", ok,
           f"max bin deviation {worst_bin:.2f} SE, atom deviation {worst_atom:.2f} SE (tol 3), "
           f"smallest chi-square p {min_p:.3f}, {secs:.1f} s")
    assert ok


# ---------------------------------------------------------------- 3

@pytest.mark.parametrize("sampler", ["block_stmala", "rjmcmc"])
def test_oracle_stationarity(report, sampler, tmp_path):
    cfg = ExperimentConfig(model="toy_l21", n=40, p=6, lam=0.0, omega=0.1, support=3,
                           sampler=sampler, block_size=2, gamma=0.1, sigma_rj=0.3,
                           n_iter=500_000, seed=1, save_traces=False)
    t0 = time.time()
    res = run_experiment(cfg, samplers=[sampler], out=tmp_path)
    secs = time.time() - t0
    err = res["summary"][0]["final_error"]
    ok = err <= 0.1 and secs < 120
    report(3, f"oracle stationarity ({sampler})", ok, f"activation error {err:.4f} (tol 0.1), {secs:.1f} s")
    assert ok


# ---------------------------------------------------------------- 4 and 5

TOY = ExperimentConfig(model="toy_l21", n=100, p=16, lam=1.0, omega=0.1, support=8,
                       sampler="block_stmala", block_size=4, gamma=0.07, sigma_rj=0.02,
                       n_iter=300_000, seed=0, replicates=20, save_traces=False)


@pytest.fixture(scope="module")
def toy_study(tmp_path_factory):
    t0 = time.time()
    res = run_experiment(TOY, samplers=["block_stmala", "rjmcmc"], out=tmp_path_factory.mktemp("toy"))
    res["seconds"] = time.time() - t0
    return res


def _column(res, sampler, key):
    return np.array([r[key] for r in res["summary"] if r["sampler"] == sampler])


def test_block_stmala_beats_reversible_jump(report, toy_study):
    e_st = np.median(_column(toy_study, "block_stmala", "final_error"))
    e_rj = np.median(_column(toy_study, "rjmcmc", "final_error"))
    a_st = _column(toy_study, "block_stmala", "acceptance_rate").mean()
    a_rj = _column(toy_study, "rjmcmc", "acceptance_rate").mean()
    ok = e_st < e_rj and toy_study["seconds"] < 600
    report(4, "median error block-STMALA < RJMCMC", ok,
           f"{e_st:.4f} vs {e_rj:.4f} (ratio {e_rj / e_st:.1f}), acceptance {a_st:.3f} vs {a_rj:.3f}, "
           f"{toy_study['seconds']:.0f} s")
    assert ok


def test_acceptance_rate_envelope(report, toy_study):
    acc = _column(toy_study, "block_stmala", "acceptance_rate")
    sigma = build_problem(TOY).target.default_sigma()
    ok = bool(np.all((acc >= 0.15) & (acc <= 0.35)))
    report(5, "acceptance rate envelope", ok,
           f"range [{acc.min():.3f}, {acc.max():.3f}] at sigma {sigma:.4f} (band [0.15, 0.35])")
    assert ok


# ---------------------------------------------------------------- 6

def johnson_grid():
    """(x, T, l): T = 1..10, l up to 100, x across the 1%..99% quantiles of the exact law."""
    for t in range(1, 11):
        for ncp in (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0):
            dist = stats.ncx2(t, ncp) if ncp > 0 else stats.chi2(t)
            for q in np.linspace(0.01, 0.99, 25):
                yield float(dist.ppf(q)), t, ncp


def test_atom_probability_methods_agree(report):
    worst, where = 0.0, None
    for x, t, ncp in johnson_grid():
        d = abs(ncx2_cdf_series(x, t, ncp) - ncx2_cdf_johnson(x, t, ncp))
        if d > worst:
            worst, where = d, (x, t, ncp)
    ok = worst <= 2e-3
    report(6, "exact vs Johnson atom probability", ok,
           f"max |difference| = {worst:.4f} (tol 2e-3) at x={where[0]:.3f}, T={where[1]}, l={where[2]}")
    assert ok


# ---------------------------------------------------------------- 7

def test_gradient_finite_differences(report):
    rng = make_rng(7)
    t0 = time.time()
    worst = 0.0
    for _ in range(100):
        n, p, t = int(rng.integers(5, 15)), int(rng.integers(2, 8)), int(rng.integers(1, 4))
        G, Y = rng.normal(size=(n, p)), rng.normal(size=(n, t))
        targets = (
            L21RegressionTarget(Y, G, tau=rng.uniform(0.5, 2), lam=rng.uniform(0, 2)),
            RidgedExampleTarget(Y, G, tau=rng.uniform(0.5, 2), lam=rng.uniform(0, 2), v=rng.uniform(0.1, 2)),
            SpikeSlabTarget(Y[:, :1], G, theta=rng.uniform(0.5, 2), a=rng.uniform(1, 3), K=rng.uniform(0.05, 1)),
        )
        for tg in targets:
            x = rng.normal(size=tg.dims)
            worst = max(worst, fd_gradient_error(tg, x, h=1e-6 * np.linalg.norm(x)))
    secs = time.time() - t0
    ok = worst <= 1e-5 and secs < 5
    report(7, "gradient finite differences", ok, f"max relative error {worst:.2e} (tol 1e-5), {secs:.1f} s")
    assert ok


# ---------------------------------------------------------------- 8

def test_stvs_proximal_identity(report):
    t0 = time.time()
    _, passed, detail = check_stvs_prox(n_cases=60, tol=1e-4, seed=8)
    secs = time.time() - t0
    ok = passed and secs < 5
    report(8, "STVS proximal identity", ok, f"{detail} (tol 1e-4), {secs:.1f} s")
    assert ok


# ---------------------------------------------------------------- 9

def test_spike_slab_sparsity_is_stable(report):
    cfg = ExperimentConfig(model="spike_slab", n=100, p=200, design="correlated", rho=0.3,
                           truth="breiman", omega_star=0.1, theta=1.0, a=2.0, k=0.08,
                           sampler="block_stmala", block_size=20, gamma=0.35, n_iter=100_000,
                           seed=0, oracle=False, save_traces=False)
    t0 = time.time()
    prob = build_problem(cfg)
    means = []
    for r in range(3):
        tr = run_sampler(cfg, prob.target, "block_stmala", r)
        means.append(float(tr.n_active[len(tr.n_active) // 2:].mean()))
    secs = time.time() - t0
    ok = all(10 <= m <= 60 for m in means) and secs < 300
    report(9, "spike-and-slab mean active count", ok,
           f"trailing-half means {', '.join(f'{m:.1f}' for m in means)} (band [10, 60], truth 20), {secs:.0f} s")
    assert ok
