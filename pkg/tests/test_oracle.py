import csv
import math

import numpy as np
import pytest
from scipy import integrate

from stmala.oracle import (
    ModelPosterior, activation_error, activation_probs, all_masks, enumerate_posterior,
    write_activation_csv,
)
from stmala.sparse_state import bitstring_to_mask
from stmala.trace import TraceRecorder


def lik(Y, G, x, tau):
    r = Y[:, 0] - G @ x
    return math.exp(-(r @ r) / (2 * tau))


def test_single_component_matches_quadrature():
    n = 12
    G = np.ones((n, 1))
    Y = np.linspace(-0.5, 1.5, n)[:, None]
    tau, omega = 0.7, 0.3
    post = enumerate_posterior(Y, G, tau=tau, lam=0.0, omega=omega)
    w0 = (1 - omega) * lik(Y, G, np.zeros(1), tau)
    w1 = omega * integrate.quad(lambda v: lik(Y, G, np.array([v]), tau), -np.inf, np.inf, epsrel=1e-12)[0]
    np.testing.assert_allclose(post.probs, [w0 / (w0 + w1), w1 / (w0 + w1)], rtol=1e-6)


def test_two_components_match_full_quadrature():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(8, 2))
    Y = G @ np.array([[0.4], [-0.2]]) + rng.normal(size=(8, 1))
    tau, omega = 1.3, 0.4
    post = enumerate_posterior(Y, G, tau=tau, lam=0.0, omega=omega)
    L = 12.0
    f = lambda x: lik(Y, G, x, tau)
    w = np.zeros(4)
    w[0] = (1 - omega) ** 2 * f(np.zeros(2))
    w[1] = omega * (1 - omega) * integrate.quad(lambda a: f(np.array([a, 0.0])), -L, L, epsrel=1e-12)[0]
    w[2] = omega * (1 - omega) * integrate.quad(lambda a: f(np.array([0.0, a])), -L, L, epsrel=1e-12)[0]
    w[3] = omega**2 * integrate.dblquad(lambda b, a: f(np.array([a, b])), -L, L, -L, L,
                                        epsabs=1e-14, epsrel=1e-11)[0]
    np.testing.assert_allclose(post.probs, w / w.sum(), rtol=1e-5)


def test_symmetric_design_gives_equal_probabilities():
    G = np.zeros((4, 2))
    G[0, 0] = G[1, 1] = 1.0
    post = enumerate_posterior(np.zeros((4, 1)), G, lam=0.0, omega=0.5)
    assert post.probs[1] == post.probs[2]
    act = activation_probs(post)
    assert act[0] == act[1]


def test_empty_model_weight_is_prior():
    rng = np.random.default_rng(1)
    G, Y = rng.normal(size=(5, 3)), rng.normal(size=(5, 1))
    post = enumerate_posterior(Y, G, lam=0.0, prior=lambda k: -0.3 * k - 1.0)
    assert post.log_weights[0] == pytest.approx(-1.0)
    table = np.array([-1.0, -1.3, -1.6, -1.9])
    other = enumerate_posterior(Y, G, lam=0.0, prior=table)
    np.testing.assert_allclose(other.probs, post.probs, rtol=1e-12)


def test_probabilities_normalised():
    rng = np.random.default_rng(2)
    G, Y = rng.normal(size=(30, 6)), rng.normal(size=(30, 1))
    post = enumerate_posterior(Y, G, lam=1.0, mc_samples=500)
    assert abs(post.probs.sum() - 1.0) < 1e-12
    assert post.masks.shape == (64, 6)


def test_singular_gram_has_zero_weight():
    rng = np.random.default_rng(3)
    g = rng.normal(size=(6, 1))
    G = np.hstack([g, g, rng.normal(size=(6, 1))])
    post = enumerate_posterior(rng.normal(size=(6, 1)), G, lam=0.0)
    for m, pr in zip(post.masks, post.probs):
        if m[0] and m[1]:
            assert pr == 0.0
    # more active columns than observations is singular too
    post = enumerate_posterior(rng.normal(size=(2, 1)), rng.normal(size=(2, 3)), lam=0.0)
    assert post.probs[-1] == 0.0


def test_guards():
    with pytest.raises(ValueError):
        enumerate_posterior(np.zeros((3, 1)), np.zeros((3, 21)))
    with pytest.raises(ValueError):
        enumerate_posterior(np.zeros((3, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        enumerate_posterior(np.zeros((3, 1)), np.ones((3, 2)), lam=1.0, mc_samples=0)
    with pytest.raises(ValueError):
        enumerate_posterior(np.zeros((3, 1)), np.ones((3, 2)), prior=[0.0, 1.0])


def test_monte_carlo_factor_converges():
    rng = np.random.default_rng(4)
    G = rng.normal(size=(15, 3))
    Y = G @ np.array([[0.5], [0.0], [-0.3]]) + rng.normal(size=(15, 1))
    a = enumerate_posterior(Y, G, lam=1.0, mc_samples=100_000, seed=1)
    b = enumerate_posterior(Y, G, lam=1.0, mc_samples=200_000, seed=2)
    se = np.hypot(a.prob_se(), b.prob_se())
    assert np.all(np.abs(a.probs - b.probs) <= 3 * se + 1e-15)


def test_monte_carlo_factor_against_quadrature():
    # one active component: E exp(-lam |x|) has a closed form via the normal CDF
    G = np.ones((10, 1))
    Y = np.full((10, 1), 0.2)
    tau, lam = 1.0, 2.0
    post = enumerate_posterior(Y, G, tau=tau, lam=lam, mc_samples=400_000, omega=0.5)
    f = lambda v: lik(Y, G, np.array([v]), tau) * math.exp(-lam * abs(v))
    w1 = (integrate.quad(f, -np.inf, 0.0)[0] + integrate.quad(f, 0.0, np.inf)[0]) * lam / 2
    w0 = lik(Y, G, np.zeros(1), tau)
    assert post.probs[1] == pytest.approx(w1 / (w0 + w1), rel=3e-3)


def test_pruning_changes_little():
    rng = np.random.default_rng(5)
    G = rng.normal(size=(40, 8))
    X = np.zeros((8, 1))
    X[:3] = 1.0
    Y = G @ X + rng.normal(size=(40, 1))
    full = enumerate_posterior(Y, G, lam=1.0, mc_samples=300, seed=3)
    pruned = enumerate_posterior(Y, G, lam=1.0, mc_samples=300, seed=3, prune_nats=40.0)
    np.testing.assert_allclose(activation_probs(full), activation_probs(pruned), atol=1e-12)


def test_activation_probs_examples():
    masks = all_masks(3)
    probs = np.zeros(8)
    probs[5] = 1.0
    post = ModelPosterior(masks, np.log(probs + 1e-300), probs)
    np.testing.assert_array_equal(activation_probs(post), masks[5].astype(float))
    uni = ModelPosterior(masks, np.zeros(8), np.full(8, 1 / 8))
    np.testing.assert_allclose(activation_probs(uni), 0.5)


def _trace(masks):
    masks = np.asarray(masks, dtype=bool)
    rec = TraceRecorder(masks.shape[1], 1, len(masks))
    for i, m in enumerate(masks, 1):
        rec.record(i, True, 0.0, m[:, None].astype(float))
    return rec.finish()


def test_activation_error_examples():
    tr = _trace([[1, 0], [1, 1], [0, 1], [1, 1]])
    assert activation_error(tr, [0.75, 0.75]) == 0.0
    assert activation_error(_trace([[0, 1]] * 3), [1.0, 0.0]) == 2.0
    assert activation_error(tr, [1.0, 1.0], burn_in=2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        activation_error(tr, [1.0, 1.0], burn_in=4)


def test_csv_outputs(tmp_path):
    rng = np.random.default_rng(6)
    post = enumerate_posterior(rng.normal(size=(5, 1)), rng.normal(size=(5, 3)), lam=0.0)
    post.to_csv(tmp_path / "o.csv")
    rows = list(csv.reader(open(tmp_path / "o.csv")))
    assert rows[0] == ["mask", "log_weight", "prob"]
    assert len(rows) == 9
    for (bits, lw, pr), m, p in zip(rows[1:], post.masks, post.probs):
        np.testing.assert_array_equal(bitstring_to_mask(bits), m)
        assert float(pr) == p
    write_activation_csv(tmp_path / "a.csv", activation_probs(post))
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == ["component", "prob"] and rows[1][0] == "1"
