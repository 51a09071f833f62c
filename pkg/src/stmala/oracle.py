"""Brute-force posterior over models for small regression problems (T = 1).

For a mask ``m`` with Gram matrix ``A = G_m' G_m`` the unnormalised model
weight of the L1-penalised Gaussian regression posterior is

    w_m c_lam^-|m| exp(Y' H_m Y / (2 tau)) (2 pi tau)^(|m|/2) det(A)^(-1/2)
        * E[exp(-lam ||x||_1)],   x ~ N(A^-1 G_m' Y, tau A^-1)

with ``H_m`` the hat matrix of the active columns. The expectation is one
when ``lam = 0`` and is estimated by plain Monte Carlo otherwise.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .rng import make_rng
from .sparse_state import mask_to_bitstring
from .targets import log_c_lambda

__all__ = [
    "MAX_P",
    "ModelPosterior",
    "all_masks",
    "enumerate_posterior",
    "activation_probs",
    "activation_error",
]

MAX_P = 20
SINGULAR_RTOL = 1e-10


def all_masks(p: int) -> np.ndarray:
    """Every mask of length ``p``; row ``i`` is the binary expansion of ``i`` (component 1 = lowest bit)."""
    codes = np.arange(2**p, dtype=np.int64)
    return ((codes[:, None] >> np.arange(p)) & 1).astype(bool)


@dataclass
class ModelPosterior:
    masks: np.ndarray
    log_weights: np.ndarray
    probs: np.ndarray
    mc_rel_se: Optional[np.ndarray] = None

    @property
    def p(self) -> int:
        return self.masks.shape[1]

    def prob_se(self) -> np.ndarray:
        """Delta-method standard error of each probability.

        Each model's Monte Carlo factor carries an independent relative
        error; it reaches the other probabilities through the normaliser.
        """
        if self.mc_rel_se is None:
            return np.zeros_like(self.probs)
        pr, r = self.probs, np.nan_to_num(self.mc_rel_se)
        others = np.sum((pr * r) ** 2) - (pr * r) ** 2
        return pr * np.sqrt((r * (1.0 - pr)) ** 2 + others)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mask", "log_weight", "prob"])
            for m, lw, pr in zip(self.masks, self.log_weights, self.probs):
                w.writerow([mask_to_bitstring(m), repr(float(lw)), repr(float(pr))])


def _log_prior_fn(p, prior, omega):
    if prior is None:
        if not 0.0 < omega < 1.0:
            raise ValueError("omega must lie in (0, 1)")
        lo, l1 = math.log(omega), math.log1p(-omega)
        return lambda k: k * lo + (p - k) * l1
    if callable(prior):
        return prior
    arr = np.asarray(prior, dtype=float)
    if arr.shape != (p + 1,):
        raise ValueError("prior table must hold log w_k for k = 0..P")
    return lambda k: float(arr[k])


def _gaussian_part(G, y, idx, tau):
    """Closed-form log integral of the likelihood over the active coefficients, plus the posterior mean and Cholesky factor."""
    if len(idx) == 0:
        return 0.0, None, None
    Gm = G[:, idx]
    A = Gm.T @ Gm
    ev = np.linalg.eigvalsh(A)
    if ev[0] < SINGULAR_RTOL * ev[-1] or ev[-1] <= 0:
        return -np.inf, None, None
    L = np.linalg.cholesky(A)
    b = Gm.T @ y
    w = np.linalg.solve(L, b)
    mean = np.linalg.solve(L.T, w)
    k = len(idx)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    val = float(w @ w) / (2.0 * tau) + 0.5 * k * math.log(2.0 * math.pi * tau) - 0.5 * logdet
    # factor of tau * A^-1 = (L^-T)(L^-1) * tau; draws are mean + sqrt(tau) L^-T xi
    return val, mean, L


def _log_mc_factor(mean, L, tau, lam, n, rng):
    xi = rng.standard_normal((n, len(mean)))
    draws = mean + math.sqrt(tau) * np.linalg.solve(L.T, xi.T).T
    if not np.all(np.isfinite(draws)):
        raise np.linalg.LinAlgError("non-finite draw from the model posterior")
    e = -lam * np.abs(draws).sum(axis=1)
    lm = float(logsumexp(e) - math.log(n))
    if n > 1:
        r = np.exp(e - lm)
        rel_se = float(np.std(r, ddof=1) / math.sqrt(n))
    else:
        rel_se = np.inf
    return lm, rel_se


def enumerate_posterior(
    Y,
    G,
    tau: float = 1.0,
    lam: float = 0.0,
    prior=None,
    mc_samples: int = 10_000,
    seed: int = 0,
    omega: float = 0.1,
    prune_nats: Optional[float] = None,
) -> ModelPosterior:
    """Posterior probability of every mask.

    ``prior`` is a callable ``k -> log w_k`` or a table of length ``P + 1``;
    by default ``w_k = omega^k (1 - omega)^(P - k)``. Masks with a singular
    Gram matrix get zero weight. Each mask's Monte Carlo draws come from
    its own stream of ``seed``, so the result does not depend on evaluation order.

    ``prune_nats`` skips the Monte Carlo step for masks whose ``lam = 0``
    weight (an upper bound) already sits that many nats below the best
    weight seen so far; those masks get zero weight.
    """
    G = np.asarray(G, dtype=float)
    y = np.asarray(Y, dtype=float)
    if y.ndim == 2:
        if y.shape[1] != 1:
            raise ValueError("the oracle only handles T = 1")
        y = y[:, 0]
    if G.ndim != 2 or y.shape != (G.shape[0],):
        raise ValueError("Y and G have inconsistent shapes")
    n_obs, p = G.shape
    if p > MAX_P:
        raise ValueError(f"enumeration limited to P <= {MAX_P}, got {p}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam > 0 and mc_samples < 1:
        raise ValueError("mc_samples must be at least 1 when lambda > 0")

    log_w = _log_prior_fn(p, prior, omega)
    lc = log_c_lambda(1, lam)
    masks = all_masks(p)
    n_models = len(masks)
    bound = np.full(n_models, -np.inf)
    cache = [None] * n_models
    for code in range(n_models):
        idx = np.flatnonzero(masks[code])
        val, mean, L = _gaussian_part(G, y, idx, tau)
        if val == -np.inf:
            continue
        k = len(idx)
        bound[code] = log_w(k) - k * lc + val
        cache[code] = (mean, L)

    log_weights = bound.copy()
    rel_se = np.zeros(n_models)
    if lam > 0:
        best = -np.inf
        for code in np.argsort(-bound, kind="stable"):
            if bound[code] == -np.inf or cache[code][0] is None:
                continue
            if prune_nats is not None and bound[code] < best - prune_nats:
                log_weights[code] = -np.inf
                continue
            mean, L = cache[code]
            lm, rse = _log_mc_factor(mean, L, tau, lam, mc_samples, make_rng(seed, (int(code),)))
            log_weights[code] = bound[code] + lm
            rel_se[code] = rse
            best = max(best, log_weights[code])

    norm = logsumexp(log_weights)
    probs = np.exp(log_weights - norm)
    probs /= probs.sum()
    return ModelPosterior(masks, log_weights, probs, rel_se if lam > 0 else None)


def activation_probs(post: ModelPosterior) -> np.ndarray:
    """Posterior probability that each component is nonzero."""
    return post.probs @ post.masks.astype(float)


def activation_error(trace, exact, burn_in: int = 0) -> float:
    """L1 distance between exact activation probabilities and the chain's frequencies.

    ``burn_in`` drops recorded iterations numbered ``<= burn_in`` (on top of
    any burn-in applied while recording).
    """
    exact = np.asarray(exact, dtype=float)
    keep = trace.iterations > burn_in
    if not np.any(keep):
        raise ValueError("no recorded states after burn-in")
    freq = trace.masks[keep].mean(axis=0)
    if freq.shape != exact.shape:
        raise ValueError("trace and exact probabilities differ in length")
    return float(np.abs(exact - freq).sum())


def write_activation_csv(path, probs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "prob"])
        for i, pr in enumerate(probs):
            w.writerow([i + 1, repr(float(pr))])
