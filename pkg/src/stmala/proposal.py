"""The shrinkage-thresholding Langevin proposal and its exact density.

A candidate is ``Z = Psi(mu(x) + sigma * xi)`` with ``mu`` the (optionally
gradient-truncated) Langevin drift. Row by row, ``Z`` is zero with the atom
probability ``p(mu_i) = P(||mu_i + sigma xi_i|| <= gamma)`` and otherwise
has a density on R^T that depends on the operator. ``log_q`` sums these
per-row log terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .operators import OperatorKind, apply_operator
from .sparse_state import SparseState, from_dense, row_norms, to_dense

__all__ = [
    "LOG_ZERO",
    "ProposalParams",
    "drift",
    "truncated_gradient",
    "atom_prob",
    "log_atom_probs",
    "ncx2_cdf_series",
    "ncx2_cdf_johnson",
    "log_row_density",
    "log_row_densities",
    "log_q",
    "sample_candidate",
]

# log of a zero density; any Metropolis test treats it as certain rejection
LOG_ZERO = -math.inf

_POISSON_TAIL = 1e-12


@dataclass(frozen=True)
class ProposalParams:
    """Step size, threshold, operator and optional gradient truncation radius."""

    sigma: float
    gamma: float
    kind: OperatorKind = OperatorKind.STVS
    truncation: Optional[float] = None
    atom_method: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind.parse(self.kind))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.truncation is not None and not self.truncation > 0:
            raise ValueError("truncation radius must be positive")
        method = str(self.atom_method).lower()
        if method not in ("exact", "johnson"):
            raise ValueError(f"atom_method must be 'exact' or 'johnson', got {self.atom_method!r}")
        object.__setattr__(self, "atom_method", method)


def truncated_gradient(grad, radius: Optional[float]) -> np.ndarray:
    """Rescale ``grad`` so its Frobenius norm is at most ``radius``."""
    if radius is None:
        return grad
    nrm = math.sqrt(float(np.sum(grad * grad)))
    if nrm <= radius:
        return grad
    return grad * (radius / nrm)


def drift(target, params: ProposalParams, x) -> np.ndarray:
    """Langevin drift ``x - sigma^2/2 * grad g(x)``, gradient truncated if requested."""
    if isinstance(x, SparseState):
        x = to_dense(x)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    grad = truncated_gradient(target.g_grad(x), params.truncation)
    return x - 0.5 * params.sigma**2 * grad


# -- atom probability -----------------------------------------------------------


def ncx2_cdf_series(x: float, df: int, nc: float) -> float:
    """Noncentral chi-squared CDF as a Poisson mixture of central CDFs.

    Terms are summed on a window around the Poisson mode, widened until the
    Poisson mass left outside is below 1e-12.
    """
    if x <= 0:
        return 0.0
    if nc <= 0:
        return float(special.gammainc(0.5 * df, 0.5 * x))
    mu = 0.5 * nc
    mode = int(math.floor(mu))
    half = int(math.ceil(10.0 + 8.0 * math.sqrt(mu)))
    while True:
        lo = max(0, mode - half)
        hi = mode + half
        j = np.arange(lo, hi + 1, dtype=float)
        logw = j * math.log(mu) - mu - special.gammaln(j + 1.0)
        w = np.exp(logw)
        if 1.0 - w.sum() < _POISSON_TAIL or half > 1_000_000:
            break
        half *= 2
    val = float(np.dot(w, special.gammainc(0.5 * df + j, 0.5 * x)))
    return min(1.0, max(0.0, val))


def ncx2_cdf_johnson(x: float, df: int, nc: float) -> float:
    """Closed-form normal approximation to the noncentral chi-squared CDF."""
    if x <= 0:
        return 0.0
    k, lam = float(df), float(nc)
    h = 1.0 - (2.0 / 3.0) * (k + lam) * (k + 3.0 * lam) / (k + 2.0 * lam) ** 2
    p = (k + 2.0 * lam) / (k + lam) ** 2
    m = (h - 1.0) * (1.0 - 3.0 * h)
    num = x**h * (k + lam) ** (-h) - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p))
    den = h * math.sqrt(2.0 * p * (1.0 + m * p))
    return min(1.0, max(0.0, float(special.ndtr(num / den))))


def _log_interval_prob_1d(c: np.ndarray, sigma: float, gamma: float) -> np.ndarray:
    """log P(|c + sigma xi| <= gamma) for scalar rows, stable in both tails."""
    a = (gamma - c) / sigma  # upper end, standardised
    b = (-gamma - c) / sigma  # lower end
    # reflect so the interval sits on the side where ndtr loses no digits
    flip = (a + b) > 0
    hi = np.where(flip, -b, a)
    lo = np.where(flip, -a, b)
    log_hi = special.log_ndtr(hi)
    log_lo = special.log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return log_hi + np.log1p(-np.exp(log_lo - log_hi))


def log_atom_probs(C, sigma: float, gamma: float, method: str = "exact") -> np.ndarray:
    """Log atom probability for each row of ``C``."""
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[None, :]
    t = C.shape[1]
    if C.shape[0] == 0:
        return np.zeros(0)
    if method == "exact" and t == 1:
        return _log_interval_prob_1d(C[:, 0], sigma, gamma)
    x = (gamma / sigma) ** 2
    nc = np.einsum("ij,ij->i", C, C) / sigma**2
    cdf = ncx2_cdf_series if method == "exact" else ncx2_cdf_johnson
    with np.errstate(divide="ignore"):
        return np.log(np.array([cdf(x, t, v) for v in nc]))


def atom_prob(c, sigma: float, gamma: float, method: str = "exact") -> float:
    """Probability that row ``c`` plus N(0, sigma^2 I) noise lands in the gamma-ball."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not gamma > 0:
        return 0.0
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return float(np.exp(log_atom_probs(c[None, :], sigma, gamma, method.lower())[0]))


# -- continuous part --------------------------------------------------------------


def log_row_densities(kind, sigma: float, gamma: float, C, Z) -> np.ndarray:
    """Log density of each nonzero candidate row ``Z[i]`` given drift row ``C[i]``."""
    kind = OperatorKind.parse(kind)
    C = np.asarray(C, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z, C = Z[None, :], np.atleast_2d(C)
    t = Z.shape[1]
    nz = row_norms(Z)
    if np.any(nz == 0.0):
        raise ValueError("row density is only defined for nonzero rows")
    const = -0.5 * t * math.log(2.0 * math.pi * sigma**2)
    if kind is OperatorKind.PROX:
        s = 1.0 + gamma / nz
        pre = s[:, None] * Z - C
        return (
            const
            - np.einsum("ij,ij->i", pre, pre) / (2.0 * sigma**2)
            + (t - 1) * np.log(s)
        )
    if kind is OperatorKind.HARD:
        d = Z - C
        out = const - np.einsum("ij,ij->i", d, d) / (2.0 * sigma**2)
        return np.where(nz > gamma, out, LOG_ZERO)
    r = (gamma / nz) ** 2
    s = 1.0 + 2.0 * r / (1.0 + np.sqrt(1.0 + 4.0 * r))
    pre = s[:, None] * Z - C
    return (
        const
        + t * np.log(s)
        - 0.5 * np.log1p(4.0 * r)
        - np.einsum("ij,ij->i", pre, pre) / (2.0 * sigma**2)
    )


def log_row_density(kind, sigma: float, gamma: float, c, z) -> float:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return float(log_row_densities(kind, sigma, gamma, c[None, :], z[None, :])[0])


def log_rows(params: ProposalParams, mu, z) -> float:
    """Summed log proposal density of candidate rows ``z`` around drift rows ``mu``."""
    active = np.any(z != 0.0, axis=1)
    total = 0.0
    if not np.all(active):
        total += float(
            np.sum(log_atom_probs(mu[~active], params.sigma, params.gamma, params.atom_method))
        )
    if np.any(active):
        total += float(
            np.sum(log_row_densities(params.kind, params.sigma, params.gamma, mu[active], z[active]))
        )
    return total


def log_q(params: ProposalParams, mu, z) -> float:
    """Log density of proposing ``z`` from a state whose drift is ``mu``.

    ``mu`` is the already-drifted P x T matrix; ``z`` a :class:`SparseState`
    or dense matrix. Returns ``LOG_ZERO`` when ``z`` is outside the support.
    """
    if isinstance(z, SparseState):
        z = to_dense(z)
    z = np.asarray(z, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if mu.ndim == 1:
        mu = mu[:, None]
    if mu.shape != z.shape:
        raise ValueError(f"drift shape {mu.shape} does not match candidate {z.shape}")
    return log_rows(params, mu, z)


def sample_candidate(target, params: ProposalParams, x, rng):
    """Draw ``Z = Psi(mu(x) + sigma xi)``; returns ``(Z, mu(x))``."""
    if isinstance(x, SparseState):
        x = to_dense(x)
    mu = drift(target, params, x)
    u = mu + params.sigma * rng.standard_normal(mu.shape)
    z = apply_operator(params.kind, params.gamma, u)
    return from_dense(z), mu
