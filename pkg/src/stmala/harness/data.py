"""Synthetic regression problems: designs, true coefficients and noisy responses."""
from __future__ import annotations

import math

import numpy as np

__all__ = ["gen_design", "gen_truth", "gen_observations", "BREIMAN_MIN_P"]

BREIMAN_MIN_P = 155


def gen_design(kind: str, n: int, p: int, rng, rho: float = 0.0) -> np.ndarray:
    """``n x p`` design with i.i.d. N(0, 1) entries (``"iid"``) or AR(1) rows (``"correlated"``).

    Correlated rows have ``cov(G_ij, G_ik) = rho^|j - k|``.
    """
    if n < 1 or p < 1:
        raise ValueError("design dimensions must be positive")
    kind = kind.lower()
    e = rng.standard_normal((n, p))
    if kind == "iid":
        return e
    if kind != "correlated":
        raise ValueError(f"unknown design {kind!r}")
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    g = np.empty((n, p))
    g[:, 0] = e[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        g[:, j] = rho * g[:, j - 1] + s * e[:, j]
    return g


def gen_truth(kind: str, p: int, support: int = 8) -> np.ndarray:
    """True ``p x 1`` coefficients.

    ``"step"``: the first ``support`` entries are one. ``"breiman"``: four
    clusters of five, ``x[50 (k-1) + j] = (-1)^(k+1) j^(1/k)`` (1-based).
    """
    x = np.zeros((p, 1))
    kind = kind.lower()
    if kind == "step":
        if not 0 <= support <= p:
            raise ValueError("support must lie in [0, P]")
        x[:support] = 1.0
    elif kind == "breiman":
        if p < BREIMAN_MIN_P:
            raise ValueError(f"the clustered truth needs P >= {BREIMAN_MIN_P}, got {p}")
        for k in range(1, 5):
            for j in range(1, 6):
                x[50 * (k - 1) + j - 1] = (-1) ** (k + 1) * j ** (1.0 / k)
    else:
        raise ValueError(f"unknown truth {kind!r}")
    return x


def gen_observations(G, X, noise_scale: float, rng) -> np.ndarray:
    """``Y = G X + noise_scale * E`` with ``E`` standard normal."""
    G = np.asarray(G, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if G.shape[1] != X.shape[0]:
        raise ValueError(f"G has {G.shape[1]} columns but X has {X.shape[0]} rows")
    if noise_scale < 0:
        raise ValueError("noise_scale must be nonnegative")
    mean = G @ X
    if noise_scale == 0:
        return mean
    return mean + noise_scale * rng.standard_normal(mean.shape)
