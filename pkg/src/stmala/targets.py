"""Posterior densities over row-sparse regression matrices.

Each target is ``pi(x) ∝ exp(-g(x) - gbar(x))`` with respect to the measure
that is Lebesgue on active rows and a Dirac mass at zero on inactive rows.
``g`` is differentiable everywhere and drives the Langevin drift; ``gbar``
holds the non-smooth row penalties and the model prior.

All three targets share a Gaussian linear likelihood ``Y = G x + noise``,
so the log density splits as

    log pi(x) = -precision/2 * ||G x - Y||^2 - sum_i row_term(x_i) + log_model_weight(|m|)

where ``row_term`` vanishes on zero rows. The samplers use that split to
update only the rows they touch.
"""
from __future__ import annotations

import math

import numpy as np

from .sparse_state import SparseState, row_norms, to_dense

__all__ = [
    "c_lambda",
    "log_c_lambda",
    "spectral_norm_sq",
    "L21RegressionTarget",
    "RidgedExampleTarget",
    "SpikeSlabTarget",
]


def log_c_lambda(t: int, lam: float) -> float:
    """Log normaliser of the density ``exp(-lam * ||x||_2)`` on R^t."""
    if t < 1:
        raise ValueError("T must be a positive integer")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        return 0.0
    return (
        math.log(2.0)
        + 0.5 * t * math.log(math.pi)
        + math.lgamma(t)
        - t * math.log(lam)
        - math.lgamma(0.5 * t)
    )


def c_lambda(t: int, lam: float) -> float:
    return math.exp(log_c_lambda(t, lam))


def spectral_norm_sq(G, rtol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of ``G G^T`` by power iteration.

    Raises ``RuntimeError`` when the Rayleigh quotient has not settled to
    ``rtol`` after ``max_iter`` iterations.
    """
    G = np.asarray(G, dtype=float)
    # iterate on the smaller Gram matrix; both share the top eigenvalue
    A = G.T @ G if G.shape[1] <= G.shape[0] else G @ G.T
    if not np.any(A):
        return 0.0
    v = np.random.default_rng(0).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(new - est) <= rtol * abs(new):
            return new
        est = new
    raise RuntimeError(f"power iteration did not converge in {max_iter} iterations")


def _as_2d(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


class _LinearGaussianTarget:
    """Shared machinery for targets with a Gaussian linear likelihood."""

    def __init__(self, Y, G, precision: float):
        self.Y = _as_2d(Y, "Y")
        self.G = _as_2d(G, "G")
        if self.G.shape[0] != self.Y.shape[0]:
            raise ValueError(
                f"G has {self.G.shape[0]} rows but Y has {self.Y.shape[0]}"
            )
        if not precision > 0:
            raise ValueError("noise precision must be positive")
        self.precision = float(precision)
        self.Gt = np.ascontiguousarray(self.G.T)
        self._lipschitz = None

    @property
    def dims(self) -> tuple[int, int]:
        return self.G.shape[1], self.Y.shape[1]

    @property
    def n_obs(self) -> int:
        return self.G.shape[0]

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape != self.dims:
            raise ValueError(f"x has shape {x.shape}, expected {self.dims}")
        return x

    # -- per-row pieces, overridden by the concrete targets -------------------

    def row_terms(self, rows) -> np.ndarray:
        """Contribution of each row to ``-log pi`` outside the likelihood.

        Must be zero for a zero row.
        """
        raise NotImplementedError

    def row_smooth(self, rows) -> np.ndarray:
        return np.zeros(len(rows))

    def row_smooth_grad(self, rows) -> np.ndarray:
        return np.zeros_like(rows)

    def log_model_weight(self, k: int) -> float:
        raise NotImplementedError

    # -- public contract -------------------------------------------------------

    def residual(self, x) -> np.ndarray:
        return self.G @ x - self.Y

    def g_value(self, x) -> float:
        x = self._check_x(x)
        r = self.residual(x)
        return 0.5 * self.precision * float(np.sum(r * r)) + float(
            np.sum(self.row_smooth(x))
        )

    def g_grad(self, x) -> np.ndarray:
        x = self._check_x(x)
        return self.precision * (self.Gt @ self.residual(x)) + self.row_smooth_grad(x)

    def grad_rows(self, x_rows, resid, idx) -> np.ndarray:
        """Rows ``idx`` of the gradient, given the residual ``G x - Y``."""
        return self.precision * (self.Gt[idx] @ resid) + self.row_smooth_grad(x_rows)

    def log_pi_from_residual(self, x, resid) -> float:
        k = int(np.count_nonzero(np.any(x != 0.0, axis=1)))
        return (
            -0.5 * self.precision * float(np.sum(resid * resid))
            - float(np.sum(self.row_terms(x)))
            + self.log_model_weight(k)
        )

    def log_pi_unnorm(self, s: SparseState) -> float:
        if s.p != self.dims[0] or s.t != self.dims[1]:
            raise ValueError(f"state has shape {(s.p, s.t)}, expected {self.dims}")
        x = to_dense(s)
        return self.log_pi_from_residual(x, self.residual(x))

    def log_pi_dense(self, x) -> float:
        x = self._check_x(x)
        return self.log_pi_from_residual(x, self.residual(x))

    def lipschitz_bound(self) -> float:
        if self._lipschitz is None:
            self._lipschitz = self._lipschitz_bound()
        return self._lipschitz

    def _lipschitz_bound(self) -> float:
        return spectral_norm_sq(self.G) * self.precision

    def default_sigma(self) -> float:
        """Step size ``sqrt(2 / L_g)``."""
        return math.sqrt(2.0 / self.lipschitz_bound())


class L21RegressionTarget(_LinearGaussianTarget):
    """Group-sparse regression with an L_{2,1} prior on the active rows.

    ``log pi(x) = -||Y - G x||^2 / (2 tau) - lam ||x||_{2,1}
    + log w_{|m|} - |m| log c_lam``.

    The model prior defaults to ``w_m = omega^|m| (1 - omega)^(P - |m|)``;
    pass ``log_prior`` (a callable of ``|m|``) to override it.
    """

    def __init__(self, Y, G, tau=1.0, lam=0.0, omega=0.1, log_prior=None):
        if not tau > 0:
            raise ValueError("tau must be positive")
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        super().__init__(Y, G, 1.0 / tau)
        self.tau = float(tau)
        self.lam = float(lam)
        self.omega = float(omega)
        if log_prior is None and not 0.0 < omega < 1.0:
            raise ValueError("omega must lie in (0, 1)")
        self.log_prior = log_prior
        self.log_c_lambda = log_c_lambda(self.dims[1], self.lam)

    def log_prior_weight(self, k: int) -> float:
        if self.log_prior is not None:
            return float(self.log_prior(k))
        p = self.dims[0]
        return k * math.log(self.omega) + (p - k) * math.log1p(-self.omega)

    def log_model_weight(self, k: int) -> float:
        return self.log_prior_weight(k) - k * self.log_c_lambda

    def row_terms(self, rows):
        return self.lam * row_norms(rows)


class RidgedExampleTarget(L21RegressionTarget):
    """:class:`L21RegressionTarget` with an extra ``-v ||x||_2^2`` in the log density.

    The ridge term sits in the non-smooth part, so the drift is the same as
    for the plain L21 target.
    """

    def __init__(self, Y, G, tau=1.0, lam=0.0, v=1.0, omega=0.1, log_prior=None):
        if not v > 0:
            raise ValueError("ridge coefficient v must be positive")
        super().__init__(Y, G, tau=tau, lam=lam, omega=omega, log_prior=log_prior)
        self.v = float(v)

    def row_terms(self, rows):
        rows = np.asarray(rows, dtype=float)
        return self.lam * row_norms(rows) + self.v * np.einsum("ij,ij->i", rows, rows)


class SpikeSlabTarget(_LinearGaussianTarget):
    """Spike-and-slab regression with the slab precisions integrated out.

    Each active component carries the heavy-tailed factor
    ``(1 + x^2 / (2 a K))^-(a + 1/2)``, which belongs to the smooth part.
    Components are switched on independently with probability ``omega_star``.

    ``slab_constant=True`` additionally charges every active component the
    normalising constant of that factor, ``Gamma(a+1/2) / (Gamma(a) sqrt(2 pi a K))``,
    which the plain integrated form leaves out.
    """

    def __init__(self, Y, G, theta=1.0, a=2.0, K=0.08, omega_star=0.1, slab_constant=False):
        for name, val in (("theta", theta), ("a", a), ("K", K)):
            if not val > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < omega_star < 1.0:
            raise ValueError("omega_star must lie in (0, 1)")
        super().__init__(Y, G, theta)
        self.theta = float(theta)
        self.a = float(a)
        self.K = float(K)
        self.omega_star = float(omega_star)
        self.slab_constant = bool(slab_constant)
        self._scale = 2.0 * self.a * self.K
        self._log_slab_norm = (
            math.lgamma(self.a + 0.5)
            - math.lgamma(self.a)
            - 0.5 * math.log(math.pi * self._scale)
            if slab_constant
            else 0.0
        )

    def row_smooth(self, rows):
        rows = np.asarray(rows, dtype=float)
        sq = np.einsum("ij,ij->i", rows, rows)
        return (self.a + 0.5) * np.log1p(sq / self._scale)

    def row_smooth_grad(self, rows):
        rows = np.asarray(rows, dtype=float)
        sq = np.einsum("ij,ij->i", rows, rows)
        coef = (self.a + 0.5) * (2.0 / self._scale) / (1.0 + sq / self._scale)
        return coef[:, None] * rows

    def row_terms(self, rows):
        return self.row_smooth(rows)

    def log_model_weight(self, k: int) -> float:
        p = self.dims[0]
        return (
            k * (math.log(self.omega_star) + self._log_slab_norm)
            + (p - k) * math.log1p(-self.omega_star)
        )

    def _lipschitz_bound(self) -> float:
        return spectral_norm_sq(self.G) * self.precision + (self.a + 0.5) / (self.a * self.K)
