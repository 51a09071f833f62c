"""scikit-learn style wrappers around the samplers.

``fit(G, Y)`` runs one chain on the posterior built from the data; the
fitted estimator exposes the posterior mean as ``coef_``, the activation
frequencies as ``activation_probs_`` and the full ``trace_``.
``predict(G)`` returns ``G @ coef_``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .proposal import ProposalParams
from .rjmcmc import RjParams, run_rjmcmc
from .samplers import ChainConfig, run_chain
from .targets import L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget

__all__ = ["STMALARegressor", "RJMCMCRegressor"]

MODELS = ("l21", "ridged", "spike_slab")


def _check_fit_data(G, Y):
    G, Y = check_X_y(G, Y, multi_output=True, y_numeric=True, dtype=np.float64)
    flat = Y.ndim == 1
    return G, (Y[:, None] if flat else Y), flat


def _check_positive_int(name, value, allow_none=False):
    if value is None and allow_none:
        return
    if not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


class _SamplerRegressor(RegressorMixin, BaseEstimator):
    """Shared target construction, validation and prediction."""

    def _build_target(self, G, Y):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model == "l21":
            return L21RegressionTarget(Y, G, tau=self.tau, lam=self.lam, omega=self.omega)
        if self.model == "ridged":
            return RidgedExampleTarget(Y, G, tau=self.tau, lam=self.lam, v=self.v, omega=self.omega)
        return SpikeSlabTarget(Y, G, theta=self.theta, a=self.a, K=self.K, omega_star=self.omega_star)

    def _store(self, trace, flat, p):
        self.trace_ = trace
        self.n_features_in_ = p
        mean = trace.posterior_mean()
        self.coef_ = mean[:, 0] if flat else mean
        self.activation_probs_ = trace.activation_frequencies()
        self.acceptance_rate_ = trace.acceptance_rate
        self._flat = flat
        return self

    def predict(self, G):
        check_is_fitted(self, "coef_")
        G = check_array(G, dtype=np.float64)
        if G.shape[1] != self.n_features_in_:
            raise ValueError(f"G has {G.shape[1]} features, the model was fitted with {self.n_features_in_}")
        return G @ self.coef_

    def selected_components(self, threshold=0.5):
        """Indices whose activation frequency exceeds ``threshold``."""
        check_is_fitted(self, "activation_probs_")
        return np.flatnonzero(self.activation_probs_ > threshold)


class STMALARegressor(_SamplerRegressor):
    """Sparse Bayesian regression sampled with (block-)STMALA.

    ``sigma=None`` uses the default step size ``sqrt(2 / L)`` of the fitted
    target; ``block_size=None`` updates every row each iteration.
    """

    def __init__(self, model="l21", tau=1.0, lam=1.0, omega=0.1, v=1.0, theta=1.0, a=2.0,
                 K=0.08, omega_star=0.1, operator="stvs", gamma=0.1, sigma=None,
                 truncation=None, atom_method="exact", block_size=None, n_iter=10_000,
                 burn_in=0, thin=1, random_state=0, backend="auto"):
        self.model = model
        self.tau = tau
        self.lam = lam
        self.omega = omega
        self.v = v
        self.theta = theta
        self.a = a
        self.K = K
        self.omega_star = omega_star
        self.operator = operator
        self.gamma = gamma
        self.sigma = sigma
        self.truncation = truncation
        self.atom_method = atom_method
        self.block_size = block_size
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state
        self.backend = backend

    def fit(self, G, Y):
        G, Y, flat = _check_fit_data(G, Y)
        _check_positive_int("n_iter", self.n_iter)
        _check_positive_int("block_size", self.block_size, allow_none=True)
        target = self._build_target(G, Y)
        p = G.shape[1]
        self.sigma_ = self.sigma if self.sigma is not None else target.default_sigma()
        params = ProposalParams(sigma=self.sigma_, gamma=self.gamma, kind=self.operator,
                                truncation=self.truncation, atom_method=self.atom_method)
        block = None if self.block_size is None else min(self.block_size, p)
        cfg = ChainConfig(n_iter=self.n_iter, params=params, burn_in=self.burn_in,
                          block_size=block, thin=self.thin, seed=int(self.random_state or 0))
        trace = run_chain(target, cfg, backend=self.backend)
        return self._store(trace, flat, p)


class RJMCMCRegressor(_SamplerRegressor):
    """The same posterior explored with the reversible-jump baseline."""

    def __init__(self, model="l21", tau=1.0, lam=1.0, omega=0.1, v=1.0, theta=1.0, a=2.0,
                 K=0.08, omega_star=0.1, sigma_rj=0.02, n_iter=10_000, burn_in=0, thin=1,
                 random_state=0, backend="auto"):
        self.model = model
        self.tau = tau
        self.lam = lam
        self.omega = omega
        self.v = v
        self.theta = theta
        self.a = a
        self.K = K
        self.omega_star = omega_star
        self.sigma_rj = sigma_rj
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state
        self.backend = backend

    def fit(self, G, Y):
        G, Y, flat = _check_fit_data(G, Y)
        _check_positive_int("n_iter", self.n_iter)
        target = self._build_target(G, Y)
        trace = run_rjmcmc(target, self.n_iter, RjParams(self.sigma_rj), burn_in=self.burn_in,
                           thin=self.thin, seed=int(self.random_state or 0), backend=self.backend)
        return self._store(trace, flat, G.shape[1])
