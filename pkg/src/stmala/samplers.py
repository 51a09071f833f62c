"""STMALA and block-STMALA Markov chains.

The hot loop works on a dense copy of the state together with the residual
``G x - Y``; a block move touching rows ``b`` only needs ``G[:, b]`` to
update the residual and the gradient rows it uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import apply_operator
from .proposal import LOG_ZERO, ProposalParams, log_q, log_rows, truncated_gradient
from .rng import make_rng
from .sparse_state import SparseState, from_dense, to_dense
from .trace import ChainTrace, TraceRecorder

__all__ = [
    "NumericalError",
    "ChainConfig",
    "log_accept_ratio",
    "stmala_step",
    "block_stmala_step",
    "run_chain",
]

_CHUNK = 2048
_REFRESH = 4096


class NumericalError(ArithmeticError):
    """The acceptance ratio could not be formed."""


@dataclass(frozen=True)
class ChainConfig:
    """Length, burn-in, thinning, block size and seed of one chain.

    ``block_size=None`` updates every row each iteration.
    """

    n_iter: int
    params: object
    burn_in: int = 0
    block_size: Optional[int] = None
    thin: int = 1
    seed: int = 0
    stream: tuple = field(default=())

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be positive")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be positive")

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed, self.stream)


def log_accept_ratio(target, params: ProposalParams, x, z, mu_x, mu_z, block=None) -> float:
    """``log pi(z) + log q(z -> x) - log pi(x) - log q(x -> z)``, unclamped.

    With ``block`` given, the proposal densities only involve those rows
    (``mu_x`` and ``mu_z`` may then be either full drifts or block rows).
    """
    xd = to_dense(x) if isinstance(x, SparseState) else np.asarray(x, dtype=float)
    zd = to_dense(z) if isinstance(z, SparseState) else np.asarray(z, dtype=float)
    mu_x = np.asarray(mu_x, dtype=float)
    mu_z = np.asarray(mu_z, dtype=float)
    if block is not None:
        b = np.asarray(block)
        if mu_x.shape[0] != len(b):
            mu_x = mu_x[b]
        if mu_z.shape[0] != len(b):
            mu_z = mu_z[b]
        fwd = log_q(params, mu_x, zd[b])
        rev = log_q(params, mu_z, xd[b])
    else:
        fwd = log_q(params, mu_x, zd)
        rev = log_q(params, mu_z, xd)
    if fwd == LOG_ZERO:
        raise NumericalError("forward proposal density is zero at the candidate")
    # grouped as differences so that z == x gives exactly zero
    return (target.log_pi_dense(zd) - target.log_pi_dense(xd)) + (rev - fwd)


class _Workspace:
    """Mutable dense chain state plus cached residual, log density and gradient."""

    def __init__(self, target, x):
        self.target = target
        self.x = np.array(x, dtype=float)
        self.refresh()

    def refresh(self):
        self.resid = self.target.residual(self.x)
        self.log_pi = self.target.log_pi_from_residual(self.x, self.resid)
        self.k = int(np.count_nonzero(np.any(self.x != 0.0, axis=1)))
        self.full_grad = None


def _block_update(ws: _Workspace, params: ProposalParams, b, xi, log_u) -> bool:
    """One Metropolis-Hastings move on rows ``b``; mutates ``ws`` on acceptance."""
    target = ws.target
    half_s2 = 0.5 * params.sigma**2
    full = len(b) == ws.x.shape[0]
    x_b = ws.x[b]
    if full and ws.full_grad is not None:
        gx = ws.full_grad
    else:
        gx = target.grad_rows(x_b, ws.resid, b)
    mu_x = x_b - half_s2 * truncated_gradient(gx, params.truncation)
    z_b = apply_operator(params.kind, params.gamma, mu_x + params.sigma * xi)

    dz = z_b - x_b
    resid_z = ws.resid + target.Gt[b].T @ dz
    gz = target.grad_rows(z_b, resid_z, b)
    mu_z = z_b - half_s2 * truncated_gradient(gz, params.truncation)

    log_fwd = log_rows(params, mu_x, z_b)
    if log_fwd == LOG_ZERO:
        raise NumericalError("forward proposal density is zero at the sampled candidate")
    log_rev = log_rows(params, mu_z, x_b)

    act_x = np.any(x_b != 0.0, axis=1)
    act_z = np.any(z_b != 0.0, axis=1)
    k_z = ws.k + int(act_z.sum()) - int(act_x.sum())
    d_log_pi = (
        -0.5 * target.precision * (float(resid_z.ravel() @ resid_z.ravel()) - float(ws.resid.ravel() @ ws.resid.ravel()))
        - float(np.sum(target.row_terms(z_b)) - np.sum(target.row_terms(x_b)))
        + target.log_model_weight(k_z)
        - target.log_model_weight(ws.k)
    )
    ratio = d_log_pi + log_rev - log_fwd
    if math.isnan(ratio):
        raise NumericalError("acceptance ratio is NaN")
    if log_u < min(0.0, ratio):
        ws.x[b] = z_b
        ws.resid = resid_z
        ws.log_pi += d_log_pi
        ws.k = k_z
        if full:
            ws.full_grad = gz
        return True
    if full:
        ws.full_grad = gx
    return False


def _draw_block(p: int, eta: int, u) -> np.ndarray:
    """First ``eta`` entries of a partial Fisher-Yates shuffle of ``range(p)``."""
    perm = np.arange(p)
    for i in range(eta):
        j = i + int(u[i] * (p - i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:eta]


def _log_uniform(rng) -> float:
    # 1 - U lies in (0, 1], so the log is finite
    return math.log1p(-rng.random())


def block_stmala_step(target, params: ProposalParams, eta: int, x, rng):
    """One block-STMALA iteration; returns ``(x_next, accepted, block)``."""
    p, t = target.dims
    if not 1 <= eta <= p:
        raise ValueError(f"block size must lie in [1, {p}]")
    xd = to_dense(x) if isinstance(x, SparseState) else np.asarray(x, dtype=float).reshape(p, t)
    b = _draw_block(p, eta, rng.random(eta)) if eta < p else np.arange(p)
    xi = rng.standard_normal((eta, t))
    ws = _Workspace(target, xd)
    accepted = _block_update(ws, params, b, xi, _log_uniform(rng))
    return from_dense(ws.x), accepted, np.sort(b)


def stmala_step(target, params: ProposalParams, x, rng):
    """One full STMALA iteration; returns ``(x_next, accepted)``."""
    x_next, accepted, _ = block_stmala_step(target, params, target.dims[0], x, rng)
    return x_next, accepted


def _fast_spec(target, params):
    """Arguments for the compiled kernel, or None when it does not apply."""
    from .targets import L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget
    from . import _fastpath

    p, t = target.dims
    johnson = params.atom_method == "johnson"
    if t != 1 and not johnson:
        return None
    if isinstance(target, SpikeSlabTarget):
        kind, c1, c2 = _fastpath.TARGET_SLAB, target.a + 0.5, 2.0 * target.a * target.K
    elif isinstance(target, RidgedExampleTarget):
        kind, c1, c2 = _fastpath.TARGET_PENALTY, target.lam, target.v
    elif type(target) is L21RegressionTarget:
        kind, c1, c2 = _fastpath.TARGET_PENALTY, target.lam, 0.0
    else:
        return None
    log_w = np.array([target.log_model_weight(k) for k in range(p + 1)])
    return dict(
        kind=kind, c1=float(c1), c2=float(c2), log_w=log_w,
        op=_fastpath.OP_CODES[params.kind],
        radius=-1.0 if params.truncation is None else float(params.truncation),
        johnson=johnson,
    )


def run_chain(target, config: ChainConfig, rng=None, x0=None, backend: str = "auto") -> ChainTrace:
    """Run (block-)STMALA from ``x0`` (default: the zero matrix).

    Random numbers are drawn in fixed-size chunks from ``rng`` (default: the
    stream named by ``config``), so a given seed always yields the same trace.
    ``backend`` selects the compiled kernel (``"numba"``), the numpy
    reference loop (``"numpy"``) or the kernel whenever it applies (``"auto"``).
    """
    params = config.params
    if not isinstance(params, ProposalParams):
        raise TypeError("run_chain needs ProposalParams; use run_rjmcmc for reversible jump")
    if backend not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    p, t = target.dims
    eta = p if config.block_size is None else config.block_size
    if eta > p:
        raise ValueError(f"block size {eta} exceeds P={p}")
    if rng is None:
        rng = config.rng()
    if x0 is None:
        x = np.zeros((p, t))
    elif isinstance(x0, SparseState):
        x = to_dense(x0)
    else:
        x = np.array(x0, dtype=float).reshape(p, t)
    fast = _fast_spec(target, params) if backend != "numpy" else None
    if backend == "numba" and fast is None:
        raise ValueError("the compiled kernel does not support this target/atom method")

    ws = _Workspace(target, x)
    rec = TraceRecorder(p, t, config.n_iter, config.burn_in, config.thin)
    full_block = np.arange(p)
    if fast is not None:
        from ._fastpath import run_block_chunk

        xs = np.empty((_CHUNK, p, t))
        acc = np.empty(_CHUNK, dtype=np.bool_)
        lp = np.empty(_CHUNK)

    it = 0
    while it < config.n_iter:
        n = min(_CHUNK, config.n_iter - it)
        block_u = rng.random((n, eta)) if eta < p else np.zeros((n, 0))
        noise = rng.standard_normal((n, eta, t))
        log_u = np.log1p(-rng.random(n))
        if fast is not None:
            ws.log_pi, ws.k, status = run_block_chunk(
                target.Gt, ws.x, ws.resid, ws.log_pi, ws.k, target.precision,
                fast["kind"], fast["c1"], fast["c2"], fast["log_w"],
                fast["op"], params.sigma, params.gamma, fast["radius"], fast["johnson"],
                block_u, noise, log_u, xs, acc, lp,
            )
            if status == 1:
                raise NumericalError("forward proposal density is zero at the sampled candidate")
            if status == 2:
                raise NumericalError("acceptance ratio is NaN")
            rec.record_chunk(it, acc[:n], lp[:n], xs[:n])
            it += n
            if it % _REFRESH == 0:
                ws.refresh()
            continue
        for k in range(n):
            it += 1
            b = _draw_block(p, eta, block_u[k]) if eta < p else full_block
            a = _block_update(ws, params, b, noise[k], log_u[k])
            rec.n_accepted += a
            if it % _REFRESH == 0:
                ws.refresh()
            if rec.wants(it):
                rec.record(it, a, ws.log_pi, ws.x)
    return rec.finish(meta={
        "sampler": "stmala", "block_size": eta, "kind": params.kind.value,
        "backend": "numba" if fast is not None else "numpy",
    })
