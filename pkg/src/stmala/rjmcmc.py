"""Reversible-jump baseline: add, delete, swap or perturb active rows.

Each iteration picks one of four strategies uniformly (only ``add`` from
the empty model, only ``delete`` from the full one), then a target mask
uniformly among those the strategy can reach. New rows are drawn from
``N(0, sigma_rj^2 I_T)``; the dimension-matching map is the identity, so no
Jacobian enters the acceptance ratio.

Every iteration consumes four uniforms and a P x T block of standard
normals, laid out the same way in the step function and the chain driver.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rng import make_rng
from .samplers import NumericalError, _Workspace, _CHUNK, _REFRESH
from .sparse_state import SparseState, from_dense, to_dense
from .trace import ChainTrace, TraceRecorder

__all__ = ["Move", "RjParams", "sample_move", "log_j", "log_rj_ratio", "rjmcmc_step", "run_rjmcmc"]


class Move(enum.IntEnum):
    ADD = 0
    DELETE = 1
    SWAP = 2
    STAY = 3


@dataclass(frozen=True)
class RjParams:
    sigma_rj: float

    def __post_init__(self):
        if not self.sigma_rj > 0:
            raise ValueError("sigma_rj must be positive")


def _choose(mask, u0, u1, u2):
    """Strategy plus removed/inserted indices from three uniforms."""
    mask = np.asarray(mask, dtype=bool)
    p = mask.shape[0]
    active = np.flatnonzero(mask)
    inactive = np.flatnonzero(~mask)
    k = len(active)
    if k == 0:
        move = Move.ADD
    elif k == p:
        move = Move.DELETE
    else:
        move = Move(int(u0 * 4))
    removed = inserted = -1
    if move is Move.ADD:
        inserted = int(inactive[int(u1 * (p - k))])
    elif move is Move.DELETE:
        removed = int(active[int(u1 * k)])
    elif move is Move.SWAP:
        removed = int(active[int(u1 * k)])
        inserted = int(inactive[int(u2 * (p - k))])
    return move, removed, inserted


def sample_move(mask, rng):
    """Draw a strategy and the proposed mask; returns ``(move, next_mask)``."""
    u = rng.random(3)
    move, removed, inserted = _choose(mask, *u)
    nxt = np.array(mask, dtype=bool)
    if removed >= 0:
        nxt[removed] = False
    if inserted >= 0:
        nxt[inserted] = True
    return move, nxt


def log_j(mask, next_mask) -> float:
    """Log probability that one move proposes ``next_mask`` from ``mask``."""
    m = np.asarray(mask, dtype=bool)
    n = np.asarray(next_mask, dtype=bool)
    if m.shape != n.shape:
        raise ValueError("masks differ in length")
    p, k = m.shape[0], int(m.sum())
    gained = int(np.sum(n & ~m))
    lost = int(np.sum(m & ~n))
    edge = k == 0 or k == p
    if gained == 0 and lost == 0:
        if edge:
            raise ValueError("stay move is not available from the empty or full model")
        return math.log(0.25)
    if gained == 1 and lost == 0:
        return (0.0 if k == 0 else math.log(0.25)) - math.log(p - k)
    if gained == 0 and lost == 1:
        return (0.0 if k == p else math.log(0.25)) - math.log(k)
    if gained == 1 and lost == 1 and not edge:
        return math.log(0.25) - math.log(k * (p - k))
    return _unreachable()


def _unreachable():
    raise ValueError("masks are not one reversible-jump move apart")


def _log_q_row(row, sigma) -> float:
    t = row.shape[0]
    return -0.5 * t * math.log(2.0 * math.pi * sigma**2) - float(row @ row) / (2.0 * sigma**2)


def _fresh_row(noise, start):
    """First nonzero row of ``noise`` from ``start`` on (cyclically)."""
    p = noise.shape[0]
    for r in range(p):
        row = noise[(start + r) % p]
        if np.any(row != 0.0):
            return row
    raise NumericalError("no nonzero Gaussian draw available")


def log_rj_ratio(target, x, x_next, sigma_rj: float) -> float:
    """Log acceptance ratio of the move ``x -> x_next``, unclamped.

    The strategy is read off the two masks. Rows that appear (disappear)
    are the dimension-matching draws ``u`` (``u'``); an unchanged mask is
    a perturbation whose symmetric increment density cancels.
    """
    x = to_dense(x) if isinstance(x, SparseState) else np.asarray(x, dtype=float)
    xn = to_dense(x_next) if isinstance(x_next, SparseState) else np.asarray(x_next, dtype=float)
    m = np.any(x != 0.0, axis=1)
    mn = np.any(xn != 0.0, axis=1)
    log_qu = sum(_log_q_row(xn[i], sigma_rj) for i in np.flatnonzero(mn & ~m))
    log_qu_prime = sum(_log_q_row(x[i], sigma_rj) for i in np.flatnonzero(m & ~mn))
    return (
        target.log_pi_dense(xn) - target.log_pi_dense(x)
        + log_j(mn, m) - log_j(m, mn)
        + log_qu_prime - log_qu
    )


def _rj_update(ws: _Workspace, params: RjParams, u, noise) -> bool:
    target = ws.target
    x = ws.x
    p = x.shape[0]
    sig = params.sigma_rj
    mask = np.any(x != 0.0, axis=1)
    move, removed, inserted = _choose(mask, u[0], u[1], u[2])

    xn = x.copy()
    log_qu = log_qu_prime = 0.0
    if move is Move.STAY:
        act = np.flatnonzero(mask)
        xn[act] = x[act] + sig * noise[: len(act)]
        # a perturbed row that hits exactly zero would leave the stratum
        if np.any(~np.any(xn[act] != 0.0, axis=1)):
            return False
    else:
        if removed >= 0:
            log_qu_prime = _log_q_row(x[removed], sig)
            xn[removed] = 0.0
        if inserted >= 0:
            row = sig * _fresh_row(noise, 0)
            log_qu = _log_q_row(row, sig)
            xn[inserted] = row

    changed = np.flatnonzero(np.any(xn != x, axis=1))
    resid_n = ws.resid + target.Gt[changed].T @ (xn[changed] - x[changed])
    k_n = int(np.count_nonzero(np.any(xn != 0.0, axis=1)))
    d_log_pi = (
        -0.5 * target.precision * (float(resid_n.ravel() @ resid_n.ravel()) - float(ws.resid.ravel() @ ws.resid.ravel()))
        - float(np.sum(target.row_terms(xn[changed])) - np.sum(target.row_terms(x[changed])))
        + target.log_model_weight(k_n)
        - target.log_model_weight(ws.k)
    )
    mask_n = np.any(xn != 0.0, axis=1)
    ratio = d_log_pi + log_j(mask_n, mask) - log_j(mask, mask_n) + log_qu_prime - log_qu
    if math.isnan(ratio):
        raise NumericalError("acceptance ratio is NaN")
    if math.log1p(-u[3]) < min(0.0, ratio):
        ws.x = xn
        ws.resid = resid_n
        ws.log_pi += d_log_pi
        ws.k = k_n
        return True
    return False


def rjmcmc_step(target, params: RjParams, x, rng):
    """One reversible-jump iteration; returns ``(x_next, accepted)``."""
    p, t = target.dims
    xd = to_dense(x) if isinstance(x, SparseState) else np.asarray(x, dtype=float).reshape(p, t)
    u = rng.random(4)
    noise = rng.standard_normal((p, t))
    ws = _Workspace(target, xd)
    accepted = _rj_update(ws, params, u, noise)
    return from_dense(ws.x), accepted


def _fast_spec(target):
    from .samplers import _fast_spec as stmala_spec
    from .proposal import ProposalParams

    # reuse the target description; the proposal fields are irrelevant here
    return stmala_spec(target, ProposalParams(sigma=1.0, gamma=1.0, atom_method="johnson"))


def run_rjmcmc(target, n_iter, params: RjParams, burn_in=0, thin=1, seed=0, stream=(),
               rng=None, x0=None, backend="auto") -> ChainTrace:
    """Run the reversible-jump chain from ``x0`` (default: the zero matrix)."""
    if backend not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    p, t = target.dims
    if rng is None:
        rng = make_rng(seed, stream)
    if x0 is None:
        x = np.zeros((p, t))
    elif isinstance(x0, SparseState):
        x = to_dense(x0)
    else:
        x = np.array(x0, dtype=float).reshape(p, t)
    fast = _fast_spec(target) if backend != "numpy" else None
    if backend == "numba" and fast is None:
        raise ValueError("the compiled kernel does not support this target")

    ws = _Workspace(target, x)
    rec = TraceRecorder(p, t, n_iter, burn_in, thin)
    if fast is not None:
        from ._fastpath import run_rj_chunk

        xs = np.empty((_CHUNK, p, t))
        acc = np.empty(_CHUNK, dtype=np.bool_)
        lp = np.empty(_CHUNK)
    it = 0
    while it < n_iter:
        n = min(_CHUNK, n_iter - it)
        unif = rng.random((n, 4))
        noise = rng.standard_normal((n, p, t))
        if fast is not None:
            ws.log_pi, ws.k, status = run_rj_chunk(
                target.Gt, ws.x, ws.resid, ws.log_pi, ws.k, target.precision,
                fast["kind"], fast["c1"], fast["c2"], fast["log_w"], params.sigma_rj,
                unif, noise, xs, acc, lp,
            )
            if status:
                raise NumericalError("acceptance ratio is NaN")
            rec.record_chunk(it, acc[:n], lp[:n], xs[:n])
            it += n
            if it % _REFRESH == 0:
                ws.refresh()
            continue
        for k in range(n):
            it += 1
            a = _rj_update(ws, params, unif[k], noise[k])
            rec.n_accepted += a
            if it % _REFRESH == 0:
                ws.refresh()
            if rec.wants(it):
                rec.record(it, a, ws.log_pi, ws.x)
    return rec.finish(meta={"sampler": "rjmcmc", "sigma_rj": params.sigma_rj,
                            "backend": "numba" if fast is not None else "numpy"})
