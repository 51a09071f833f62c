"""Compiled inner loop for (block-)STMALA on the linear-Gaussian targets.

Mirrors ``samplers._block_update`` operation for operation; the test suite
checks that both produce the same chain from the same random draws. Only
used when the atom probability has a closed form here (T = 1, or the
normal approximation); otherwise the numpy path runs.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .operators import OperatorKind

OP_CODES = {OperatorKind.PROX: 0, OperatorKind.HARD: 1, OperatorKind.STVS: 2}
TARGET_PENALTY = 0  # row term lam*||x|| + v*||x||^2, no smooth row part
TARGET_SLAB = 1  # smooth row term (a+1/2) log1p(||x||^2 / scale)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT1_2 = 1.0 / math.sqrt(2.0)


@njit(cache=True)
def _log_ndtr(x):
    if x > -20.0:
        return math.log(0.5 * math.erfc(-x * _SQRT1_2))
    # asymptotic expansion of the Mills ratio
    x2 = x * x
    s = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2)
    return -0.5 * x2 - math.log(-x) - _LOG_SQRT_2PI + math.log(s)


@njit(cache=True)
def _log_atom_1d(c, sigma, gamma):
    a = (gamma - c) / sigma
    b = (-gamma - c) / sigma
    if a + b > 0.0:
        hi = -b
        lo = -a
    else:
        hi = a
        lo = b
    lh = _log_ndtr(hi)
    ll = _log_ndtr(lo)
    d = math.exp(ll - lh)
    if d >= 1.0:
        return -math.inf
    return lh + math.log1p(-d)


@njit(cache=True)
def _log_atom_johnson(nc, t, x):
    k = float(t)
    lam = nc
    h = 1.0 - (2.0 / 3.0) * (k + lam) * (k + 3.0 * lam) / ((k + 2.0 * lam) ** 2)
    p = (k + 2.0 * lam) / ((k + lam) ** 2)
    m = (h - 1.0) * (1.0 - 3.0 * h)
    num = x**h * (k + lam) ** (-h) - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p))
    den = h * math.sqrt(2.0 * p * (1.0 + m * p))
    cdf = 0.5 * math.erfc(-(num / den) * _SQRT1_2)
    if cdf <= 0.0:
        return -math.inf
    if cdf >= 1.0:
        return 0.0
    return math.log(cdf)


@njit(cache=True)
def _log_rows(op, sigma, gamma, johnson, mu, z):
    """Summed log proposal density; mirrors ``proposal.log_rows``."""
    n, t = z.shape
    const = -0.5 * t * math.log(2.0 * math.pi * sigma * sigma)
    total = 0.0
    for i in range(n):
        nz2 = 0.0
        for j in range(t):
            nz2 += z[i, j] * z[i, j]
        if nz2 == 0.0:
            if johnson:
                nc = 0.0
                for j in range(t):
                    nc += mu[i, j] * mu[i, j]
                total += _log_atom_johnson(nc / (sigma * sigma), t, (gamma / sigma) ** 2)
            else:
                total += _log_atom_1d(mu[i, 0], sigma, gamma)
            continue
        nz = math.sqrt(nz2)
        if op == 0:
            s = 1.0 + gamma / nz
            extra = (t - 1) * math.log(s)
        elif op == 1:
            if not nz > gamma:
                return -math.inf
            s = 1.0
            extra = 0.0
        else:
            r = gamma * gamma / nz2
            s = 1.0 + 2.0 * r / (1.0 + math.sqrt(1.0 + 4.0 * r))
            extra = t * math.log(s) - 0.5 * math.log1p(4.0 * r)
        sq = 0.0
        for j in range(t):
            d = s * z[i, j] - mu[i, j]
            sq += d * d
        total += const + extra - sq / (2.0 * sigma * sigma)
    return total


@njit(cache=True)
def _row_term(kind, c1, c2, row):
    sq = 0.0
    for j in range(row.shape[0]):
        sq += row[j] * row[j]
    if kind == TARGET_PENALTY:
        return c1 * math.sqrt(sq) + c2 * sq
    return c1 * math.log1p(sq / c2)


@njit(cache=True)
def _grad_rows(Gt, resid, prec, kind, c1, c2, b, xb, out):
    eta, t = xb.shape
    n = resid.shape[0]
    for r in range(eta):
        i = b[r]
        for j in range(t):
            acc = 0.0
            for k in range(n):
                acc += Gt[i, k] * resid[k, j]
            out[r, j] = prec * acc
        if kind == TARGET_SLAB:
            sq = 0.0
            for j in range(t):
                sq += xb[r, j] * xb[r, j]
            coef = c1 * (2.0 / c2) / (1.0 + sq / c2)
            for j in range(t):
                out[r, j] += coef * xb[r, j]


@njit(cache=True)
def _truncate(g, radius):
    if radius <= 0.0:
        return 1.0
    sq = 0.0
    for v in g.ravel():
        sq += v * v
    nrm = math.sqrt(sq)
    if nrm <= radius:
        return 1.0
    return radius / nrm


@njit(cache=True)
def run_block_chunk(
    Gt, x, resid, log_pi, k_active, prec, kind, c1, c2, log_w,
    op, sigma, gamma, radius, johnson,
    block_u, noise, log_u,
    xs_out, acc_out, logpi_out,
):
    """Advance the chain over one chunk of pre-drawn randomness.

    ``x`` and ``resid`` are updated in place. Returns ``(log_pi, k_active,
    status)``; status 1 means a zero forward proposal density, 2 a NaN ratio.
    """
    p, t = x.shape
    n_obs = resid.shape[0]
    n_steps, eta = noise.shape[0], noise.shape[1]
    half_s2 = 0.5 * sigma * sigma
    perm = np.empty(p, dtype=np.int64)
    b = np.empty(eta, dtype=np.int64)
    xb = np.empty((eta, t))
    zb = np.empty((eta, t))
    gx = np.empty((eta, t))
    gz = np.empty((eta, t))
    mux = np.empty((eta, t))
    muz = np.empty((eta, t))
    resid_z = np.empty_like(resid)
    full = eta == p
    have_cache = False
    for s in range(n_steps):
        if eta < p:
            for i in range(p):
                perm[i] = i
            for i in range(eta):
                j = i + int(block_u[s, i] * (p - i))
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            for i in range(eta):
                b[i] = perm[i]
        else:
            for i in range(p):
                b[i] = i
        for r in range(eta):
            for j in range(t):
                xb[r, j] = x[b[r], j]
        if not (full and have_cache):
            _grad_rows(Gt, resid, prec, kind, c1, c2, b, xb, gx)
        sc = _truncate(gx, radius)
        for r in range(eta):
            sq = 0.0
            for j in range(t):
                mux[r, j] = xb[r, j] - half_s2 * (gx[r, j] * sc)
                u = mux[r, j] + sigma * noise[s, r, j]
                zb[r, j] = u
                sq += u * u
            nrm = math.sqrt(sq)
            if nrm > gamma:
                if op == 0:
                    scale = 1.0 - gamma / nrm
                elif op == 1:
                    scale = 1.0
                else:
                    scale = 1.0 - (gamma / nrm) ** 2
            else:
                scale = 0.0
            for j in range(t):
                zb[r, j] = zb[r, j] * scale
        for k in range(n_obs):
            for j in range(t):
                resid_z[k, j] = resid[k, j]
        for r in range(eta):
            i = b[r]
            for j in range(t):
                d = zb[r, j] - xb[r, j]
                if d != 0.0:
                    for k in range(n_obs):
                        resid_z[k, j] += Gt[i, k] * d
        _grad_rows(Gt, resid_z, prec, kind, c1, c2, b, zb, gz)
        sc = _truncate(gz, radius)
        for r in range(eta):
            for j in range(t):
                muz[r, j] = zb[r, j] - half_s2 * (gz[r, j] * sc)
        log_fwd = _log_rows(op, sigma, gamma, johnson, mux, zb)
        if log_fwd == -math.inf:
            return log_pi, k_active, 1
        log_rev = _log_rows(op, sigma, gamma, johnson, muz, xb)
        k_z = k_active
        d_rows = 0.0
        for r in range(eta):
            ax = False
            az = False
            for j in range(t):
                if xb[r, j] != 0.0:
                    ax = True
                if zb[r, j] != 0.0:
                    az = True
            k_z += int(az) - int(ax)
            d_rows += _row_term(kind, c1, c2, zb[r]) - _row_term(kind, c1, c2, xb[r])
        ssz = 0.0
        ssx = 0.0
        for k in range(n_obs):
            for j in range(t):
                ssz += resid_z[k, j] * resid_z[k, j]
                ssx += resid[k, j] * resid[k, j]
        d_log_pi = -0.5 * prec * (ssz - ssx) - d_rows + log_w[k_z] - log_w[k_active]
        ratio = d_log_pi + log_rev - log_fwd
        if math.isnan(ratio):
            return log_pi, k_active, 2
        accepted = log_u[s] < min(0.0, ratio)
        if accepted:
            for r in range(eta):
                for j in range(t):
                    x[b[r], j] = zb[r, j]
            for k in range(n_obs):
                for j in range(t):
                    resid[k, j] = resid_z[k, j]
            log_pi += d_log_pi
            k_active = k_z
            if full:
                for r in range(eta):
                    for j in range(t):
                        gx[r, j] = gz[r, j]
        have_cache = full
        acc_out[s] = accepted
        logpi_out[s] = log_pi
        xs_out[s] = x
    return log_pi, k_active, 0


_LOG_QUARTER = math.log(0.25)


@njit(cache=True)
def _log_j_add(k, p):
    return (0.0 if k == 0 else _LOG_QUARTER) - math.log(p - k)


@njit(cache=True)
def _log_j_delete(k, p):
    return (0.0 if k == p else _LOG_QUARTER) - math.log(k)


@njit(cache=True)
def run_rj_chunk(
    Gt, x, resid, log_pi, k_active, prec, kind, c1, c2, log_w, sigma,
    unif, noise, xs_out, acc_out, logpi_out,
):
    """Reversible-jump counterpart of :func:`run_block_chunk`; mirrors ``rjmcmc._rj_update``."""
    p, t = x.shape
    n_obs = resid.shape[0]
    active = np.empty(p, dtype=np.int64)
    inactive = np.empty(p, dtype=np.int64)
    xn = np.empty_like(x)
    resid_n = np.empty_like(resid)
    changed = np.zeros(p, dtype=np.bool_)
    log_norm = -0.5 * t * math.log(2.0 * math.pi * sigma * sigma)
    for s in range(unif.shape[0]):
        na = 0
        ni = 0
        for i in range(p):
            nz = False
            for j in range(t):
                if x[i, j] != 0.0:
                    nz = True
            if nz:
                active[na] = i
                na += 1
            else:
                inactive[ni] = i
                ni += 1
        if na == 0:
            move = 0
        elif na == p:
            move = 1
        else:
            move = int(unif[s, 0] * 4)
        removed = -1
        inserted = -1
        if move == 0:
            inserted = inactive[int(unif[s, 1] * ni)]
        elif move == 1:
            removed = active[int(unif[s, 1] * na)]
        elif move == 2:
            removed = active[int(unif[s, 1] * na)]
            inserted = inactive[int(unif[s, 2] * ni)]
        for i in range(p):
            changed[i] = False
            for j in range(t):
                xn[i, j] = x[i, j]
        log_qu = 0.0
        log_qu_prime = 0.0
        left_stratum = False
        if move == 3:
            for r in range(na):
                i = active[r]
                nz = False
                for j in range(t):
                    xn[i, j] = x[i, j] + sigma * noise[s, r, j]
                    if xn[i, j] != x[i, j]:
                        changed[i] = True
                    if xn[i, j] != 0.0:
                        nz = True
                if not nz:
                    left_stratum = True
        else:
            if removed >= 0:
                sq = 0.0
                for j in range(t):
                    sq += x[removed, j] * x[removed, j]
                    xn[removed, j] = 0.0
                log_qu_prime = log_norm - sq / (2.0 * sigma * sigma)
                changed[removed] = True
            if inserted >= 0:
                row = 0
                for r in range(p):
                    nz = False
                    for j in range(t):
                        if noise[s, r, j] != 0.0:
                            nz = True
                    if nz:
                        row = r
                        break
                sq = 0.0
                for j in range(t):
                    v = sigma * noise[s, row, j]
                    xn[inserted, j] = v
                    sq += v * v
                log_qu = log_norm - sq / (2.0 * sigma * sigma)
                changed[inserted] = True
        accepted = False
        d_log_pi = 0.0
        k_n = k_active
        if not left_stratum:
            for k in range(n_obs):
                for j in range(t):
                    resid_n[k, j] = resid[k, j]
            d_rows = 0.0
            for i in range(p):
                if changed[i]:
                    for j in range(t):
                        d = xn[i, j] - x[i, j]
                        for k in range(n_obs):
                            resid_n[k, j] += Gt[i, k] * d
                    d_rows += _row_term(kind, c1, c2, xn[i]) - _row_term(kind, c1, c2, x[i])
            if move == 0:
                k_n = k_active + 1
                log_jr = _log_j_delete(k_n, p) - _log_j_add(k_active, p)
            elif move == 1:
                k_n = k_active - 1
                log_jr = _log_j_add(k_n, p) - _log_j_delete(k_active, p)
            else:
                log_jr = 0.0
            ssn = 0.0
            ssx = 0.0
            for k in range(n_obs):
                for j in range(t):
                    ssn += resid_n[k, j] * resid_n[k, j]
                    ssx += resid[k, j] * resid[k, j]
            d_log_pi = -0.5 * prec * (ssn - ssx) - d_rows + log_w[k_n] - log_w[k_active]
            ratio = d_log_pi + log_jr + log_qu_prime - log_qu
            if math.isnan(ratio):
                return log_pi, k_active, 2
            accepted = math.log1p(-unif[s, 3]) < min(0.0, ratio)
        if accepted:
            for i in range(p):
                for j in range(t):
                    x[i, j] = xn[i, j]
            for k in range(n_obs):
                for j in range(t):
                    resid[k, j] = resid_n[k, j]
            log_pi += d_log_pi
            k_active = k_n
        acc_out[s] = accepted
        logpi_out[s] = log_pi
        xs_out[s] = x
    return log_pi, k_active, 0
