"""Chain diagnostics and prediction error."""
from __future__ import annotations

import warnings

import numpy as np

__all__ = ["acf", "AcfResult", "test_mse", "log_grid", "error_curve"]


class AcfResult(np.ndarray):
    """Autocorrelations with a ``degenerate`` flag set for constant series."""

    degenerate: bool = False


def acf(series, max_lag: int) -> AcfResult:
    """Biased autocorrelation estimate for lags ``0..max_lag`` (FFT based).

    A constant series has no defined autocorrelation; it yields all ones
    with ``result.degenerate = True`` and a ``RuntimeWarning``.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = len(x)
    if max_lag < 0 or n <= max_lag:
        raise ValueError("series must be longer than max_lag")
    d = x - x.mean()
    c0 = float(d @ d)
    if c0 == 0.0:
        warnings.warn("constant series; autocorrelation set to one", RuntimeWarning, stacklevel=2)
        out = np.ones(max_lag + 1).view(AcfResult)
        out.degenerate = True
        return out
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, nfft)
    ac = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / c0
    ac[0] = 1.0
    out = ac.view(AcfResult)
    out.degenerate = False
    return out


def test_mse(G_test, Y_test, x_hat) -> float:
    """``||G_test x_hat - Y_test||^2`` divided by the number of test rows."""
    G_test = np.asarray(G_test, dtype=float)
    Y_test = np.asarray(Y_test, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.ndim == 1:
        x_hat = x_hat[:, None]
    if Y_test.ndim == 1:
        Y_test = Y_test[:, None]
    r = G_test @ x_hat - Y_test
    return float(np.sum(r * r)) / G_test.shape[0]


test_mse.__test__ = False  # keep pytest from collecting it


def log_grid(n_iter: int, start: float = 2.0, step: float = 0.25) -> np.ndarray:
    """Iterations ``10^start, 10^(start+step), ...`` rounded, capped by and ending at ``n_iter``."""
    pts = []
    e = start
    while 10**e < n_iter:
        pts.append(int(round(10**e)))
        e += step
    pts.append(int(n_iter))
    return np.unique(np.array(pts, dtype=np.int64))


def error_curve(trace, exact, grid) -> np.ndarray:
    """Activation error of the running frequencies at each grid iteration.

    Entries are NaN where no state has been recorded yet.
    """
    exact = np.asarray(exact, dtype=float)
    csum = np.cumsum(trace.masks, axis=0, dtype=np.float64)
    pos = np.searchsorted(trace.iterations, grid, side="right")
    out = np.full(len(grid), np.nan)
    for i, k in enumerate(pos):
        if k > 0:
            out[i] = float(np.abs(csum[k - 1] / k - exact).sum())
    return out
