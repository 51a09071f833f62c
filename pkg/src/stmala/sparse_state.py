"""Row-sparse matrices in R^{P x T}: a model mask plus the stacked active rows.

A matrix lives in exactly one stratum, the set of matrices whose nonzero rows
are exactly the rows flagged in its mask. Activity is decided by exact
comparison with zero: the thresholding operators produce literal zeros.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SparseState",
    "embed",
    "mask_of",
    "row_norms",
    "l21_norm",
    "to_dense",
    "zero_state",
    "from_dense",
    "mask_to_bitstring",
    "bitstring_to_mask",
    "write_matrix_csv",
    "read_matrix_csv",
]


def _as_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 1:
        raise ValueError(f"mask must be one-dimensional, got shape {m.shape}")
    if m.dtype != bool:
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("mask entries must be 0 or 1")
        m = m.astype(bool)
    return m


@dataclass(frozen=True, eq=False)
class SparseState:
    """A point of R^{P x T} stored as (mask, active rows).

    ``active`` has one row per set bit of ``mask``, in increasing index
    order. Construct through :func:`embed` or :func:`from_dense`, which
    enforce that every active row is nonzero.
    """

    mask: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.mask.setflags(write=False)
        self.active.setflags(write=False)

    @property
    def p(self) -> int:
        return self.mask.shape[0]

    @property
    def t(self) -> int:
        return self.active.shape[1]

    @property
    def n_active(self) -> int:
        return int(self.active.shape[0])

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def __eq__(self, other):
        if not isinstance(other, SparseState):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.active, other.active)
        )

    def __repr__(self):
        bits = mask_to_bitstring(self.mask)
        return f"SparseState(p={self.p}, t={self.t}, mask={bits})"


def embed(mask, values, t: int | None = None) -> SparseState:
    """Place ``values`` on the active rows of ``mask``.

    ``t`` is only needed when the mask is empty and ``values`` carries no
    column information.
    """
    m = _as_mask(mask)
    if m.shape[0] < 1:
        raise ValueError("P must be at least 1")
    v = np.asarray(values, dtype=float)
    k = int(m.sum())
    if v.size == 0:
        if k != 0:
            raise ValueError(f"mask has {k} active rows but values is empty")
        if t is None:
            t = v.shape[1] if v.ndim == 2 and v.shape[1] > 0 else 1
        v = np.zeros((0, t))
    else:
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != k:
            raise ValueError(f"mask has {k} active rows but values has {v.shape[0]}")
        if t is not None and v.shape[1] != t:
            raise ValueError(f"values has {v.shape[1]} columns, expected {t}")
    if v.shape[1] < 1:
        raise ValueError("T must be at least 1")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if k and np.any(~np.any(v != 0.0, axis=1)):
        raise ValueError("values contains a zero row; active rows must be nonzero")
    return SparseState(mask=m.copy(), active=v.copy())


def zero_state(p: int, t: int = 1) -> SparseState:
    return embed(np.zeros(p, dtype=bool), np.zeros((0, t)), t=t)


def mask_of(x) -> np.ndarray:
    """Boolean mask of the rows of ``x`` holding at least one nonzero entry."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    # any() rather than norm > 0: squaring 1e-300 underflows to zero
    return np.any(x != 0.0, axis=1)


def row_norms(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def l21_norm(x) -> float:
    return float(row_norms(x).sum())


def to_dense(s: SparseState) -> np.ndarray:
    out = np.zeros((s.p, s.t))
    out[s.mask] = s.active
    return out


def from_dense(x) -> SparseState:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m = mask_of(x)
    return embed(m, x[m], t=x.shape[1])


def mask_to_bitstring(mask) -> str:
    return "".join("1" if b else "0" for b in np.asarray(mask, dtype=bool))


def bitstring_to_mask(bits: str) -> np.ndarray:
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {bits!r}")
    return np.array([c == "1" for c in bits], dtype=bool)


def write_matrix_csv(path, x) -> None:
    """Write a dense matrix, one row per line, no header.

    ``repr`` of a float round-trips exactly, so reading back is bit-exact.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise ValueError("matrix has non-finite entries")
    buf = io.StringIO()
    for row in x:
        buf.write(",".join(repr(float(v)) for v in row))
        buf.write("\n")
    Path(path).write_text(buf.getvalue(), newline="\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows")
    out = np.array(rows, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{path}: non-finite entries")
    return out
