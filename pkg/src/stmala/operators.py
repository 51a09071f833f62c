"""Row-wise shrinkage-thresholding operators.

Every operator maps a row to zero when its Euclidean norm is at most
``gamma`` and to a positive multiple of itself otherwise:

* ``PROX``: group soft thresholding, the proximal map of ``gamma ||.||_{2,1}``;
* ``HARD``: hard thresholding, kept rows are unchanged;
* ``STVS``: soft thresholding with vanishing shrinkage (empirical Wiener).
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .sparse_state import row_norms

__all__ = [
    "OperatorKind",
    "apply_operator",
    "row_scale",
    "stvs_g",
    "stvs_gtilde",
    "stvs_penalty",
]


class OperatorKind(str, enum.Enum):
    PROX = "prox"
    HARD = "hard"
    STVS = "stvs"

    @classmethod
    def parse(cls, value) -> "OperatorKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"ht": "hard", "hardthreshold": "hard", "l21": "prox"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(
                f"unknown operator {value!r}; expected one of {[k.value for k in cls]}"
            ) from None


def row_scale(kind: OperatorKind, gamma: float, norms: np.ndarray) -> np.ndarray:
    """Multiplier applied to each row given its norm; zero means thresholded."""
    norms = np.asarray(norms, dtype=float)
    keep = norms > gamma
    scale = np.zeros_like(norms)
    nk = norms[keep]
    if kind is OperatorKind.PROX:
        scale[keep] = 1.0 - gamma / nk
    elif kind is OperatorKind.HARD:
        scale[keep] = 1.0
    elif kind is OperatorKind.STVS:
        scale[keep] = 1.0 - (gamma / nk) ** 2
    else:
        raise ValueError(f"unknown operator {kind!r}")
    return scale


def apply_operator(kind, gamma: float, u) -> np.ndarray:
    """Apply the operator row by row; rows with norm <= gamma become exactly zero."""
    kind = OperatorKind.parse(kind)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    if squeeze:
        u = u[:, None]
    out = u * row_scale(kind, gamma, row_norms(u))[:, None]
    return out[:, 0] if squeeze else out


def stvs_g(u):
    """Inverse scaling of the STVS operator.

    A kept output row ``z`` comes from the input ``stvs_g(gamma^2 / ||z||^2) * z``.
    """
    u = np.asarray(u, dtype=float)
    out = 1.0 + 2.0 * u / (1.0 + np.sqrt(1.0 + 4.0 * u))
    return float(out) if out.ndim == 0 else out


def stvs_gtilde(u):
    u = np.asarray(u, dtype=float)
    out = 1.0 / np.sqrt(1.0 + 4.0 * u)
    return float(out) if out.ndim == 0 else out


def stvs_penalty(gamma: float, x) -> float:
    """Non-convex penalty whose proximal map is the STVS operator."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    s = math.asinh(r / (2.0 * gamma))
    return gamma**2 * (s - 0.5 * math.exp(-2.0 * s))
