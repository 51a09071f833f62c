"""Compressed storage of MCMC output."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sparse_state import SparseState, embed

__all__ = ["ChainTrace", "TraceRecorder"]


@dataclass
class ChainTrace:
    """Recorded iterations of one chain.

    States are kept as masks plus the concatenated active rows: row block
    ``values[offsets[i]:offsets[i+1]]`` holds the active rows of record ``i``.
    ``n_accepted`` counts acceptances over all ``n_iter`` iterations,
    burn-in included.
    """

    p: int
    t: int
    iterations: np.ndarray
    accepted: np.ndarray
    log_pi: np.ndarray
    masks: np.ndarray
    values: np.ndarray
    offsets: np.ndarray
    n_iter: int
    n_accepted: int
    burn_in: int = 0
    thin: int = 1
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_iter if self.n_iter else 0.0

    @property
    def n_active(self) -> np.ndarray:
        return self.masks.sum(axis=1)

    def state(self, i: int) -> SparseState:
        return embed(self.masks[i], self.values[self.offsets[i] : self.offsets[i + 1]], t=self.t)

    def dense(self) -> np.ndarray:
        """All recorded states as an ``(n, P, T)`` array; only for small P."""
        out = np.zeros((len(self), self.p, self.t))
        rows = np.nonzero(self.masks)
        out[rows] = self.values
        return out

    def activation_frequencies(self) -> np.ndarray:
        if len(self) == 0:
            raise ValueError("trace holds no records")
        return self.masks.mean(axis=0)

    def posterior_mean(self) -> np.ndarray:
        """Average of the recorded states, zeros included."""
        if len(self) == 0:
            raise ValueError("trace holds no records")
        out = np.zeros((self.p, self.t))
        rec, idx = np.nonzero(self.masks)
        np.add.at(out, idx, self.values)
        return out / len(self)

    def component(self, i: int, j: int = 0) -> np.ndarray:
        """Series of entry ``(i, j)`` across records."""
        out = np.zeros(len(self))
        rec, idx = np.nonzero(self.masks)
        sel = idx == i
        out[rec[sel]] = self.values[sel, j]
        return out

    def to_csv(self, path) -> None:
        """iter, accepted, n_active, log_pi, then one 0/1 column per component."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "accepted", "n_active", "log_pi"] + [f"m{i + 1}" for i in range(self.p)])
            for it, acc, lp, m in zip(self.iterations, self.accepted, self.log_pi, self.masks):
                w.writerow([int(it), int(acc), int(m.sum()), repr(float(lp))] + [int(b) for b in m])

    @staticmethod
    def read_csv(path) -> dict:
        """Load a trace CSV back into column arrays."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header[:4] != ["iter", "accepted", "n_active", "log_pi"]:
            raise ValueError(f"{path}: not a trace file")
        arr = np.array(body, dtype=object).reshape(len(body), len(header))
        return {
            "iter": arr[:, 0].astype(np.int64),
            "accepted": arr[:, 1].astype(int).astype(bool),
            "n_active": arr[:, 2].astype(np.int64),
            "log_pi": arr[:, 3].astype(float),
            "masks": arr[:, 4:].astype(int).astype(bool),
        }


class TraceRecorder:
    """Collects every ``thin``-th state after ``burn_in`` iterations."""

    def __init__(self, p, t, n_iter, burn_in=0, thin=1):
        if n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        if not 0 <= burn_in < n_iter:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iter")
        if thin < 1:
            raise ValueError("thin must be positive")
        self.p, self.t = p, t
        self.n_iter, self.burn_in, self.thin = n_iter, burn_in, thin
        n_rec = (n_iter - burn_in) // thin
        self.iterations = np.zeros(n_rec, dtype=np.int64)
        self.accepted = np.zeros(n_rec, dtype=bool)
        self.log_pi = np.zeros(n_rec)
        self.masks = np.zeros((n_rec, p), dtype=bool)
        self._values = []
        self.counts = np.zeros(n_rec, dtype=np.int64)
        self.k = 0
        self.n_accepted = 0

    def wants(self, it: int) -> bool:
        """Whether iteration ``it`` (1-based) is recorded."""
        return it > self.burn_in and (it - self.burn_in) % self.thin == 0

    def record(self, it, accepted, log_pi, x):
        k = self.k
        m = np.any(x != 0.0, axis=1)
        self.iterations[k] = it
        self.accepted[k] = accepted
        self.log_pi[k] = log_pi
        self.masks[k] = m
        self._values.append(x[m].copy())
        self.counts[k] = m.sum()
        self.k += 1

    def record_chunk(self, start, accepted, log_pi, xs):
        """Record a block of consecutive iterations ``start+1 .. start+len(xs)``."""
        self.n_accepted += int(np.count_nonzero(accepted))
        its = np.arange(start + 1, start + 1 + len(xs))
        sel = (its > self.burn_in) & ((its - self.burn_in) % self.thin == 0)
        if not np.any(sel):
            return
        k0, k1 = self.k, self.k + int(sel.sum())
        xs = xs[sel]
        m = np.any(xs != 0.0, axis=2)
        self.iterations[k0:k1] = its[sel]
        self.accepted[k0:k1] = accepted[sel]
        self.log_pi[k0:k1] = log_pi[sel]
        self.masks[k0:k1] = m
        self.counts[k0:k1] = m.sum(axis=1)
        self._values.append(xs[m])
        self.k = k1

    def finish(self, meta=None) -> ChainTrace:
        offsets = np.zeros(self.k + 1, dtype=np.int64)
        np.cumsum(self.counts[: self.k], out=offsets[1:])
        values = np.concatenate(self._values) if self._values else np.zeros((0, self.t))
        return ChainTrace(
            p=self.p,
            t=self.t,
            iterations=self.iterations[: self.k],
            accepted=self.accepted[: self.k],
            log_pi=self.log_pi[: self.k],
            masks=self.masks[: self.k],
            values=values.reshape(-1, self.t),
            offsets=offsets,
            n_iter=self.n_iter,
            n_accepted=self.n_accepted,
            burn_in=self.burn_in,
            thin=self.thin,
            meta=dict(meta or {}),
        )
