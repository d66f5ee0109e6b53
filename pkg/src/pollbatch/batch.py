"""Batch-size distribution: moments, completion sets and PGF evaluation.

Queue indices are 0-based here. ``comp[i, j]`` is the probability that, with
service order starting at queue i, the last customer of a batch sits in
queue j.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import EmptyBatchSupport, EmptyConditioningSet, InvalidBatch, InvalidModel

MAX_SUPPORT = 100_000


def cyclic_span(start: int, end: int, n: int) -> list[int]:
    """Queues start, start+1, ..., end taken cyclically (at least one entry)."""
    return [(start + m) % n for m in range((end - start) % n + 1)]


def last_queue(k, start: int) -> int:
    """Index of the last nonempty coordinate of k in cyclic order from start."""
    n = len(k)
    for m in range(n - 1, -1, -1):
        q = (start + m) % n
        if k[q] > 0:
            return q
    raise InvalidBatch("batch vector has no positive component")


def check_batch(k, n: int) -> np.ndarray:
    arr = np.asarray(k)
    if arr.shape != (n,):
        raise InvalidBatch(f"batch vector must have length {n}")
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise InvalidBatch("batch vector entries must be nonnegative integers")
    if not np.any(arr > 0):
        raise InvalidBatch("batch vector must contain at least one customer")
    return arr.astype(np.int64)


class BatchSupport:
    """Finite joint law of the batch vector K."""

    def __init__(self, k, p):
        k = np.asarray(k)
        p = np.asarray(p, dtype=float)
        if k.size == 0 or p.size == 0:
            raise EmptyBatchSupport("batch support is empty")
        if k.ndim != 2 or p.shape != (k.shape[0],):
            raise InvalidModel("batch support must be a list of equal-length vectors with one probability each")
        if k.shape[0] > MAX_SUPPORT:
            raise InvalidModel(f"batch support larger than {MAX_SUPPORT} entries")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidModel(f"batch probabilities must be >= 0 and sum to 1 (sum = {p.sum()!r})")
        for row in k:
            check_batch(row, k.shape[1])
        self.k = k.astype(np.int64)
        self.p = p
        self.k.setflags(write=False)
        self.p.setflags(write=False)

    @classmethod
    def from_entries(cls, entries) -> "BatchSupport":
        entries = list(entries)
        if not entries:
            raise EmptyBatchSupport("batch support is empty")
        try:
            return cls([e["k"] for e in entries], [e["p"] for e in entries])
        except (KeyError, TypeError) as exc:
            raise InvalidModel(f"malformed batch entry: {exc}") from None

    def to_entries(self) -> list[dict]:
        return [{"k": [int(x) for x in row], "p": float(q)} for row, q in zip(self.k, self.p)]

    def __eq__(self, other):
        return (
            isinstance(other, BatchSupport)
            and np.array_equal(self.k, other.k)
            and np.array_equal(self.p, other.p)
        )

    def __hash__(self):
        return hash((self.k.tobytes(), self.p.tobytes()))

    @property
    def n(self) -> int:
        return self.k.shape[1]

    @property
    def size(self) -> int:
        return self.k.shape[0]

    # moments

    @cached_property
    def mean(self) -> np.ndarray:
        """E(K_i)."""
        return self.p @ self.k

    @cached_property
    def factorial_moments(self) -> np.ndarray:
        """E(K_ij): E(K_i K_j) off the diagonal, E(K_i^2) - E(K_i) on it."""
        kf = self.k.astype(float)
        m = np.einsum("s,si,sj->ij", self.p, kf, kf)
        m[np.diag_indices(self.n)] -= self.mean
        return m

    def batch_mates(self, c: int) -> np.ndarray:
        """Mean batch-mates per queue seen by a tagged customer of queue c.

        Entry n is E(K_n K_c)/E(K_c) for n != c and E(K_c(K_c-1))/2E(K_c) for
        n == c (those ahead of it in its own queue, random position).
        """
        ec = self.mean[c]
        if ec == 0:
            return np.zeros(self.n)
        out = self.factorial_moments[:, c] / ec
        out[c] *= 0.5
        return out

    # completion sets

    @cached_property
    def _last(self) -> np.ndarray:
        last = np.empty((self.size, self.n), dtype=np.int64)
        for s, row in enumerate(self.k):
            for i in range(self.n):
                last[s, i] = last_queue(row, i)
        return last

    @cached_property
    def comp(self) -> np.ndarray:
        """comp[i, j] = pi(K_{i,j})."""
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            np.add.at(out[i], self._last[:, i], self.p)
        return out

    @cached_property
    def cond_mean(self) -> np.ndarray:
        """cond_mean[i, j, l] = E(K_l | K_{i,j}); zero where the set is empty."""
        acc = np.zeros((self.n, self.n, self.n))
        for i in range(self.n):
            np.add.at(acc[i], self._last[:, i], self.p[:, None] * self.k)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = acc / self.comp[:, :, None]
        return np.where(self.comp[:, :, None] > 0, out, 0.0)

    def members(self, start: int, end: int) -> np.ndarray:
        """Support indices of the batches in K_{start,end}."""
        return np.flatnonzero(self._last[:, start] == end)

    def completion_probability(self, start: int, end: int) -> float:
        return float(self.comp[start, end])

    def conditional_mean(self, l: int, start: int, end: int) -> float:
        if self.comp[start, end] == 0:
            raise EmptyConditioningSet(f"pi(K_{{{start + 1},{end + 1}}}) = 0")
        return float(self.cond_mean[start, end, l])

    # generating functions

    def _log_terms(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            logz = np.log(z)
        # 0 * log(0) must read as z^0 = 1
        terms = self.k * np.where(self.k > 0, logz[..., None, :], 0.0)
        return terms.sum(axis=-1)

    def pgf(self, z):
        """K~(z) = E(prod z_l^{K_l}); z broadcasts with shape (..., N)."""
        return np.exp(self._log_terms(z)) @ self.p

    def one_minus_pgf(self, z):
        """1 - K~(z), accurate when z is close to the all-ones vector."""
        return -np.expm1(self._log_terms(z)) @ self.p

    def point_pgf(self, z):
        """prod z_l^{k_l} for every support point; shape (..., M)."""
        return np.exp(self._log_terms(z))

    def conditional_pgf(self, z, start: int, end: int):
        """K~(z | K_{start,end}); only the span start..end of z is read."""
        if self.comp[start, end] == 0:
            raise EmptyConditioningSet(f"pi(K_{{{start + 1},{end + 1}}}) = 0")
        idx = self.members(start, end)
        z = np.array(z, dtype=float)
        span = cyclic_span(start, end, self.n)
        outside = np.setdiff1d(np.arange(self.n), span)
        z[..., outside] = 1.0
        return self.point_pgf(z)[..., idx] @ self.p[idx] / self.comp[start, end]
