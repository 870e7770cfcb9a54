"""Exhaustive enumeration of spin configurations.

Configuration rank ``r`` has spin ``i`` equal to ``+1`` when bit ``i`` of
``r`` is set.  Energies and log-probabilities are tabulated separately for
the low ``LOW_BITS`` spins and the remaining high spins, each table built by
doubling (one addition per entry), so a segment of ``2**LOW_BITS``
consecutive ranks costs one vector addition.  Segment boundaries are fixed,
so any reduction done segment by segment in rank order is independent of
the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
import math

import numpy as np

from .errors import TooLarge

MAX_SPINS = 26
LOW_BITS = 16


def _tables(values, m):
    e = np.zeros(1)
    lp = np.zeros(1)
    lminus, lplus = math.log1p(-m) - math.log(2), math.log1p(m) - math.log(2)
    for hi_ in values:
        e = np.concatenate([e + hi_ * (-1.0 - m), e + hi_ * (1.0 - m)])
        lp = np.concatenate([lp + lminus, lp + lplus])
    return e, lp


class Enumerator:
    """Energies ``H_n(h, tau)`` and ``log P_sigma([tau])`` for all ``tau``."""

    def __init__(self, values, m):
        values = np.asarray(values, dtype=float)
        n = len(values)
        if n > MAX_SPINS:
            raise TooLarge(f"n = {n} exceeds the enumeration budget of 2**{MAX_SPINS}")
        self.n = n
        self.low = min(n, LOW_BITS)
        self.e_low, self.lp_low = _tables(values[: self.low], m)
        self.e_high, self.lp_high = _tables(values[self.low:], m)

    @property
    def size(self):
        return 1 << self.n

    @property
    def n_segments(self):
        return len(self.e_high)

    def segment(self, j):
        """``(start_rank, energies, logprobs)`` for segment ``j``."""
        return (j << self.low, self.e_low + self.e_high[j], self.lp_low + self.lp_high[j])

    def map(self, fn, threads=1):
        """``[fn(start, energies, logprobs) for each segment]`` in rank order."""
        jobs = range(self.n_segments)
        if threads <= 1 or self.n_segments == 1:
            return [fn(*self.segment(j)) for j in jobs]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda j: fn(*self.segment(j)), jobs))

    def all(self):
        """Full ``(energies, logprobs)`` arrays in rank order."""
        parts = [self.segment(j) for j in range(self.n_segments)]
        return np.concatenate([p[1] for p in parts]), np.concatenate([p[2] for p in parts])


def configuration(rank, n):
    """Spin vector in ``{-1, 1}^n`` for configuration ``rank``."""
    bits = (int(rank) >> np.arange(n)) & 1
    return 2 * bits - 1


def rank_of(tau):
    tau = np.asarray(tau)
    return int(np.sum((tau > 0).astype(np.int64) << np.arange(len(tau))))
