"""Ranked Gibbs weights of the thinned model and the PD(alpha, 0) reference."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import rng
from .errors import InsufficientData
from .field import as_bias
from .process import retained_energies

MIN_TRUNCATION = 1000
MIN_SAMPLES = 100
W1_GRID = np.linspace(0.0, 1.0, 21)


@dataclass(frozen=True)
class RankedWeights:
    weights: np.ndarray  # non-increasing, sums to 1; empty when nothing retained
    source: str  # gibbs | pd-sample
    tail_bound: float = 0.0  # expected mass dropped by truncation (pd-sample only)

    @property
    def empty(self):
        return len(self.weights) == 0


@dataclass(frozen=True)
class PdParams:
    alpha: float
    beta: float = float("nan")

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @classmethod
    def from_beta(cls, lam, beta):
        if not beta > lam:
            raise ValueError(f"beta = {beta!r} must exceed lambda = {lam!r}")
        return cls(lam / beta, beta)


@dataclass(frozen=True)
class WeightStats:
    count: int
    empty: int
    mean_sq: float
    stderr_sq: float
    mean_cube: float
    stderr_cube: float
    mean_w1: float
    stderr_w1: float
    w1_grid: np.ndarray = field(repr=False)
    w1_cdf: np.ndarray = field(repr=False)

    @property
    def empty_fraction(self):
        return self.empty / (self.count + self.empty)


def ranked(energies, beta):
    """Normalised ``exp(beta E)`` weights sorted non-increasingly."""
    energies = np.asarray(energies, dtype=float)
    if len(energies) == 0:
        return np.zeros(0)
    w = np.exp(beta * (energies - energies.max()))
    w /= math.fsum(w)
    return np.sort(w)[::-1]


def gibbs_weights(h, bias, spec, beta, seed, threads=1):
    """Gibbs weights over the configurations retained with uniforms keyed by ``seed``."""
    if not beta >= 0:
        raise ValueError(f"beta must be non-negative, got {beta!r}")
    energies = retained_energies(h, as_bias(bias), spec, seed, threads)
    return RankedWeights(ranked(energies, beta), "gibbs")


def pd_sample(params, truncation, seed, index=0):
    """Ranked PD(alpha, 0) weights from the first ``truncation`` stable atoms.

    Atoms are ``T_k^(-1/alpha)`` for the arrival times ``T_k`` of a unit
    Poisson process.  ``tail_bound`` is ``alpha/(1-alpha) T_K^(1-1/alpha)``
    relative to the retained sum, the expected share of the dropped atoms.
    """
    if truncation < MIN_TRUNCATION:
        raise ValueError(f"truncation must be >= {MIN_TRUNCATION}, got {truncation!r}")
    a = params.alpha
    gen = rng.generator(seed, "pd", index)
    arrivals = np.cumsum(gen.standard_exponential(truncation))
    atoms = arrivals ** (-1.0 / a)
    total = math.fsum(atoms)
    tail = a / (1 - a) * arrivals[-1] ** (1 - 1 / a)
    return RankedWeights(atoms / total, "pd-sample", tail / total)


def weight_stats(samples):
    """Moments of ``sum w^2``, ``sum w^3`` and ``w_1`` over non-empty samples.

    ``samples`` may be any iterable, so long batches can be streamed.  Empty
    samples are counted separately and excluded from the moments.
    """
    sq, cube, w1 = [], [], []
    empty = 0
    for s in samples:
        w = s.weights
        if len(w) == 0:
            empty += 1
            continue
        sq.append(float(np.dot(w, w)))
        cube.append(float(np.sum(w ** 3)))
        w1.append(float(w[0]))
    k = len(sq)
    if k < MIN_SAMPLES:
        raise InsufficientData(f"{k} non-empty samples; need at least {MIN_SAMPLES}")

    def ms(v):
        v = np.asarray(v)
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(k))

    w1 = np.asarray(w1)
    cdf = np.searchsorted(np.sort(w1), W1_GRID, side="right") / k
    return WeightStats(k, empty, *ms(sq), *ms(cube), *ms(w1), W1_GRID.copy(), cdf)
