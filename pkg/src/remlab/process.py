"""Thinned energy point process, the kernel ``K_n`` and the PPP reference.

Configuration ``tau`` is retained when ``U_tau < Q(tau)`` with
``Q(tau) = exp(n rho (log 2 - log(1 + |m|))) P_sigma([tau])``.  The uniform
``U_tau`` is the counter-``rank(tau)`` output of a keyed Philox stream, so it
depends only on the seed and the configuration, never on ``h`` or on how
the enumeration is split across threads.
"""
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
import math

import numpy as np
from scipy import stats

from . import rng
from .enumeration import MAX_SPINS, Enumerator
from .errors import InsufficientData
from .field import as_bias
from .legendre import coupled_solve
from .tails import exact_tail_levels, tilted_tail

MIN_REALIZATIONS = 100
MIN_KS_POINTS = 30


@dataclass(frozen=True)
class ThinningSpec:
    """Thinning at exponent ``rho`` for ``n`` spins of bias ``m``."""

    rho: float
    m: float
    n: int

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho!r}")
        if not abs(self.m) < 1:
            raise ValueError(f"|m| must be < 1, got {self.m!r}")

    @property
    def entropy_gap(self):
        return math.log(2) - math.log1p(abs(self.m))

    @property
    def log_scale(self):
        return self.n * self.rho * self.entropy_gap

    @property
    def scale(self):
        return math.exp(self.log_scale)

    @property
    def delta(self):
        return (1 - self.rho) * self.entropy_gap

    @property
    def c(self):
        return self.rho * self.entropy_gap


@dataclass(frozen=True)
class Window:
    x_lo: float
    x_hi: float

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError(f"empty window [{self.x_lo!r}, {self.x_hi!r}]")

    @classmethod
    def parse(cls, text):
        lo, hi = text.split(":")
        return cls(float(lo), float(hi))

    @classmethod
    def default(cls, lam):
        return cls(-2.0 / lam, 6.0 / lam)

    def mass(self, lam):
        """``int_window exp(-lam x) dx``."""
        return (math.exp(-lam * self.x_lo) - math.exp(-lam * self.x_hi)) / lam


@dataclass(frozen=True)
class RealizedProcess:
    points: np.ndarray
    centering: float
    retained_total: int
    window: Window


@dataclass(frozen=True)
class ProcessStats:
    edges: np.ndarray
    mean_count: np.ndarray
    count_stderr: np.ndarray
    predicted: np.ndarray
    dispersion: np.ndarray
    ks_stat: float
    ks_p: float
    laplace_pairs: list  # (theta, empirical, predicted, stderr)
    n_realizations: int
    n_points: int


def thinning_prob(tau, bias, spec):
    """Retention probability ``Q(tau)``, evaluated in log space."""
    m = as_bias(bias).m
    tau = np.asarray(tau)
    logp = np.sum(np.log1p(m * tau)) - len(tau) * math.log(2)
    return math.exp(spec.log_scale + logp)


def _retained_segment(key, log_scale, start, energies, logprobs):
    u = rng.uniforms_at(key, start, len(energies))
    keep = np.log(u) < log_scale + logprobs
    return energies[keep]


def retained_energies(h, bias, spec, seed, threads=1):
    """Energies ``H_n(h, tau)`` of all retained configurations, in rank order."""
    m = as_bias(bias).m
    en = Enumerator(h.values, m)
    key = rng.derive_key(seed, "thinning", en.n)
    parts = en.map(lambda s, e, lp: _retained_segment(key, spec.log_scale, s, e, lp), threads)
    return np.concatenate(parts)


def realize_process(h, bias, spec, window, seed, threads=1, solution=None):
    """One realization of the centred thinned energies inside ``window``.

    The centering is ``A~_n(h)`` from the coupled system at ``C = n c``;
    pass ``solution`` to reuse an existing solve.
    """
    bias = as_bias(bias)
    if solution is None:
        solution = coupled_solve(h, bias, spec.n * spec.c)
    energies = retained_energies(h, bias, spec, seed, threads) - solution.a_tilde
    inside = energies[(energies >= window.x_lo) & (energies <= window.x_hi)]
    return RealizedProcess(np.sort(inside), solution.a_tilde, len(energies), window)


def kernel_eval(h, bias, C, x, threads=1, samples=10**6, seed=0):
    """``K_n(h, [x, inf)) = e^C P_sigma(H_n - A~_n(h) >= x)``.

    Exact enumeration up to the enumeration limit, importance sampling
    beyond it.  ``x`` may be an array.
    """
    bias = as_bias(bias)
    sol = coupled_solve(h, bias, C)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if len(h.values) <= MAX_SPINS:
        tail = exact_tail_levels(h, bias, sol.a_tilde + xs, threads)
    else:
        tail = np.array([tilted_tail(h, bias, sol.a_tilde + xi, samples, seed, threads).value
                         for xi in xs])
    out = math.exp(C) * tail
    return float(out[0]) if np.ndim(x) == 0 else out


def ppp_reference(lam, window, seed, index=0):
    """PPP on ``window`` with intensity ``exp(-lam x) dx``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    gen = rng.generator(seed, "ppp", index)
    count = gen.poisson(window.mass(lam))
    span = -math.expm1(-lam * (window.x_hi - window.x_lo))
    u = gen.random(count)
    points = window.x_lo - np.log1p(-u * span) / lam
    return RealizedProcess(np.sort(points), 0.0, count, window)


def normalized_cdf(x, lam, window):
    """CDF of the density proportional to ``exp(-lam x)`` on ``window``."""
    span = -math.expm1(-lam * (window.x_hi - window.x_lo))
    return -np.expm1(-lam * (np.asarray(x) - window.x_lo)) / span


def compare_stats(realizations, lam, window, bins, theta_grid=()):
    """Bin counts, dispersion, pooled KS and Laplace functionals vs the PPP."""
    R = len(realizations)
    if R < MIN_REALIZATIONS:
        raise InsufficientData(f"{R} realizations; need at least {MIN_REALIZATIONS}")
    if not math.isfinite(window.x_hi):
        raise ValueError("binning needs a finite window")
    edges = np.linspace(window.x_lo, window.x_hi, bins + 1)
    counts = np.array([np.histogram(r.points, edges)[0] for r in realizations], dtype=float)
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dispersion = np.where(mean > 0, var / mean, np.nan)
    predicted = (np.exp(-lam * edges[:-1]) - np.exp(-lam * edges[1:])) / lam

    pooled = np.concatenate([r.points for r in realizations])
    if len(pooled) >= MIN_KS_POINTS:
        ks = stats.kstest(normalized_cdf(pooled, lam, window), "uniform")
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        ks_stat = ks_p = float("nan")

    totals = counts.sum(axis=1)
    mass = window.mass(lam)
    pairs = []
    for theta in theta_grid:
        e = np.exp(-theta * totals)
        pairs.append((float(theta), float(e.mean()), math.exp(-(1 - math.exp(-theta)) * mass),
                      float(e.std(ddof=1) / math.sqrt(R))))
    return ProcessStats(edges, mean, np.sqrt(var / R), predicted, dispersion, ks_stat, ks_p,
                        pairs, R, len(pooled))


def run_replicates(job, count, threads=1):
    """``[job(i) for i in range(count)]`` with optional thread parallelism."""
    if threads <= 1:
        return [job(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(count)))
