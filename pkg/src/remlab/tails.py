"""Conditional tail probabilities ``P_sigma(H_n >= a)``.

Three independent routes: exhaustive enumeration, exponentially tilted
Monte Carlo, and the sharp large-deviation formula ``J_n``.  The
envelope bounds and the validity interval sit on top of the coupled solver.
"""
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
import math

import numpy as np

from . import rng
from .enumeration import Enumerator
from .errors import OutOfRange
from .field import as_bias
from .legendre import coupled_solve, make_bracket, solve_tilt
from .mgf import limit_mgf, mgf_n

MC_BLOCK = 1 << 16
DEFAULT_LAMBDA_STAR = 2.0


@dataclass(frozen=True)
class TailEstimate:
    method: str  # exact-enum | tilted-mc | sharp-J
    value: float
    stderr: float
    meta: int  # enumeration size or sample count


@dataclass(frozen=True)
class EnvelopeBounds:
    lower: float
    upper: float
    x: float
    C: float
    solution: object

    @property
    def scaled(self):
        """``(lower, upper) * e^C``, the bounds on ``e^C P_sigma(H_n >= A~ + x)``."""
        k = math.exp(self.C)
        return self.lower * k, self.upper * k


@dataclass(frozen=True)
class ValidityRange:
    lo: float
    hi: float
    lambda_star: float
    varsigma_star: float

    @property
    def empty(self):
        return not self.lo < self.hi

    def __contains__(self, x):
        return self.lo < x < self.hi


def exact_tail_levels(h, bias, levels, threads=1):
    """Exact ``P_sigma(H_n >= a)`` for every ``a`` in ``levels``.

    Uniform spins (``m = 0``) are counted in integers, so those results are
    exact dyadic rationals until the final division.
    """
    m = as_bias(bias).m
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    en = Enumerator(h.values if hasattr(h, "values") else h, m)
    if m == 0.0:
        parts = en.map(lambda s, e, lp: [int(np.count_nonzero(e >= a)) for a in levels], threads)
        counts = [sum(p[k] for p in parts) for k in range(len(levels))]
        return np.array([c / en.size for c in counts])
    parts = en.map(lambda s, e, lp: [float(np.sum(np.exp(lp[e >= a]))) for a in levels], threads)
    return np.array([math.fsum(p[k] for p in parts) for k in range(len(levels))])


def exact_tail(h, bias, a, threads=1):
    """Brute-force ``P_sigma(H_n >= a)`` over all ``2**n`` configurations."""
    value = float(exact_tail_levels(h, bias, [a], threads)[0])
    return TailEstimate("exact-enum", value, 0.0, 1 << len(h.values))


def _tilted_block(values, m, lam, M, a, p_up, seed, block, size):
    gen = rng.generator(seed, "tilted", block)
    spins = np.where(gen.random((size, len(values))) < p_up, 1.0, -1.0)
    energy = (spins - m) @ values
    w = np.where(energy >= a, np.exp(-lam * energy + M), 0.0)
    return math.fsum(w), math.fsum(w * w)


def tilted_tail(h, bias, a, samples, seed, threads=1):
    """Importance-sampling estimate of ``P_sigma(H_n >= a)``.

    Spins are drawn from the product measure tilted by ``Lambda_n(h, a)``
    and reweighted by ``exp(-lam H_n + M_n(h, lam))``.  Samples are drawn in
    fixed blocks of 2**16, each from its own keyed stream, so the estimate
    depends on ``seed`` but not on ``threads``.
    """
    bias = as_bias(bias)
    if samples < 2:
        raise ValueError("need at least two samples")
    lam = solve_tilt(h, bias, a).tilt
    values = h.values
    M = mgf_n(h, bias, lam).value
    p_up = 0.5 * (1.0 + np.tanh(lam * values + bias.theta))
    sizes = [min(MC_BLOCK, samples - s) for s in range(0, samples, MC_BLOCK)]
    job = lambda b: _tilted_block(values, bias.m, lam, M, a, p_up, seed, b, sizes[b])
    if threads <= 1:
        parts = [job(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return TailEstimate("tilted-mc", mean, math.sqrt(var / samples), samples)


def sharp_tail(h, bias, a, spec=None, lambda_star=DEFAULT_LAMBDA_STAR):
    """``J_n(h, a) = exp(-M*_n) / (sqrt(2 pi M''_n) Lambda_n)`` at level ``a``.

    With ``spec`` given, ``a`` must also lie below ``n * varsigma*``.
    """
    bias = as_bias(bias)
    if spec is not None:
        vs = limit_mgf(spec, bias, lambda_star, lambda_star).varsigma_star
        if a >= len(h.values) * vs:
            raise OutOfRange(f"a = {a!r} beyond n * varsigma* = {len(h.values) * vs!r}")
    p = solve_tilt(h, bias, a)
    J = math.exp(-p.rate) / (math.sqrt(2 * math.pi * p.curvature) * p.tilt)
    return TailEstimate("sharp-J", J, 0.0, len(h.values))


def envelope_bounds(h, bias, C, x):
    """Finite-n upper and lower envelopes for ``P_sigma(H_n >= A~ + x)``.

    Both share the prefactor ``sqrt(M''(L~) / M''(L~x)) / L~x``; the upper
    envelope decays like ``exp(-C - L~ x)``, the lower like
    ``exp(-C - L~x x)``.  No (1 + o(1)) factors are applied.
    """
    bias = as_bias(bias)
    sol = coupled_solve(h, bias, C, x)
    c2 = mgf_n(h, bias, sol.tilt_tilde).d2
    c2x = mgf_n(h, bias, sol.tilt_x).d2
    pref = math.sqrt(c2 / c2x) / sol.tilt_x
    upper = pref * math.exp(-C - sol.tilt_tilde * x)
    lower = pref * math.exp(-C - sol.tilt_x * x)
    return EnvelopeBounds(lower, upper, x, C, sol)


def validity_range(h, bias, C, lambda_star, spec):
    """Offsets ``x`` in ``(-A^-, min(n varsigma*, Sigma_n) - A^+)``."""
    bias = as_bias(bias)
    if not lambda_star > 1:
        raise OutOfRange(f"lambda_star must exceed 1, got {lambda_star!r}")
    br = make_bracket(h, bias, C)
    vs = limit_mgf(spec, bias, lambda_star, lambda_star).varsigma_star
    sigma, _ = h.summaries(bias.m)
    return ValidityRange(-br.a_minus, min(len(h.values) * vs, sigma) - br.a_plus, lambda_star, vs)
