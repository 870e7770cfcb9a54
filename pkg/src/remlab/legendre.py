"""Legendre duality for ``M_n`` and ``G``, and the coupled finite-n system.

Both the tilt inverse ``Lambda_n(h, .)`` and the rate inverse
``A_n(h, .)`` are computed in tilt space.  The rate along the dual curve is
``phi(l) = l M'(l) - M(l)`` with ``phi'(l) = l M''(l) > 0``, so inverting the
rate is a single monotone root problem; the energy level is then ``M'(l)``.
"""
from dataclasses import dataclass, replace
import math

import numpy as np

from . import roots
from .errors import NoRootInBracket, OutOfRange
from .field import as_bias, field_summaries
from .mgf import g_d1, g_d2, g_value, mgf_n_batch

TILT_RTOL = 1e-13
RATE_RTOL = 1e-13
GRID_POINTS = 1024
CLAMP = 1e-6


@dataclass(frozen=True)
class DualPoint:
    a: float
    tilt: float
    rate: float
    curvature: float


@dataclass(frozen=True)
class Bracket:
    c_minus: float
    c_plus: float
    a_minus: float
    a_plus: float
    clamped: bool
    # None when SpinBias.epsilon is unset; never used as a gate.
    above_threshold: bool | None = None
    # C^- was dropped to the clamp floor because F(A^-) > C at this n.
    lowered: bool = False


@dataclass(frozen=True)
class CoupledSolution:
    a_tilde: float
    tilt_tilde: float
    tilt_x: float
    residuals: tuple
    bracket: Bracket
    x: float = 0.0


@dataclass(frozen=True)
class AsymptoticSolution:
    a_hat: float
    lambda_hat: float
    target_c: float
    residual: float = 0.0


def n_threshold(epsilon):
    """Size beyond which the unclamped bracket is guaranteed admissible."""
    return -math.log(epsilon) / epsilon ** 5 + 100


class _Dual:
    """Evaluates ``M_n`` and friends for a fixed disorder vector."""

    def __init__(self, h, bias):
        self.m = as_bias(bias).m
        self.v = h.values if hasattr(h, "values") else np.asarray(h, dtype=float)
        if not np.any(self.v):
            raise OutOfRange("the disorder vector is identically zero")
        self.sigma, self.gamma = (h.summaries(self.m) if hasattr(h, "summaries")
                                  else field_summaries(self.v, self.m))

    def m0(self, lam):
        return float(np.sum(g_value(lam * self.v, self.m)))

    def m1(self, lam):
        return float(np.sum(self.v * g_d1(lam * self.v, self.m)))

    def m2(self, lam):
        return float(np.sum(self.v ** 2 * g_d2(lam * self.v, self.m)))

    def rate_at_tilt(self, lam):
        return lam * self.m1(lam) - self.m0(lam)

    def point(self, lam, a=None):
        a = self.m1(lam) if a is None else a
        return DualPoint(a, lam, lam * a - self.m0(lam), self.m2(lam))

    def tilt(self, a):
        if not 0.0 < a < self.sigma:
            raise OutOfRange(f"a = {a!r} outside (0, Sigma_n = {self.sigma!r})")
        ftol = TILT_RTOL * max(1.0, a)
        hi = roots.expand_upper(self.m1, a, hi=1.0 / np.max(np.abs(self.v)))
        x0 = a / self.m2(0.0)
        return roots.newton_increasing(
            lambda l: (self.m1(l) - a, self.m2(l)), 0.0, hi, x0, ftol)

    def tilt_batch(self, a, lo, hi):
        """Tilts for an array of levels known to lie in ``[M'(lo), M'(hi)]``."""
        a = np.asarray(a, dtype=float)
        v, m = self.v, self.m

        def fdf(lam):
            _, d1, d2 = mgf_n_batch(v, m, lam)
            return d1 - a, d2

        x0 = lo + (hi - lo) * (a - a[0]) / max(a[-1] - a[0], 1e-300)
        return roots.newton_increasing_batch(
            fdf, np.full(a.shape, lo), np.full(a.shape, hi), x0, TILT_RTOL * np.maximum(1.0, a))

    def rate_inverse_tilt(self, c):
        if not 0.0 < c < self.gamma:
            raise OutOfRange(f"c = {c!r} outside (0, Gamma_n = {self.gamma!r})")
        ftol = RATE_RTOL * max(1.0, c)
        hi = roots.expand_upper(self.rate_at_tilt, c, hi=1.0 / np.max(np.abs(self.v)))
        x0 = math.sqrt(2.0 * c / self.m2(0.0))
        return roots.newton_increasing(
            lambda l: (self.rate_at_tilt(l) - c, l * self.m2(l)), 0.0, hi, x0, ftol)


def solve_tilt(h, bias, a):
    """Tilt ``Lambda_n(h, a)``: the root of ``M'_n(h, .) = a``."""
    d = _Dual(h, bias)
    return d.point(d.tilt(a), a)


def invert_rate(h, bias, c):
    """Dual point at ``A_n(h, c)``, the level where ``M*_n(h, .) = c``."""
    d = _Dual(h, bias)
    return d.point(d.rate_inverse_tilt(c))


def legendre_rate(h, bias, a):
    """``M*_n(h, a)`` for ``a`` in ``[0, Sigma_n]`` (endpoints included)."""
    d = _Dual(h, bias)
    if a == 0.0:
        return 0.0
    if a == d.sigma:
        return d.gamma
    return d.point(d.tilt(a), a).rate


def make_bracket(h, bias, C):
    """Clamped bracket ``[A_n(h, C^-), A_n(h, C^+)]`` for the coupled system."""
    bias = as_bias(bias)
    d = _Dual(h, bias)
    n = len(d.v)
    return _bracket(d, n, C, bias)[0]


def _bracket(d, n, C, bias):
    if not 0.0 < C < d.gamma:
        raise OutOfRange(f"C = {C!r} outside (0, Gamma_n = {d.gamma!r})")
    cp_raw, cm_raw = C + 2.0 * math.log(n), C - 0.75 * math.log(n)
    cp = min(cp_raw, (1.0 - CLAMP) * d.gamma)
    cm = max(cm_raw, CLAMP * d.gamma)
    lam_m, lam_p = d.rate_inverse_tilt(cm), d.rate_inverse_tilt(cp)
    above = None if bias.epsilon is None else n > n_threshold(bias.epsilon)
    br = Bracket(cm, cp, d.m1(lam_m), d.m1(lam_p), cp != cp_raw or cm != cm_raw, above)
    return br, lam_m, lam_p


def coupled_objective(h, bias, C, a):
    """``F(h, a) - C = M*_n(h, a) + log(2 pi M''_n(h, Lambda_n(h, a))) / 2 - C``."""
    d = _Dual(h, bias)
    p = d.point(d.tilt(a), a)
    return p.rate + 0.5 * math.log(2 * math.pi * p.curvature) - C


def coupled_solve(h, bias, C, x=0.0):
    """Solve the coupled finite-n system for ``(A~, Lambda~, Lambda~^x)``.

    The smallest root of ``F(h, .) = C`` inside the clamped bracket is
    located by a left-to-right scan on 1024 equally spaced levels, then
    refined by bisection (carried out in tilt space, where the level is
    ``M'_n``).
    """
    bias = as_bias(bias)
    d = _Dual(h, bias)
    n = len(d.v)
    br, lam_m, lam_p = _bracket(d, n, C, bias)

    def phi(lam):
        return lam * d.m1(lam) - d.m0(lam) + 0.5 * math.log(2 * math.pi * d.m2(lam)) - C

    if phi(lam_m) > 0 and br.c_minus > CLAMP * d.gamma:
        # Below the asymptotic regime the log-curvature term can exceed
        # (3/4) log n; the only sign change left in the bracket would then be
        # the spurious one near Sigma_n where M'' -> 0.
        cm = CLAMP * d.gamma
        lam_m = d.rate_inverse_tilt(cm)
        br = replace(br, c_minus=cm, a_minus=d.m1(lam_m), clamped=True, lowered=True)

    if br.a_plus > br.a_minus:
        grid = np.linspace(br.a_minus, br.a_plus, GRID_POINTS)
        lams = d.tilt_batch(grid, lam_m, lam_p)
        lams[0], lams[-1] = lam_m, lam_p
        m0, m1, m2 = mgf_n_batch(d.v, d.m, lams)
        F = lams * grid - m0 + 0.5 * np.log(2 * math.pi * m2) - C
    else:
        lams = np.array([lam_m])
        F = np.array([phi(lam_m)])
    zero = np.flatnonzero(F == 0.0)
    change = np.flatnonzero(np.signbit(F[:-1]) != np.signbit(F[1:]))
    first_zero = zero[0] if zero.size else None
    first_change = change[0] if change.size else None
    if first_zero is None and first_change is None:
        raise NoRootInBracket(
            f"F - C has no sign change on [{br.a_minus!r}, {br.a_plus!r}]",
            float(F[0]), float(F[-1]))
    if first_zero is not None and (first_change is None or first_zero <= first_change):
        lam_root = float(lams[first_zero])
    else:
        k = first_change
        lam_root = roots.bisect(phi, float(lams[k]), float(lams[k + 1]), 1e-13 * max(1.0, C))

    a_tilde = d.m1(lam_root)
    tilt = d.tilt(a_tilde)
    if x == 0.0:
        tilt_x = tilt
    else:
        if not 0.0 < a_tilde + x < d.sigma:
            raise OutOfRange(f"A~ + x = {a_tilde + x!r} outside (0, Sigma_n = {d.sigma!r})")
        tilt_x = d.tilt(a_tilde + x)
    r1 = tilt * a_tilde - d.m0(tilt) + 0.5 * math.log(2 * math.pi * d.m2(tilt)) - C
    r2 = d.m1(tilt) - a_tilde
    r3 = d.m1(tilt_x) - (a_tilde + x)
    return CoupledSolution(a_tilde, tilt, tilt_x, (r1, r2, r3), br, x)


# -- asymptotic (h-averaged) system -------------------------------------


def _limit_terms(spec, m, lam):
    g0 = spec.expect(lambda t: float(g_value(lam * t, m)), 1e-11)
    g1 = spec.expect(lambda t: t * float(g_d1(lam * t, m)), 1e-11)
    return g0, g1


def limit_constants(spec, bias):
    """``(varsigma, gamma)`` for any spec, including degenerate fixtures."""
    m = as_bias(bias).m
    psi1 = spec.expect(lambda t: t)
    psi3 = spec.expect(abs)
    p_pos, p_neg = spec.prob_sign()
    return psi3 - m * psi1, math.log(2) - p_pos * math.log1p(m) - p_neg * math.log1p(-m)


def lambda_hat(spec, bias, a):
    """Root of ``G'(lam) = a`` for ``a`` in ``[0, varsigma)``."""
    m = as_bias(bias).m
    varsigma, _ = limit_constants(spec, bias)
    if not 0.0 <= a < varsigma:
        raise OutOfRange(f"a = {a!r} outside [0, varsigma = {varsigma!r})")
    if a == 0.0:
        return 0.0
    G1 = lambda l: spec.expect(lambda t: t * float(g_d1(l * t, m)), 1e-11)
    G2 = lambda l: spec.expect(lambda t: t * t * float(g_d2(l * t, m)), 1e-11)
    hi = roots.expand_upper(G1, a)
    return roots.newton_increasing(lambda l: (G1(l) - a, G2(l)), 0.0, hi, a / G2(0.0), 1e-12)


def g_star(spec, bias, a):
    """``G*(a) = a lam - G(lam)`` at the inner maximiser ``lam = lambda_hat(a)``."""
    m = as_bias(bias).m
    lam = lambda_hat(spec, bias, a)
    return a * lam - spec.expect(lambda t: float(g_value(lam * t, m)), 1e-11)


def asymptotic_solve(spec, bias, c):
    """Solve ``G*(a~) = c``, ``G'(lam~) = a~`` for ``c`` in ``(0, gamma)``.

    Works on the dual curve ``psi(l) = l G'(l) - G(l)``, strictly increasing
    for ``l > 0``, whose root ``lam~`` fixes ``a~ = G'(lam~)``.
    """
    m = as_bias(bias).m
    _, gamma = limit_constants(spec, bias)
    if not 0.0 < c < gamma:
        raise OutOfRange(f"c = {c!r} outside (0, gamma = {gamma!r})")

    def psi(lam):
        g0, g1 = _limit_terms(spec, m, lam)
        return lam * g1 - g0

    def fdf(lam):
        g0, g1 = _limit_terms(spec, m, lam)
        g2 = spec.expect(lambda t: t * t * float(g_d2(lam * t, m)), 1e-11)
        return lam * g1 - g0 - c, lam * g2

    hi = roots.expand_upper(psi, c)
    g2_0 = spec.expect(lambda t: t * t * float(g_d2(0.0, m)), 1e-11)
    lam = roots.newton_increasing(fdf, 0.0, hi, math.sqrt(2 * c / g2_0), 1e-12 * max(1.0, c))
    g0, g1 = _limit_terms(spec, m, lam)
    return AsymptoticSolution(g1, lam, c, lam * g1 - g0 - c)
