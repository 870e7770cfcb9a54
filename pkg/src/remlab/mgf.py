"""Single-spin log-MGF ``g``, the conditional family ``M_n`` and its mean ``G``.

With ``theta = atanh(m)`` the tilted spin mean is ``tanh(x + theta)``, which
gives the stable closed forms used throughout::

    g(x)   = |x| - m x + log1p(-(1 - s m)/2 * (1 - exp(-2|x|))),  s = sign(x)
    g'(x)  = tanh(x + theta) - m = (1 - m^2) tanh(x) / (1 + m tanh(x))
    g''(x) = sech(x + theta)^2
"""
from dataclasses import dataclass
import math

import numpy as np

from .field import as_bias


@dataclass(frozen=True)
class GEval:
    value: float
    d1: float
    d2: float


@dataclass(frozen=True)
class MgfEval:
    value: float
    d1: float
    d2: float


@dataclass(frozen=True)
class LimitMgfEval:
    value: float
    d1: float
    d2: float
    varsigma_star: float | None = None


def _sech2(y):
    e = np.exp(-2.0 * np.abs(y))
    return np.minimum(4.0 * e / (1.0 + e) ** 2, 1.0)


def g_value(x, m):
    """Vectorised ``g``; overflow-free for any finite ``x``."""
    x = np.asarray(x, dtype=float)
    s = np.sign(x)
    ax = np.abs(x)
    return ax - m * x + np.log1p(-(1.0 - s * m) / 2.0 * -np.expm1(-2.0 * ax))


def g_d1(x, m):
    t = np.tanh(np.asarray(x, dtype=float))
    return (1.0 - m * m) * t / (1.0 + m * t)


def g_d2(x, m):
    return _sech2(np.asarray(x, dtype=float) + np.arctanh(m))


def g_eval(lam, bias):
    """``g``, ``g'`` and ``g''`` at tilt ``lam``."""
    m = as_bias(bias).m
    return GEval(float(g_value(lam, m)), float(g_d1(lam, m)), float(g_d2(lam, m)))


def g_upper_bound(lam, h1, m):
    """Right-hand side of the upper bound on ``g(lam * h1)`` for ``h1 != 0``."""
    s = np.sign(h1)
    return (np.log((1 + s * m) / 2) + (1 - s * m) / (1 + s * m) * np.exp(-2 * lam * np.abs(h1))
            + lam * (np.abs(h1) - m * h1))


def _values(h):
    return h.values if hasattr(h, "values") else np.asarray(h, dtype=float)


def mgf_n(h, bias, lam):
    """``M_n(h, lam)`` and its first two tilt derivatives."""
    m = as_bias(bias).m
    v = _values(h)
    x = lam * v
    return MgfEval(
        float(np.sum(g_value(x, m))),
        float(np.sum(v * g_d1(x, m))),
        float(np.sum(v * v * g_d2(x, m))),
    )


def mgf_n_batch(values, m, lams):
    """``(M, M', M'')`` arrays for an array of tilts; shape ``lams.shape``."""
    lams = np.asarray(lams, dtype=float)
    x = lams[..., None] * values
    return (np.sum(g_value(x, m), axis=-1),
            np.sum(values * g_d1(x, m), axis=-1),
            np.sum(values * values * g_d2(x, m), axis=-1))


def limit_mgf(spec, bias, lam, lambda_star=None, tol=1e-9):
    """``G(lam) = E[g(lam h_1)]`` and derivatives by quadrature.

    ``varsigma_star = E[h_1 g'(h_1 lambda_star)]`` is filled in when
    ``lambda_star`` is given.  Raises ``QuadratureFailure`` when ``tol`` is
    not reached.
    """
    m = as_bias(bias).m
    value = spec.expect(lambda x: float(g_value(lam * x, m)), tol)
    d1 = spec.expect(lambda x: x * float(g_d1(lam * x, m)), tol)
    d2 = spec.expect(lambda x: x * x * float(g_d2(lam * x, m)), tol)
    vs = None
    if lambda_star is not None:
        vs = spec.expect(lambda x: x * float(g_d1(lambda_star * x, m)), tol)
    return LimitMgfEval(value, d1, d2, vs)
