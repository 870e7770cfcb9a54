"""Safeguarded Newton iteration for increasing functions.

Both solvers keep a sign bracket ``[lo, hi]`` around the root and fall back
to bisection whenever the Newton step leaves it or the derivative is not
positive.
"""
import numpy as np

from .errors import NoConvergence

MAXITER = 500


def expand_upper(f, target, hi=1.0, limit=1e8):
    """Smallest ``hi * 2**k`` with ``f(hi) >= target``; ``f`` is increasing."""
    while f(hi) < target:
        hi *= 2.0
        if hi > limit:
            raise NoConvergence(f"no upper bracket below {limit} for target {target!r}")
    return hi


def newton_increasing(fdf, lo, hi, x0, ftol, maxiter=MAXITER):
    """Root of the increasing ``f`` on ``[lo, hi]``.

    ``fdf(x)`` returns ``(f(x), f'(x))`` and ``f(lo) <= 0 <= f(hi)`` must
    hold.  Stops when ``|f| <= ftol`` or the bracket has shrunk to adjacent
    floats, whichever comes first.
    """
    x = min(max(x0, lo), hi)
    for _ in range(maxiter):
        fx, dfx = fdf(x)
        if abs(fx) <= ftol:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        if hi - lo <= 2 * np.spacing(max(abs(lo), abs(hi))):
            return x
        step = x - fx / dfx if dfx > 0 else np.nan
        x = step if lo < step < hi else 0.5 * (lo + hi)
    raise NoConvergence(f"safeguarded Newton did not converge in {maxiter} iterations")


def newton_increasing_batch(fdf, lo, hi, x0, ftol, maxiter=MAXITER):
    """Vectorised :func:`newton_increasing` over independent problems.

    ``fdf(x)`` maps an array of abscissae to ``(f, f')`` arrays of the same
    shape; ``ftol`` may be an array.
    """
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    ftol = np.broadcast_to(ftol, x.shape)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(maxiter):
        fx, dfx = fdf(x)
        done |= np.abs(fx) <= ftol
        neg = fx < 0
        lo = np.where(~done & neg, x, lo)
        hi = np.where(~done & ~neg, x, hi)
        done |= hi - lo <= 2 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        if done.all():
            return x
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dfx > 0, x - fx / dfx, np.nan)
        ok = (step > lo) & (step < hi)
        x = np.where(done, x, np.where(ok, step, 0.5 * (lo + hi)))
    raise NoConvergence(f"batched Newton did not converge in {maxiter} iterations")


def bisect(f, lo, hi, ftol, maxiter=MAXITER):
    """Plain bisection for a continuous ``f`` with a sign change on ``[lo, hi]``."""
    flo = f(lo)
    if flo == 0:
        return lo
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= ftol or hi - lo <= 2 * np.spacing(max(abs(lo), abs(hi))):
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise NoConvergence(f"bisection did not converge in {maxiter} iterations")
