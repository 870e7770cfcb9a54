"""Disorder distributions, field samples and the technical region check."""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate, stats

from . import rng
from .errors import NonFiniteMoment, QuadratureFailure, SpecViolation

# Gaussian integrals are taken over mean +- _GAUSS_WIDTH * stddev; the
# neglected mass is below 1e-40 and the integrands grow at most like |h|^3.
_GAUSS_WIDTH = 14.0
QUAD_TOL = 1e-10

KINDS = ("uniform", "gaussian", "two-sided-uniform", "point")


@dataclass(frozen=True)
class SpinBias:
    """Single-spin magnetisation ``m`` and the technical margin ``epsilon``.

    ``epsilon`` is only needed by the region diagnostics and the bracket
    threshold; leave it as ``None`` when those are not used.
    """

    m: float
    epsilon: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.m) and -1.0 < self.m < 1.0):
            raise ValueError(f"m must lie in (-1, 1), got {self.m}")
        if self.epsilon is not None:
            eps = self.epsilon
            if not 0.0 < eps < 0.5:
                raise ValueError(f"epsilon must lie in (0, 1/2), got {eps}")
            if abs(self.m) > 1.0 - 2.0 * eps:
                raise ValueError(f"|m| = {abs(self.m)} exceeds 1 - 2*epsilon = {1 - 2 * eps}")

    @property
    def theta(self):
        """``atanh(m)``: the spin mean under tilt ``x`` is ``tanh(x + theta)``."""
        return math.atanh(self.m)


def as_bias(bias):
    return bias if isinstance(bias, SpinBias) else SpinBias(float(bias))


@dataclass(frozen=True)
class FieldSpec:
    """Law of one disorder variable ``h_1``.

    ``params`` per kind:

    * ``uniform``: ``(lo, hi)``
    * ``gaussian``: ``(mean, stddev)``
    * ``two-sided-uniform``: ``(lo, hi, q)`` with ``0 < lo < hi``; the
      magnitude is uniform on ``[lo, hi]`` and the sign is negative with
      probability ``q``
    * ``point``: ``(value,)``.  Degenerate; useful as a closed-form fixture
      but rejected by :func:`validate_field_spec`.

    ``atom`` mixes a point mass of that weight at zero into the law.
    """

    kind: str
    params: tuple
    atom: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecViolation(f"unknown field kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        expected = {"uniform": 2, "gaussian": 2, "two-sided-uniform": 3, "point": 1}[self.kind]
        if len(self.params) != expected:
            raise SpecViolation(f"{self.kind} takes {expected} parameters, got {len(self.params)}")
        if not all(math.isfinite(p) for p in self.params) or not math.isfinite(self.atom):
            raise SpecViolation("field parameters must be finite")
        if not 0.0 <= self.atom <= 1.0:
            raise SpecViolation("atom weight must lie in [0, 1]")

    @classmethod
    def uniform(cls, lo, hi, atom=0.0):
        return cls("uniform", (lo, hi), atom)

    @classmethod
    def gaussian(cls, mean, stddev, atom=0.0):
        return cls("gaussian", (mean, stddev), atom)

    @classmethod
    def two_sided_uniform(cls, lo, hi, q):
        return cls("two-sided-uniform", (lo, hi, q))

    @classmethod
    def point(cls, value):
        return cls("point", (value,))

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params), "atom": self.atom}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["params"]), float(d.get("atom", 0.0)))

    def describe(self):
        """Compact text form ``kind(p1,p2,...)``; inverse of :func:`parse_field_spec`."""
        args = ",".join(repr(p) for p in self.params)
        text = f"{self.kind}({args})"
        if self.atom:
            text += f"+atom({self.atom!r})"
        return text

    # -- integration ------------------------------------------------------

    def _pieces(self):
        """(weight, lo, hi, sign, density_scale) pieces of the continuous part."""
        w = 1.0 - self.atom
        if self.kind == "uniform":
            lo, hi = self.params
            return [(w, lo, hi, 1.0)]
        if self.kind == "gaussian":
            mu, sd = self.params
            return [(w, mu - _GAUSS_WIDTH * sd, mu + _GAUSS_WIDTH * sd, 1.0)]
        if self.kind == "two-sided-uniform":
            lo, hi, q = self.params
            return [(w * (1.0 - q), lo, hi, 1.0), (w * q, lo, hi, -1.0)]
        return []

    def _density(self, x):
        if self.kind == "uniform":
            lo, hi = self.params
            return 1.0 / (hi - lo)
        if self.kind == "gaussian":
            mu, sd = self.params
            return stats.norm.pdf(x, mu, sd)
        lo, hi, _ = self.params
        return 1.0 / (hi - lo)

    def expect(self, func, tol=QUAD_TOL):
        """``E[func(h_1)]`` by adaptive Gauss-Kronrod quadrature.

        ``func`` takes a scalar.  Raises :class:`QuadratureFailure` when the
        estimated absolute error exceeds ``tol``.
        """
        if self.kind == "point":
            return float(func(self.params[0]))
        total = self.atom * func(0.0) if self.atom else 0.0
        for weight, lo, hi, sign in self._pieces():
            if weight == 0.0:
                continue
            breaks = [b for b in (0.0, self.params[0]) if lo < b < hi] if self.kind == "gaussian" else []
            if self.kind == "uniform" and lo < 0.0 < hi:
                breaks = [0.0]
            out = integrate.quad(
                lambda x: func(sign * x) * self._density(x),
                lo, hi, epsabs=tol / 4, epsrel=0.0, limit=400,
                points=breaks or None, full_output=1,
            )
            value, err = out[0], out[1]
            if not math.isfinite(value) or err > tol:
                raise QuadratureFailure(
                    f"quadrature error {err:.3g} exceeds {tol:.3g} on [{lo}, {hi}]"
                )
            total += weight * value
        return float(total)

    def prob_sign(self):
        """``(P(h > 0), P(h < 0))``."""
        w = 1.0 - self.atom
        if self.kind == "point":
            v = self.params[0]
            return float(v > 0), float(v < 0)
        if self.kind == "uniform":
            lo, hi = self.params
            pos = min(max((hi - max(lo, 0.0)) / (hi - lo), 0.0), 1.0)
            return w * pos, w * (1.0 - pos)
        if self.kind == "gaussian":
            mu, sd = self.params
            pos = stats.norm.sf(0.0, mu, sd)
            return w * pos, w * (1.0 - pos)
        q = self.params[2]
        return w * (1.0 - q), w * q

    def sample(self, gen, n):
        """``n`` i.i.d. draws using the numpy Generator ``gen``."""
        if self.kind == "point":
            out = np.full(n, self.params[0])
        elif self.kind == "uniform":
            out = gen.uniform(self.params[0], self.params[1], n)
        elif self.kind == "gaussian":
            out = gen.normal(self.params[0], self.params[1], n)
        else:
            lo, hi, q = self.params
            mag = gen.uniform(lo, hi, n)
            out = np.where(gen.random(n) < q, -mag, mag)
        if self.atom:
            out = np.where(gen.random(n) < self.atom, 0.0, out)
        return out


def parse_field_spec(text):
    """Parse ``kind(p1,p2,...)`` optionally followed by ``+atom(w)``."""
    text = text.strip()
    atom = 0.0
    if "+atom(" in text:
        text, atom_part = text.split("+atom(", 1)
        atom = float(atom_part.rstrip(")"))
    kind, _, rest = text.partition("(")
    if not rest.endswith(")"):
        raise SpecViolation(f"cannot parse field spec {text!r}")
    params = tuple(float(p) for p in rest[:-1].split(",") if p.strip())
    return FieldSpec(kind.strip(), params, atom)


@dataclass(frozen=True)
class MomentSet:
    psi1: float
    psi2: float
    psi3: float
    psi4: float
    varsigma: float
    gamma: float
    # Assumption constants: P(|h|<t) <= p1*t on [0, eps0); density >= p2 on interval.
    constants: dict = field(default_factory=dict)


def _uniform_abs_moment(lo, hi, k):
    # int_lo^hi |x|^k dx / (hi - lo), antiderivative sign(x)|x|^(k+1)/(k+1)
    F = lambda x: math.copysign(abs(x) ** (k + 1), x) / (k + 1)
    return (F(hi) - F(lo)) / (hi - lo)


def _closed_moments(spec):
    kind, p = spec.kind, spec.params
    if kind == "uniform":
        lo, hi = p
        return ((lo + hi) / 2, (lo * lo + lo * hi + hi * hi) / 3,
                _uniform_abs_moment(lo, hi, 1), _uniform_abs_moment(lo, hi, 3))
    if kind == "two-sided-uniform":
        lo, hi, q = p
        return ((1 - 2 * q) * (lo + hi) / 2, (lo * lo + lo * hi + hi * hi) / 3,
                (lo + hi) / 2, (hi ** 4 - lo ** 4) / (4 * (hi - lo)))
    mu, sd = p
    z = mu / sd
    psi3 = sd * math.sqrt(2 / math.pi) * math.exp(-z * z / 2) + mu * (1 - 2 * stats.norm.cdf(-z))
    if mu == 0.0:
        psi4 = 2 * math.sqrt(2 / math.pi) * sd ** 3
    else:
        psi4 = spec.expect(lambda x: abs(x) ** 3)
    return mu, mu * mu + sd * sd, psi3, psi4


def _assumption_constants(spec):
    """Per-family constants witnessing the regularity assumption."""
    kind, p = spec.kind, spec.params
    if kind == "uniform":
        lo, hi = p
        if not lo < hi:
            raise SpecViolation(f"uniform needs lo < hi, got ({lo}, {hi})")
        return {"p1": 2.0 / (hi - lo), "eps0": math.inf, "p2": 1.0 / (hi - lo), "interval": (lo, hi)}
    if kind == "gaussian":
        mu, sd = p
        if not sd > 0:
            raise SpecViolation(f"gaussian needs stddev > 0, got {sd}")
        return {"p1": 2.0 / (sd * math.sqrt(2 * math.pi)), "eps0": math.inf,
                "p2": stats.norm.pdf(1.0) / sd, "interval": (mu - sd, mu + sd)}
    if kind == "two-sided-uniform":
        lo, hi, q = p
        if not 0 < lo < hi:
            raise SpecViolation(f"two-sided-uniform needs 0 < lo < hi, got ({lo}, {hi})")
        if not 0.0 <= q <= 1.0:
            raise SpecViolation(f"sign-flip probability must lie in [0, 1], got {q}")
        interval = (lo, hi) if q < 1 else (-hi, -lo)
        # |h| >= lo, so P(|h| < t) = 0 below lo: any p1 works there.
        return {"p1": 1.0, "eps0": lo, "p2": max(1 - q, q) / (hi - lo), "interval": interval}
    raise SpecViolation("a point mass has no absolutely continuous part")


def validate_field_spec(spec, m=0.0):
    """Check the regularity assumption for ``spec`` and return its moments.

    ``m`` enters only ``varsigma`` and ``gamma``.  Moments use closed forms
    where available and adaptive quadrature (absolute tolerance 1e-10)
    otherwise.
    """
    if spec.atom > 0:
        raise SpecViolation("a point mass at 0 violates P(|h| < t) <= p1 * t for every p1")
    constants = _assumption_constants(spec)
    psi1, psi2, psi3, psi4 = _closed_moments(spec)
    if not all(math.isfinite(v) for v in (psi1, psi2, psi3, psi4)):
        raise NonFiniteMoment(f"non-finite moment for {spec.describe()}")
    p_pos, p_neg = spec.prob_sign()
    gamma = math.log(2) - p_pos * math.log1p(m) - p_neg * math.log1p(-m)
    return MomentSet(psi1, psi2, psi3, psi4, -m * psi1 + psi3, gamma, constants)


def field_summaries(values, m):
    """``(Sigma_n, Gamma_n)`` for a disorder vector."""
    values = np.asarray(values, dtype=float)
    sigma = float(np.sum(np.abs(values)) - m * np.sum(values))
    gamma = float(len(values) * math.log(2) - np.sum(np.log1p(np.sign(values) * m)))
    return sigma, gamma


@dataclass(frozen=True)
class FieldSample:
    """Realized disorder ``h_1..h_n`` with its summaries at magnetisation ``m``."""

    values: np.ndarray
    m: float
    sigma_n: float
    gamma_n: float

    @classmethod
    def from_values(cls, values, m=0.0):
        values = np.array(values, dtype=float)
        values.setflags(write=False)
        m = as_bias(m).m
        return cls(values, m, *field_summaries(values, m))

    @property
    def n(self):
        return len(self.values)

    def summaries(self, m):
        if m == self.m:
            return self.sigma_n, self.gamma_n
        return field_summaries(self.values, m)

    def to_csv(self):
        lines = ["index,h"] + [f"{i},{v!r}" for i, v in enumerate(self.values.tolist())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, m=0.0):
        rows = [ln for ln in text.strip().splitlines()[1:] if ln.strip()]
        return cls.from_values([float(r.split(",")[1]) for r in rows], m)


def sample_field(spec, n, seed, bias=0.0):
    """Draw ``n`` i.i.d. disorder values; deterministic in ``(spec, n, seed)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.generator(seed, "field", n)
    return FieldSample.from_values(spec.sample(gen, n), as_bias(bias).m)


@dataclass(frozen=True)
class RegionReport:
    in_L: bool
    checks: dict  # name -> (holds, slack); slack >= 0 iff the predicate holds


def region_membership(h, bias):
    """Evaluate the three predicates defining the technical region.

    Slack conventions: ``n^1.5 - 2*pi*sum h^2``, ``2*pi*min h^2 - 16/(n^5 eps^8)``
    and ``min(Sigma_n - n^0.8, n^1.5 - Sigma_n)``.
    """
    if bias.epsilon is None:
        raise ValueError("region membership needs SpinBias.epsilon")
    n, eps = h.n, bias.epsilon
    sigma, _ = h.summaries(bias.m)
    sq = h.values ** 2
    s1 = n ** 1.5 - 2 * math.pi * float(np.sum(sq))
    s2 = 2 * math.pi * float(np.min(sq)) - 16.0 / (n ** 5 * eps ** 8)
    s3 = min(sigma - n ** 0.8, n ** 1.5 - sigma)
    checks = {
        "sum_sq": (s1 >= 0, s1),
        "min_sq": (s2 >= 0, s2),
        "sigma_range": (s3 > 0, s3),
    }
    return RegionReport(all(ok for ok, _ in checks.values()), checks)
