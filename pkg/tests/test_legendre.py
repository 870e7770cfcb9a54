import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from remlab.errors import OutOfRange
from remlab.field import FieldSample, FieldSpec, SpinBias, region_membership, sample_field
from remlab.legendre import (asymptotic_solve, coupled_objective, coupled_solve, g_star, invert_rate,
                             lambda_hat, legendre_rate, limit_constants, make_bracket, solve_tilt)
from remlab.mgf import limit_mgf, mgf_n

UNI = FieldSpec.uniform(0.5, 1.5)


def binary_rate(p):
    return (1 + p) / 2 * math.log1p(p) + (1 - p) / 2 * math.log1p(-p)


def test_tilt_closed_form():
    h = FieldSample.from_values([1, 1, 1, 1])
    p = solve_tilt(h, 0.0, 2.0)
    assert p.tilt == pytest.approx(math.atanh(0.5), abs=1e-13)
    assert p.rate == pytest.approx(4 * binary_rate(0.5), abs=1e-13)


def test_tilt_near_zero():
    h = sample_field(UNI, 12, 1, 0.3)
    assert solve_tilt(h, 0.3, 1e-12 * h.sigma_n).tilt < 1e-10


def test_fenchel_young_equality():
    h = sample_field(UNI, 12, 2, 0.3)
    a = 0.5 * h.sigma_n
    p = solve_tilt(h, 0.3, a)
    M = mgf_n(h, 0.3, p.tilt)
    assert abs(p.rate + M.value - p.tilt * a) < 1e-10
    assert abs(M.d1 - a) < 1e-11 * max(1, a)
    assert 0 < p.rate < h.gamma_n


def test_rate_matches_numerical_sup():
    h = sample_field(FieldSpec.gaussian(0, 1), 10, 5, -0.2)
    a = 0.35 * h.sigma_n
    res = optimize.minimize_scalar(lambda l: -(l * a - mgf_n(h, -0.2, l).value),
                                   bounds=(0, 50), method="bounded", options={"xatol": 1e-12})
    assert legendre_rate(h, -0.2, a) == pytest.approx(-res.fun, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0, 5), frac=st.floats(0.01, 0.95),
       m=st.sampled_from([-0.5, 0.0, 0.3, 0.6]))
def test_fenchel_young_inequality(seed, lam, frac, m):
    h = sample_field(UNI, 14, seed, m)
    a = frac * h.sigma_n
    p = solve_tilt(h, m, a)
    assert lam * a <= p.rate + mgf_n(h, m, lam).value + 1e-9


def test_rate_endpoints():
    h = FieldSample.from_values([1.0, 2.0], 0.2)
    assert legendre_rate(h, 0.2, 0.0) == 0.0
    assert legendre_rate(h, 0.2, h.sigma_n) == h.gamma_n
    with pytest.raises(OutOfRange):
        solve_tilt(h, 0.2, h.sigma_n * 1.01)


def test_invert_rate_binary():
    h = FieldSample.from_values([1, 1])
    p = invert_rate(h, 0.0, 2 * binary_rate(0.5))
    assert p.a == pytest.approx(1.0, abs=1e-11)


def test_invert_rate_near_top():
    n = 6
    h = FieldSample.from_values(np.ones(n))
    p = invert_rate(h, 0.0, n * math.log(2) - 1e-6)
    assert n - 1e-3 < p.a < n


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), frac=st.floats(1e-4, 0.999), m=st.floats(-0.8, 0.8))
def test_rate_round_trip(seed, frac, m):
    h = sample_field(FieldSpec.gaussian(0, 1), 9, seed, m)
    c = frac * h.gamma_n
    p = invert_rate(h, m, c)
    assert abs(legendre_rate(h, m, p.a) - c) < 1e-10 * max(1, c)


def test_monotone_duals():
    h = sample_field(UNI, 16, 3, 0.3)
    a = np.linspace(0.01, 0.99, 60) * h.sigma_n
    tilts = [solve_tilt(h, 0.3, x).tilt for x in a]
    rates = [solve_tilt(h, 0.3, x).rate for x in a]
    assert np.all(np.diff(tilts) > 0) and np.all(np.diff(rates) > 0)
    c = np.linspace(0.01, 0.99, 60) * h.gamma_n
    levels = [invert_rate(h, 0.3, x).a for x in c]
    assert np.all(np.diff(levels) > 0)


def test_rate_derivatives():
    h = sample_field(UNI, 16, 4, 0.3)
    a, s = 0.4 * h.sigma_n, 1e-4
    f = lambda x: legendre_rate(h, 0.3, x)
    p = solve_tilt(h, 0.3, a)
    d1 = (f(a + s) - f(a - s)) / (2 * s)
    d2 = (f(a + s) - 2 * f(a) + f(a - s)) / s ** 2
    assert d1 == pytest.approx(p.tilt, rel=1e-5)
    assert d2 == pytest.approx(1 / p.curvature, rel=1e-4)


def test_bracket_and_coupled_solution():
    h = sample_field(UNI, 16, 5, 0.3)
    C = 0.2154 * 16
    sol = coupled_solve(h, 0.3, C, 0.5)
    assert all(abs(r) < 1e-9 for r in sol.residuals)
    br = sol.bracket
    assert br.a_minus <= sol.a_tilde <= br.a_plus
    assert 0 < br.a_minus <= br.a_plus < h.sigma_n
    assert abs(coupled_objective(h, 0.3, C, sol.a_tilde)) < 1e-9
    assert sol.tilt_x > sol.tilt_tilde


def test_coupled_x_zero():
    h = sample_field(UNI, 20, 6, 0.3)
    sol = coupled_solve(h, 0.3, 4.0)
    assert sol.tilt_x == sol.tilt_tilde


def test_coupled_smallest_root():
    h = sample_field(UNI, 20, 8, 0.3)
    sol = coupled_solve(h, 0.3, 4.0)
    grid = np.linspace(sol.bracket.a_minus, sol.a_tilde, 200)[:-1]
    assert all(coupled_objective(h, 0.3, 4.0, a) < 0 for a in grid)


def test_coupled_many_seeds():
    for n in (16, 20):
        for seed in range(40):
            h = sample_field(UNI, n, seed, 0.3)
            sol = coupled_solve(h, 0.3, n * 0.2154, 0.5)
            assert max(abs(r) for r in sol.residuals) < 1e-9


def test_coupled_out_of_range():
    h = sample_field(UNI, 16, 5, 0.3)
    with pytest.raises(OutOfRange):
        coupled_solve(h, 0.3, 3.0, h.sigma_n)
    with pytest.raises(OutOfRange):
        coupled_solve(h, 0.3, h.gamma_n + 1)


def test_bracket_clamping():
    h = FieldSample.from_values(np.ones(8))
    br = make_bracket(h, 0.0, 1.0)
    assert br.clamped
    assert br.c_minus == pytest.approx(1e-6 * 8 * math.log(2))
    assert br.a_minus < br.a_plus
    assert br.above_threshold is None
    assert make_bracket(h, SpinBias(0.0, 0.25), 1.0).above_threshold is False


def test_g2_bounds_on_region_members():
    eps = 0.1
    for seed in range(5):
        n = 200
        h = sample_field(UNI, n, seed, 0.3)
        assert region_membership(h, SpinBias(0.3, eps)).in_L
        for lam in (0.01, 0.3, 1.0, 5.0):
            M = mgf_n(h, 0.3, lam)
            lhs = 4 / (n ** 6 * eps ** 4) * (h.gamma_n + M.value - lam * M.d1) ** 2
            assert lhs <= 2 * math.pi * M.d2 <= n ** 1.5


def test_binary_asymptotic_fixture():
    sol = asymptotic_solve(FieldSpec.point(1.0), 0.0, 0.3)
    ref = optimize.brentq(lambda a: binary_rate(a) - 0.3, 0, 1 - 1e-15, xtol=1e-15)
    assert sol.a_hat == pytest.approx(ref, abs=1e-9)
    assert sol.lambda_hat == pytest.approx(math.atanh(ref), abs=1e-9)
    assert sol.a_hat == pytest.approx(0.732, abs=2e-3)
    assert sol.lambda_hat == pytest.approx(0.933, abs=2e-3)


def test_asymptotic_stationarity():
    for spec, m in ((UNI, 0.3), (FieldSpec.gaussian(0, 1), -0.5)):
        _, gamma = limit_constants(spec, m)
        sol = asymptotic_solve(spec, m, 0.4 * gamma)
        e = limit_mgf(spec, m, sol.lambda_hat, tol=1e-11)
        assert abs(e.d1 - sol.a_hat) < 1e-9
        assert abs(g_star(spec, m, sol.a_hat) - 0.4 * gamma) < 1e-9


def test_asymptotic_small_c():
    sol = asymptotic_solve(UNI, 0.3, 1e-8)
    assert sol.a_hat < 1e-3 and sol.lambda_hat < 1e-3


def test_asymptotic_out_of_range():
    with pytest.raises(OutOfRange):
        asymptotic_solve(UNI, 0.3, 1.0)
    with pytest.raises(OutOfRange):
        lambda_hat(UNI, 0.3, 0.7)


def _path_errors(seed):
    # A_n(h, n c)/n and Lambda_n along one h-path (prefixes of a single draw)
    c = 0.5 * (math.log(2) - math.log(1.3))
    ref = asymptotic_solve(UNI, 0.3, c)
    path = sample_field(UNI, 2 ** 14, seed, 0.3).values
    errs = []
    for k in range(8, 15):
        n = 2 ** k
        p = invert_rate(FieldSample.from_values(path[:n], 0.3), 0.3, n * c)
        errs.append(max(abs(p.a / n - ref.a_hat), abs(p.tilt - ref.lambda_hat)))
    return np.array(errs)


def test_finite_n_converges_to_asymptotic():
    for seed in range(3):
        assert _path_errors(seed)[-1] < 0.02


@pytest.mark.xfail(strict=True, reason="O(n^-1/2) fluctuations along a path are not monotone")
def test_finite_n_error_strictly_decreasing():
    assert np.all(np.diff(_path_errors(0)) < 0)
