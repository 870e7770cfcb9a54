import math

import numpy as np
import pytest

from remlab.enumeration import Enumerator, configuration
from remlab.errors import InsufficientData
from remlab.field import FieldSample, FieldSpec, sample_field
from remlab.legendre import coupled_solve
from remlab.process import (ThinningSpec, Window, compare_stats, kernel_eval, ppp_reference,
                            realize_process, retained_energies, thinning_prob)

UNI = FieldSpec.uniform(0.5, 1.5)


def test_thinning_spec_constants():
    s = ThinningSpec(0.5, 0.3, 20)
    assert s.c == pytest.approx(0.5 * (math.log(2) - math.log(1.3)), rel=1e-15)
    assert s.c == pytest.approx(0.2153914580, abs=1e-10)
    assert s.delta == pytest.approx(s.c, rel=1e-15)
    assert s.scale == pytest.approx(math.exp(20 * s.c), rel=1e-14)
    with pytest.raises(ValueError):
        ThinningSpec(1.0, 0.3, 20)


def test_thinning_uniform_case():
    s = ThinningSpec(0.5, 0.0, 10)
    for rank in (0, 17, 1023):
        assert thinning_prob(configuration(rank, 10), 0.0, s) == pytest.approx(2 ** -5, rel=1e-14)


def test_thinning_bound_and_mass():
    for m in (0.0, 0.3, -0.7):
        s = ThinningSpec(0.5, m, 10)
        q = np.array([thinning_prob(configuration(r, 10), m, s) for r in range(2 ** 10)])
        assert np.all(q <= math.exp(-10 * s.delta) * (1 + 1e-12))
        assert math.fsum(q) == pytest.approx(s.scale, rel=1e-12)
    assert ThinningSpec(0.5, 0.0, 10).scale == pytest.approx(32.0, rel=1e-14)


def test_enumerator_matches_configurations():
    h = sample_field(UNI, 18, 2, 0.3)
    e, lp = Enumerator(h.values, 0.3).all()
    for r in (0, 5, 70000, 2 ** 18 - 1):
        tau = configuration(r, 18)
        assert e[r] == pytest.approx(np.dot(h.values, tau - 0.3), abs=1e-12)
        assert lp[r] == pytest.approx(np.sum(np.log((1 + 0.3 * tau) / 2)), abs=1e-12)


def test_retained_count_matches_scale():
    n = 12
    spec = ThinningSpec(0.5, 0.0, n)
    h = FieldSample.from_values(np.ones(n))
    totals = np.array([len(retained_energies(h, 0.0, spec, s)) for s in range(200)])
    var = 2 ** n * 2 ** -6 * (1 - 2 ** -6)
    assert abs(totals.mean() - 64) < 4 * math.sqrt(var / 200)


def test_retained_count_small_rho():
    n = 10
    spec = ThinningSpec(1e-6, 0.3, n)
    h = sample_field(UNI, n, 1, 0.3)
    totals = np.array([len(retained_energies(h, 0.3, spec, s)) for s in range(400)])
    assert abs(totals.mean() - spec.scale) < 4 * math.sqrt(spec.scale / 400)


def test_realize_process_deterministic():
    h = sample_field(UNI, 20, 3, 0.3)
    spec = ThinningSpec(0.5, 0.3, 20)
    w = Window(-2.0, 6.0)
    a = realize_process(h, 0.3, spec, w, 11, threads=1)
    b = realize_process(h, 0.3, spec, w, 11, threads=4)
    assert np.array_equal(a.points, b.points) and a.retained_total == b.retained_total
    assert np.all(np.diff(a.points) >= 0)
    assert np.all((a.points >= w.x_lo) & (a.points <= w.x_hi))
    c = realize_process(h, 0.3, spec, w, 12)
    assert not np.array_equal(a.points, c.points)


def test_uniforms_independent_of_field():
    # the same seed retains the same configurations whatever h is
    spec = ThinningSpec(0.5, 0.0, 12)
    h1 = FieldSample.from_values(np.arange(1.0, 13.0))
    h2 = FieldSample.from_values(np.ones(12))
    e1 = retained_energies(h1, 0.0, spec, 5)
    e2 = retained_energies(h2, 0.0, spec, 5)
    assert len(e1) == len(e2)


def test_kernel_whole_space_and_monotone():
    h = sample_field(UNI, 16, 2, 0.3)
    C = 16 * 0.2154
    sol = coupled_solve(h, 0.3, C)
    k = kernel_eval(h, 0.3, C, -sol.a_tilde - 2 * np.sum(np.abs(h.values)))
    assert k == pytest.approx(math.exp(C), rel=1e-12)
    ks = kernel_eval(h, 0.3, C, np.linspace(-3, 3, 25))
    assert np.all(np.diff(ks) <= 0)


def test_kernel_tilted_mode_beyond_enumeration():
    h = sample_field(UNI, 30, 2, 0.3)
    C = 30 * 0.2154
    k = kernel_eval(h, 0.3, C, 0.5, samples=20000, seed=1)
    assert 0 < k < math.exp(C)


def test_process_mean_count_matches_kernel():
    # E[count in [0, 1]] = e^C P(H - A~ in [0, 1]) because the thinning scale is e^{n c}
    n, R = 14, 300
    spec = ThinningSpec(0.5, 0.3, n)
    w = Window(0.0, 1.0)
    counts, kern = [], []
    for r in range(R):
        h = sample_field(UNI, n, r, 0.3)
        sol = coupled_solve(h, 0.3, n * spec.c)
        counts.append(len(realize_process(h, 0.3, spec, w, r, solution=sol).points))
        k = kernel_eval(h, 0.3, n * spec.c, np.array([0.0, np.nextafter(1.0, 2.0)]))
        kern.append(k[0] - k[1])
    counts, kern = np.array(counts), np.array(kern)
    se = math.sqrt(counts.var(ddof=1) / R + kern.var(ddof=1) / R)
    assert abs(counts.mean() - kern.mean()) < 4 * se


def test_ppp_masses():
    assert Window(0.0, 50.0).mass(1.0) == pytest.approx(1.0, abs=1e-15)
    assert Window(0.0, 1.0).mass(2.0) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-15)
    assert round(Window(0.0, 1.0).mass(2.0), 5) == 0.43233


def test_ppp_mean_count():
    w = Window(0.0, 1.0)
    counts = np.array([ppp_reference(2.0, w, 1, i).retained_total for i in range(10**4)])
    assert abs(counts.mean() - w.mass(2.0)) < 4 * counts.std(ddof=1) / 100


def test_ppp_points_in_window():
    w = Window(-1.0, 3.0)
    r = ppp_reference(1.0, w, 4)
    assert np.all(np.diff(r.points) >= 0)
    assert np.all((r.points >= w.x_lo) & (r.points <= w.x_hi))


def test_compare_stats_requires_data():
    w = Window(0.0, 1.0)
    with pytest.raises(InsufficientData):
        compare_stats([ppp_reference(1.0, w, 1, i) for i in range(99)], 1.0, w, 4)


def test_compare_stats_self_consistency():
    lam, w = 1.0, Window(-4.0, 2.0)
    runs = [[ppp_reference(lam, w, s, i) for i in range(100)] for s in range(40)]
    ps = [compare_stats(r, lam, w, 6).ks_p for r in runs]
    assert np.mean(np.array(ps) > 0.01) >= 0.95

    st = compare_stats([ppp_reference(lam, w, 99, i) for i in range(500)], lam, w, 6, [0.1, 0.5])
    big = st.mean_count >= 5
    assert big.any()
    assert np.all((st.dispersion[big] >= 0.8) & (st.dispersion[big] <= 1.2))
    assert np.all(np.abs(st.mean_count - st.predicted) < 4 * st.count_stderr)
    for theta, emp, pred, se in st.laplace_pairs:
        assert abs(emp - pred) < 4 * se + 1e-12


def test_window_parse():
    assert Window.parse("-1.5:3") == Window(-1.5, 3.0)
    with pytest.raises(ValueError):
        Window(1.0, 1.0)
