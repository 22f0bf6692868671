import math
from itertools import combinations

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings

from todakp import OrderRangeError, SizeError, TimeVector, heat_basis, kp_field, log_tau_all, make_soliton_data, tau
from todakp.tau_engine import log_tau_cumulants, phases

from conftest import exact_tau0, soliton_data, times


def mp_log_tau(kappa, a, k, x, y=0, t3=0):
    """log of the k-fold Wronskian of f_i = sum_j a_j kappa_j^(i-1) E_j, with mpmath."""
    with mpmath.workdps(max(mpmath.mp.dps, 50)):
        kap = [mpmath.mpf(v) for v in kappa]
        E = [a[j] * mpmath.exp(kap[j] * x + kap[j] ** 2 * y + kap[j] ** 3 * t3) for j in range(len(kap))]
        W = mpmath.matrix(k, k)
        for i in range(k):
            for m in range(k):
                W[i, m] = mpmath.fsum(E[j] * kap[j] ** (i + m) for j in range(len(kap)))
        return +mpmath.log(mpmath.det(W))


def test_time_vector_basics():
    t = TimeVector((0.5, -1.0))
    assert (-t).times == (-0.5, 1.0)
    assert (t + 0.25).times == (0.75, -1.0)
    assert t.shifted(3, 2.0).times == (0.5, -1.0, 2.0)
    assert t.norm_inf() == 1.0
    with pytest.raises(SizeError):
        TimeVector(tuple(range(9)))
    with pytest.raises(SizeError):
        TimeVector((float("nan"),))


def test_heat_basis_at_zero(worked):
    hb = heat_basis(worked, 0.0, 2)
    assert np.allclose(np.exp(hb.log_E), 1.0)
    assert hb.mu[0] == pytest.approx(1.0)
    assert hb.mu[1] == pytest.approx(0.75)
    assert hb.mu[2] == pytest.approx(0.25 + 1.0)


def test_heat_basis_solves_heat_hierarchy(worked):
    # d mu_0 / dt_l = mu_l, by central differences
    t = TimeVector((0.2, -0.1, 0.3))
    hb = heat_basis(worked, t, 3)
    h = 1e-6
    for l in (1, 2, 3):
        fd = (heat_basis(worked, t.shifted(l, h), 0).mu[0] - heat_basis(worked, t.shifted(l, -h), 0).mu[0]) / (2 * h)
        assert fd == pytest.approx(hb.mu[l], rel=1e-8)


def test_heat_basis_rejects_negative_order(worked):
    with pytest.raises(OrderRangeError):
        heat_basis(worked, 0.0, -1)


def test_tau_worked_exact(worked):
    for k, want in enumerate([1, 1, 11 / 16, 1 / 8]):
        assert tau(worked, k, 0.0).value == pytest.approx(want, rel=1e-14)
        assert float(exact_tau0(worked.kappa, worked.a, k)) == pytest.approx(want, rel=1e-15)


@settings(max_examples=25, deadline=None)
@given(soliton_data(n_max=5), times)
def test_tau_matches_wronskian(d, t):
    tv = TimeVector(tuple(t)).padded(3)
    for k in range(1, d.n + 1):
        want = mp_log_tau(d.kappa, d.a, k, *tv)
        got, _ = log_tau_cumulants(d, k, TimeVector(tuple(tv)), 0)
        assert got == pytest.approx(float(want), abs=1e-11)


def test_tau_is_stable_at_large_times():
    d = make_soliton_data([-2, -0.5, 1, 2], [1, 1, 1, 1])
    lt, cum = log_tau_cumulants(d, 2, TimeVector((400.0, 0, 30.0)), 2)
    assert math.isfinite(lt) and np.all(np.isfinite(cum))
    assert np.all(np.isfinite(kp_field(d, 2, [[400.0, 0, 30.0]])))


def test_tau_order_range(worked):
    with pytest.raises(OrderRangeError):
        tau(worked, 4, 0.0)
    with pytest.raises(OrderRangeError):
        kp_field(worked, -1, [[0, 0, 0]])


def test_log_tau_all_shapes(worked):
    logs, cums = log_tau_all(worked, 0.1, 2)
    assert logs.shape == (4,) and cums.shape == (4, 2)
    assert logs[0] == 0.0


def test_cumulants_are_log_tau_derivatives():
    d = make_soliton_data([-1.1, 0.3, 0.8, 1.9], [0.3, 0.1, 0.4, 0.2])
    t = TimeVector((0.4, -0.3, 0.2))
    _, cum = log_tau_cumulants(d, 2, t, 4)
    f = lambda x: mp_log_tau(d.kappa, d.a, 2, x, -0.3, 0.2)
    with mpmath.workdps(40):
        want = [float(mpmath.diff(f, mpmath.mpf("0.4"), order)) for order in range(1, 5)]
    assert np.allclose(cum, want, rtol=1e-9, atol=1e-12)


def test_vacuum_field_vanishes(worked):
    grid = np.random.default_rng(0).uniform(-3, 3, (20, 3))
    assert np.all(kp_field(worked, 0, grid) == 0)


def test_field_against_second_derivative_oracle():
    d = make_soliton_data([-1.3, 0.2, 0.9, 1.7], [1, 2, 1, 3])
    pts = [(0.1, -0.2, 0.3), (-1.0, 0.5, -0.4), (2.0, 0.0, 0.1)]
    for p in pts:
        with mpmath.workdps(40):
            want = 2 * mpmath.diff(lambda x: mp_log_tau(d.kappa, d.a, 2, x, p[1], p[2]), mpmath.mpf(p[0]), 2)
        assert kp_field(d, 2, [p])[0] == pytest.approx(float(want), rel=1e-10)


def test_field_solves_kp():
    # (4 u_t - 6 u u_x - u_xxx)_x = 3 u_yy for the mp oracle, which the float field matches above
    d = make_soliton_data([-1.3, 0.2, 0.9, 1.7], [1, 2, 1, 3])
    with mpmath.workdps(40):
        x0, y0, t0 = mpmath.mpf("0.1"), mpmath.mpf("-0.2"), mpmath.mpf("0.3")

    def u(x, y, t):
        return 2 * mpmath.diff(lambda xx: mp_log_tau(d.kappa, d.a, 2, xx, y, t), x, 2)

    def bracket(x):
        return (
            4 * mpmath.diff(lambda t: u(x, y0, t), t0)
            - 6 * u(x, y0, t0) * mpmath.diff(lambda xx: u(xx, y0, t0), x)
            - mpmath.diff(lambda xx: u(xx, y0, t0), x, 3)
        )

    with mpmath.workdps(40):
        lhs = mpmath.diff(bracket, x0)
        rhs = 3 * mpmath.diff(lambda y: u(x0, y, t0), y0, 2)
    assert abs(lhs - rhs) < 1e-12 * max(1, abs(rhs))


def test_one_soliton_closed_form():
    d = make_soliton_data([-1, 1], [1, 1])
    x = np.linspace(-5, 5, 101)
    grid = np.column_stack((x, np.zeros_like(x), np.zeros_like(x)))
    u = kp_field(d, 1, grid)
    assert np.max(np.abs(u - 2 * np.cosh(x) ** -2)) < 1e-12
    assert u.max() == pytest.approx(2.0, abs=1e-12)


def test_grid_must_be_triples(worked):
    with pytest.raises(SizeError):
        kp_field(worked, 1, [[0.0, 1.0]])


def test_phases_polynomial():
    assert np.allclose(phases(np.array([2.0]), (1.0, 1.0, 1.0)), [14.0])


def test_tau_equals_cauchy_binet_sum():
    d = make_soliton_data([-0.5, 0.5, 1.5], [1, 2, 3])
    lt0, _ = log_tau_cumulants(d, 2, TimeVector((0.0,)), 0)
    direct = sum(
        d.a[i] * d.a[j] * (d.kappa[j] - d.kappa[i]) ** 2 for i, j in combinations(range(3), 2)
    )
    assert math.exp(lt0) == pytest.approx(direct, rel=1e-14)
