from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.linalg import expm

from todakp import (
    DegenerateFlowError,
    SpectrumMismatchError,
    TimeVector,
    TodaState,
    ba_vectors,
    bruhat_flow,
    flow_invariant_residuals,
    jacobi_matrix,
    make_soliton_data,
    minor_polynomials,
    principal_spectrum,
    spectral_residues,
)
from todakp.toda_core import (
    evaluate_minors,
    first_flow_residual,
    hamiltonian_drift,
    hamiltonians,
    lax_residual,
    minor_identity_residuals,
    node_minors,
    probe_points,
    reflect,
    third_identity_residual,
)

from conftest import exact_jacobi0, soliton_data, times


def test_jacobi_worked_exact(worked):
    s = jacobi_matrix(worked, 0.0)
    aa, bb = exact_jacobi0(worked.kappa, worked.a)
    assert aa == [Fraction(11, 16), Fraction(32, 121)]
    assert bb == [Fraction(3, 4), Fraction(51, 44), Fraction(12, 11)]
    assert np.allclose(s.a, [float(x) for x in aa], rtol=1e-14)
    assert np.allclose(s.b, [float(x) for x in bb], rtol=1e-14)


def test_jacobi_uniform_exact(uniform3):
    s = jacobi_matrix(uniform3, 0.0)
    assert np.allclose(s.a, [2 / 3, 1 / 3], rtol=1e-14)
    assert np.allclose(s.b, [1, 1, 1], rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(soliton_data(n_max=7), times)
def test_isospectral_trace_and_positivity(d, t):
    s = jacobi_matrix(d, t)
    assert np.all(s.a > 0)
    assert np.allclose(np.sort(s.spectrum()), d.kappa, atol=1e-9 * (d.kappa[-1] - d.kappa[0]))
    assert sum(s.b) == pytest.approx(sum(d.kappa), rel=1e-10, abs=1e-12)


def test_extended_precision_agrees(worked):
    t = TimeVector((0.3, -0.2))
    s = jacobi_matrix(worked, t)
    e = jacobi_matrix(worked, t, "extended-test")
    assert np.allclose(s.entries(), e.entries(), rtol=1e-13)


def test_minor_polynomials_worked(worked):
    m = minor_polynomials(jacobi_matrix(worked, 0.0))
    assert np.allclose(m.delta_hat[1], [-0.75, 1])
    assert np.allclose(m.delta_hat[2], [2 / 11, -21 / 11, 1])
    assert m.delta[0] == pytest.approx([1]) and m.delta_hat[0] == pytest.approx([1])
    assert m.eval_delta(3, 5.0) == pytest.approx(60.0, rel=1e-14)
    assert np.allclose(m.delta[3], np.poly([0, 1, 2])[::-1], atol=1e-14)


def test_third_identity_at_five_exact(worked):
    # Delta_2(5) hatDelta_1(5) - a_1 Delta_1(5) = 60, in fractions
    aa, bb = exact_jacobi0(worked.kappa, worked.a)
    z = Fraction(5)
    D1 = z - bb[2]
    D2 = (z - bb[1]) * D1 - aa[1]
    H1 = z - bb[0]
    assert D2 * H1 - aa[0] * D1 == 60
    assert third_identity_residual(jacobi_matrix(worked, 0.0), 5.0) < 1e-15


@settings(max_examples=30, deadline=None)
@given(soliton_data(n_max=7), times)
def test_minor_identities_against_determinants(d, t):
    s = jacobi_matrix(d, t)
    r = minor_identity_residuals(s, probe_points(d.kappa))
    assert max(r.values()) < 1e-9


@settings(max_examples=20, deadline=None)
@given(soliton_data(n_max=7))
def test_leading_minor_roots_interlace(d):
    m = minor_polynomials(jacobi_matrix(d, 0.3))
    prev = None
    for j in range(1, d.n + 1):
        roots = np.sort(np.roots(m.delta_hat[j][::-1]).real)
        if prev is not None:
            assert np.all(roots[:-1] < prev) and np.all(prev < roots[1:])
        prev = roots


def test_principal_spectrum_matches_determinant_roots(worked):
    s = jacobi_matrix(worked, 0.0)
    m = minor_polynomials(s)
    assert np.allclose(principal_spectrum(s, "leading", 2), np.sort(np.roots(m.delta_hat[2][::-1])))
    assert np.allclose(principal_spectrum(s, "trailing", 2), [(9 - 17**0.5) / 8, (9 + 17**0.5) / 8])
    assert principal_spectrum(s, "leading", 0).size == 0


def test_node_minors_match_recurrence():
    d = make_soliton_data([-1.5, -0.2, 0.4, 1.1, 1.8], [0.1, 0.3, 0.2, 0.25, 0.15])
    t = TimeVector((0.3, -0.5, 0.2))
    D, H = node_minors(d, t)
    D2, H2 = evaluate_minors(jacobi_matrix(d, t), d.kappa_array)
    assert np.allclose(D, D2, atol=1e-12) and np.allclose(H, H2, atol=1e-12)


def test_reflection_swaps_minor_families(worked):
    s = jacobi_matrix(worked, 0.2)
    m, r = minor_polynomials(s), minor_polynomials(reflect(s))
    for x, y in zip(m.delta, r.delta_hat):
        assert np.allclose(x, y)


def test_bruhat_identity_at_zero(worked):
    s0 = jacobi_matrix(worked, 0.0)
    assert bruhat_flow(s0, 0.0).entries() == pytest.approx(s0.entries(), abs=1e-15)


def test_bruhat_matches_tau_route(worked):
    s = bruhat_flow(jacobi_matrix(worked, 0.0), 0.3)
    assert np.allclose(s.entries(), jacobi_matrix(worked, 0.3).entries(), rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(soliton_data(n_max=7), times)
def test_bruhat_matches_tau_route_random(d, t):
    s = bruhat_flow(jacobi_matrix(d, 0.0), t)
    assert np.allclose(s.entries(), jacobi_matrix(d, t).entries(), rtol=1e-9, atol=1e-9)


def test_bruhat_breakdown_reports_minor():
    # a state outside the configuration space whose flow matrix has a vanishing leading minor
    bad = TodaState((-1.0,), (0.0, 0.0), TimeVector())
    t = TimeVector((np.pi / 2,))
    psi = expm(bad.matrix() * t.times[0])
    assert abs(psi[0, 0]) < 1e-12
    with pytest.raises(DegenerateFlowError) as ei:
        bruhat_flow(bad, t)
    assert ei.value.minor_index == 1


def test_lax_residual_worked(worked):
    r = flow_invariant_residuals(worked, 0.2, 1, 1e-5, "extended-test")
    assert r["lax_residual"] < 1e-6
    assert 3.2 <= r["richardson_ratio"] <= 4.8
    assert r["hamiltonian_drift"] < 1e-9


@pytest.mark.parametrize("j", [1, 2, 3])
def test_lax_higher_flows(j):
    d = make_soliton_data([-1.2, -0.1, 0.7, 1.5], [0.2, 0.3, 0.1, 0.4])
    t = TimeVector((0.2, 0.4, -0.3))
    r1 = lax_residual(d, t, j, 1e-5, "extended-test")
    r2 = lax_residual(d, t, j, 5e-6, "extended-test")
    assert r1 < 1e-6
    assert 3.2 <= r1 / r2 <= 4.8


def test_flow_invariant_argument_checks(worked):
    with pytest.raises(ValueError):
        flow_invariant_residuals(worked, 0.0, 1, -1.0)
    with pytest.raises(ValueError):
        flow_invariant_residuals(worked, 0.0, 0, 1e-5)


def test_first_flow_equations(worked):
    assert first_flow_residual(worked, TimeVector((0.4, 0.1)), precision="extended-test") < 1e-8


def test_hamiltonians_conserved():
    d = make_soliton_data([-1.0, 0.0, 0.5, 2.0], [0.4, 0.1, 0.3, 0.2])
    ts = [TimeVector((s, 0.3, -0.2)) for s in np.linspace(-1, 1, 9)]
    assert hamiltonian_drift(d, ts) < 1e-9
    H = hamiltonians(jacobi_matrix(d, 0.0).matrix(), 4)
    kap = np.array(d.kappa)
    assert np.allclose(H, [np.sum(kap ** (j + 1)) / (j + 1) for j in range(1, 5)], rtol=1e-13)


def test_spectral_residues_worked(worked):
    a, ahat = spectral_residues(jacobi_matrix(worked, 0.0), worked.kappa)
    assert np.allclose(a, [0.5, 0.25, 0.25], rtol=1e-13)
    assert np.allclose(ahat, [1 / 11, 8 / 11, 2 / 11], rtol=1e-13)


def test_spectral_residues_reject_wrong_spectrum(worked):
    with pytest.raises(SpectrumMismatchError):
        spectral_residues(jacobi_matrix(worked, 0.0), [0, 1, 2.5])


@settings(max_examples=20, deadline=None)
@given(soliton_data(n_max=7), times)
def test_ba_vectors_glue_at_nodes(d, t):
    for z in d.kappa:
        p = ba_vectors(d, z, t)
        assert np.allclose(p.psi, p.psi_sigma, rtol=1e-9, atol=1e-9)


def test_ba_vectors_are_eigenvectors(worked):
    # psi is a null vector of the symmetrized matrix minus zeta at every node
    s = jacobi_matrix(worked, 0.25)
    c = s.symmetrizer()
    S = np.diag(c) @ s.matrix() @ np.diag(1 / c)
    assert np.allclose(S, S.T)
    for z in worked.kappa:
        psi = ba_vectors(worked, z, 0.25).psi
        assert np.allclose(S @ psi, z * psi, atol=1e-12)
