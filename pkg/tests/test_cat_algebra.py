import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.linalg import expm

from catqudit.cat_algebra import (DEFAULT_THRESHOLD, CatParams, TruncationError, cat_fock,
                                  cat_norm_sq, cat_overlap_sq, certify_quasiorthogonality,
                                  choose_parameters, coherent_fock, coherent_overlap,
                                  fock_truncation, normalized_cat_fock, parameter_inequalities,
                                  poisson_tail)
from catqudit.hilbert import annihilation


def displaced_vacuum(beta, n):
    """Coherent state from the displacement operator on an enlarged space (independent oracle)."""
    big = n + 60
    a = annihilation(big)
    v = expm(beta * a.conj().T - np.conj(beta) * a)[:, 0]
    return v[:n]


def brute_overlap_sq(m, n, alpha, phi):
    N = fock_truncation(alpha)
    cm = sum(displaced_vacuum(s * alpha * np.exp(1j * m * phi), N) for s in (1, -1))
    cn = sum(displaced_vacuum(s * alpha * np.exp(1j * n * phi), N) for s in (1, -1))
    return abs(np.vdot(cm, cn)) ** 2


def test_coherent_fock_matches_displacement():
    beta = 1.7 * np.exp(0.4j)
    np.testing.assert_allclose(coherent_fock(beta, 30), displaced_vacuum(beta, 30), atol=1e-12)


@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_coherent_overlap_modulus(b, c):
    assert abs(coherent_overlap(b, c)) ** 2 == pytest.approx(math.exp(-abs(b - c) ** 2), rel=1e-9)


@pytest.mark.parametrize("d,s", [(2, 1), (3, 1), (4, 2), (6, 1)])
def test_closed_form_against_fock_oracle(d, s):
    p = choose_parameters(d, s)
    for m in range(d):
        for n in range(m, d):
            assert cat_overlap_sq(m, n, p.alpha, p.phi) == pytest.approx(
                brute_overlap_sq(m, n, p.alpha, p.phi), abs=1e-8)


def test_diagonal_is_norm_squared():
    a = 2.3
    assert cat_overlap_sq(1, 1, a, 0.4) == pytest.approx(cat_norm_sq(a) ** 2, rel=1e-12)
    v = cat_fock(a, 1, 0.4)
    assert np.vdot(v, v).real == pytest.approx(cat_norm_sq(a), rel=1e-10)


@given(st.integers(0, 8), st.integers(0, 8), st.floats(0.5, 6), st.floats(-3, 3))
def test_overlap_symmetric(m, n, a, phi):
    assert cat_overlap_sq(m, n, a, phi) == pytest.approx(cat_overlap_sq(n, m, a, phi), rel=1e-12, abs=1e-300)


def test_phase_inverse_family_has_same_overlaps():
    p = choose_parameters(5)
    for n in range(1, 5):
        assert cat_overlap_sq(0, n, p.alpha, -p.phi) == pytest.approx(cat_overlap_sq(0, n, p.alpha, p.phi))


@pytest.mark.parametrize("d", range(2, 11))
@pytest.mark.parametrize("s", [1, 2])
def test_guarantee_all_dimensions(d, s):
    rep = certify_quasiorthogonality(choose_parameters(d, s))
    assert rep.passed and rep.ineq4_ok and rep.ineq5_ok
    assert rep.max_offdiag < 4 * (2 * math.exp(-10) + 2 * math.exp(-20))


def test_d3_reference_value():
    rep = certify_quasiorthogonality(choose_parameters(3))
    assert rep.max_offdiag == pytest.approx(6.478e-6, rel=1e-3)
    assert choose_parameters(3).alpha == pytest.approx(math.sqrt(40 / 3))


def test_d2_edge_of_inequality():
    p = choose_parameters(2)
    assert p.alpha == pytest.approx(math.sqrt(10))
    ineq4, ineq5, theta = parameter_inequalities(p.alpha, p.phi, 2)
    assert ineq4 and ineq5 and theta == pytest.approx(math.pi / 2)


def test_small_alpha_fails_and_reports():
    rep = certify_quasiorthogonality(CatParams(2 * math.sqrt(10) / 3, math.pi / 3, 3))
    assert not rep.passed
    assert rep.theta is None and not rep.ineq4_ok
    assert rep.max_offdiag > DEFAULT_THRESHOLD


def test_larger_alpha_shrinks_overlap():
    base = choose_parameters(4)
    vals = [certify_quasiorthogonality(CatParams(base.alpha * f, base.phi, 4)).max_offdiag
            for f in (1.0, 1.1, 1.3)]
    assert vals[0] > vals[1] > vals[2]


def test_report_serialization():
    rep = certify_quasiorthogonality(choose_parameters(3))
    text = rep.to_text()
    assert "passed=true" in text and "max_offdiag=" in text
    rows = rep.to_csv().strip().splitlines()
    assert rows[0] == "m,n,overlap_sq,threshold,passed"
    assert len(rows) == 1 + 3


@pytest.mark.parametrize("bad", [dict(d=1), dict(d=2.5), dict(s=0.5)])
def test_choose_parameters_rejects(bad):
    kw = dict(d=3, s=1.0) | bad
    with pytest.raises(ValueError):
        choose_parameters(**kw)


@given(st.floats(0.3, 8.0))
def test_truncation_rule_tail(a):
    assert poisson_tail(a, fock_truncation(a)) < 1e-12


def test_truncation_error_suggests():
    with pytest.raises(TruncationError) as exc:
        cat_fock(3.65, 0, 0.0, 20)
    assert exc.value.suggested > 20
    assert poisson_tail(3.65, exc.value.suggested) < 1e-12


@given(st.floats(0.5, 5.0), st.integers(0, 5), st.floats(-math.pi, math.pi))
def test_normalized_cat(a, n, phi):
    v = normalized_cat_fock(a, n, phi)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
