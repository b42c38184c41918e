import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from catqudit.hilbert import (SpaceSpec, annihilation, density_defects, embed, fock,
                              is_density_matrix, number, partial_trace, qutrit_transfer,
                              read_matrix, write_matrix)


def test_annihilation_two_levels():
    np.testing.assert_array_equal(annihilation(2), [[0, 1], [0, 0]])


@pytest.mark.parametrize("n", [0, 1, -3])
def test_annihilation_rejects_small(n):
    with pytest.raises(ValueError):
        annihilation(n)


@given(st.integers(2, 30))
def test_number_operator_spectrum(n):
    a = annihilation(n)
    ad_a = a.conj().T @ a
    for k in range(n):
        np.testing.assert_allclose(ad_a @ fock(k, n), k * fock(k, n))
    np.testing.assert_allclose(np.linalg.eigvalsh(number(n)), np.arange(n))


@given(st.integers(3, 25))
def test_canonical_commutator_below_top(n):
    a = annihilation(n)
    c = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(c[:n - 1, :n - 1], np.eye(n - 1), atol=1e-12)
    assert c[n - 1, n - 1] == pytest.approx(-(n - 1))


def test_transfer_lowering_fg():
    s = qutrit_transfer("f", "g")
    assert s[0, 2] == 1 and np.count_nonzero(s) == 1


def test_projectors_complete():
    tot = sum(qutrit_transfer(k, k) for k in "gef")
    np.testing.assert_array_equal(tot, np.eye(3))


def test_lower_raise_product():
    sm = qutrit_transfer("f", "g")
    np.testing.assert_array_equal(sm @ sm.conj().T, qutrit_transfer("g", "g"))


def test_unknown_level():
    with pytest.raises(ValueError):
        qutrit_transfer("h", "g")


def test_embed_identity_and_trace():
    sp = SpaceSpec(4, 5)
    np.testing.assert_array_equal(embed(np.eye(4), "cav1", sp), np.eye(sp.dim))
    assert np.trace(sp.projector("g")).real == pytest.approx(sp.n1 * sp.n2)


def test_embed_tensor_factorization():
    sp = SpaceSpec(3, 4)
    a1, a2 = annihilation(3), annihilation(4)
    lhs = embed(a1, "cav1", sp) @ embed(a2.conj().T, "cav2", sp)
    rhs = embed(np.kron(a1, a2.conj().T), ("cav1", "cav2"), sp)
    np.testing.assert_allclose(lhs, rhs)


def test_embed_dimension_mismatch():
    with pytest.raises(ValueError):
        embed(np.eye(5), "cav1", SpaceSpec(4, 4))


def test_disjoint_slots_commute():
    sp = SpaceSpec(4, 6)
    ops = [sp.a1, sp.a2, sp.sigma("f", "g"), sp.sigma("e", "g")]
    pairs = [(0, 1), (0, 2), (1, 2), (1, 3)]
    for i, j in pairs:
        c = ops[i] @ ops[j] - ops[j] @ ops[i]
        assert np.abs(c).max() < 1e-12


def test_basis_order_qutrit_slowest():
    sp = SpaceSpec(3, 4)
    psi = sp.product_state("e", fock(2, 3), fock(1, 4))
    assert np.flatnonzero(psi)[0] == sp.index("e", 2, 1) == (1 * 3 + 2) * 4 + 1


def test_partial_trace_product_state():
    sp = SpaceSpec(3, 4)
    rng = np.random.default_rng(1)
    c1 = rng.normal(size=3) + 1j * rng.normal(size=3)
    c1 /= np.linalg.norm(c1)
    c2 = rng.normal(size=4) + 1j * rng.normal(size=4)
    c2 /= np.linalg.norm(c2)
    psi = sp.product_state("g", c1, c2)
    np.testing.assert_allclose(partial_trace(psi, sp, "cav1"), np.outer(c1, c1.conj()), atol=1e-12)
    rho = np.outer(psi, psi.conj())
    np.testing.assert_allclose(partial_trace(rho, sp, "cav2"), np.outer(c2, c2.conj()), atol=1e-12)
    assert partial_trace(rho, sp, ("qutrit", "cav1")).shape == (9, 9)


def test_density_checks():
    rho = np.diag([0.5, 0.5, 0.0]).astype(complex)
    assert is_density_matrix(rho)
    bad = rho.copy()
    bad[0, 1] = 0.1
    assert not is_density_matrix(bad)
    assert density_defects(bad)["hermiticity_defect"] > 0


def test_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    path = tmp_path / "m.txt"
    write_matrix(path, m)
    np.testing.assert_array_equal(read_matrix(path), m)
    buf = io.StringIO()
    write_matrix(buf, m[:, 0])
    buf.seek(0)
    assert read_matrix(buf).shape in ((4,), (4, 1))
