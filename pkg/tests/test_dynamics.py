import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catqudit.dynamics import (TRAJECTORY_COLUMNS, IntegratorConfig, closed_form_step1,
                               closed_form_step2, evolve_master, evolve_unitary, fidelity,
                               reachable_indices, trajectory_infidelity, write_trajectory)
from catqudit.effective import EffectiveSpec, HamiltonianSpec, HarmonicTerm, StaticTerm
from catqudit.hilbert import SpaceSpec, annihilation, fock
from catqudit.model import derived_params, step1_effective, step2_effective, table1
from catqudit.protocol import ideal_target, initial_state


def static(op):
    return EffectiveSpec([StaticTerm(1.0, np.asarray(op, dtype=complex))], [])


def test_cavity_decay_matches_exponential():
    n, kappa = 4, 2.0
    a = annihilation(n)
    rho0 = np.outer(fock(1, n), fock(1, n))
    res = evolve_master(rho0, static(np.zeros((n, n))), [math.sqrt(kappa) * a], (0.0, 1.0),
                        IntegratorConfig(max_step=1e-3))
    assert res.state[1, 1].real == pytest.approx(math.exp(-kappa), abs=1e-10)
    assert not res.flagged


def test_unitary_limit_keeps_purity():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = m + m.conj().T
    psi = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi /= np.linalg.norm(psi)
    res = evolve_master(psi, static(h), [], (0.0, 2.0), IntegratorConfig(max_step=1e-3))
    assert np.trace(res.state @ res.state).real == pytest.approx(1.0, abs=1e-9)


def test_eigenstate_global_phase():
    h = np.diag([0.0, 1.0, 2.5]).astype(complex)
    res = evolve_unitary(np.array([0, 1, 0], dtype=complex), static(h), (0.0, 3.0),
                         IntegratorConfig(max_step=1e-3))
    np.testing.assert_allclose(res.state, [0, np.exp(-3j), 0], atol=1e-10)


def test_rabi_transfer():
    sp = SpaceSpec(2, 2)
    g = 2.0
    h = g * (sp.sigma("g", "e") + sp.sigma("e", "g"))
    psi0 = sp.product_state("g", fock(0, 2), fock(0, 2))
    res = evolve_unitary(psi0, static(h), (0.0, math.pi / (2 * g)), IntegratorConfig(max_step=1e-3),
                         space=sp)
    assert res.samples[-1]["qutrit_e_pop"] == pytest.approx(1.0, abs=1e-10)


def test_harmonic_drive_adaptive_agrees_with_rk4():
    a = annihilation(5)
    spec = HamiltonianSpec([StaticTerm(0.3, a.conj().T @ a)], [HarmonicTerm(0.5, 4.0, a, "a")])
    psi0 = fock(0, 5).astype(complex)
    r1 = evolve_unitary(psi0, spec, (0.0, 5.0), IntegratorConfig(steps_per_fastest_period=200, max_step=1.0))
    r2 = evolve_unitary(psi0, spec, (0.0, 5.0), IntegratorConfig(method="adaptive", max_step=0.01))
    assert abs(np.vdot(r1.state, r2.state)) == pytest.approx(1.0, abs=1e-9)


def test_reachable_subspace():
    a = annihilation(5)
    seed = np.zeros(5, dtype=bool)
    seed[1] = True
    np.testing.assert_array_equal(reachable_indices(seed, [a.conj().T @ a]), [1])
    np.testing.assert_array_equal(reachable_indices(seed, [a]), [0, 1])
    np.testing.assert_array_equal(reachable_indices(seed, [a, a.conj().T]), np.arange(5))


def test_closed_form_tau_zero_is_initial_state():
    sp = SpaceSpec(6, 53)
    alpha = math.sqrt(40 / 3)
    v = closed_form_step1(3, alpha, 1.0, 0.1, 0.0, sp.n1, sp.n2)
    psi = np.kron([1, 0, 0], v)
    assert abs(np.vdot(psi / np.linalg.norm(psi), initial_state(3, alpha, 0.0, sp))) == pytest.approx(1.0)


@given(st.floats(0, 1e-6))
@settings(max_examples=15)
def test_closed_form_norm_preserved(tau):
    p = table1()
    dp = derived_params(p)
    v0 = closed_form_step1(3, 2.0, dp.lam1, dp.chi, 0.0, 5, 30)
    v = closed_form_step1(3, 2.0, dp.lam1, dp.chi, tau, 5, 30)
    assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(v0), rel=1e-12)
    v2 = closed_form_step2(v, dp.lam1t, tau, 5, 30)
    assert np.linalg.norm(v2) == pytest.approx(np.linalg.norm(v0), rel=1e-12)


def test_closed_form_reaches_target_when_matched():
    p = table1()
    dp = derived_params(p)
    sp = SpaceSpec(6, 53)
    alpha = math.sqrt(40 / 3)
    v = closed_form_step1(3, alpha, dp.lam1, dp.chi, dp.tau, sp.n1, sp.n2)
    v = closed_form_step2(v, dp.lam1 + dp.chi, dp.tau, sp.n1, sp.n2)
    psi = np.kron([1, 0, 0], v)
    target = ideal_target(3, alpha, -math.pi / 3, sp)
    assert fidelity(psi / np.linalg.norm(psi), target) == pytest.approx(1.0, abs=1e-12)
    mis = closed_form_step2(closed_form_step1(3, alpha, dp.lam1, dp.chi, dp.tau, sp.n1, sp.n2),
                            1.05 * (dp.lam1 + dp.chi), dp.tau, sp.n1, sp.n2)
    psi = np.kron([1, 0, 0], mis)
    assert fidelity(psi / np.linalg.norm(psi), target) < 0.999


def test_step2_zero_shift_is_identity():
    v = closed_form_step1(3, 2.0, 1e7, 1e6, 1e-7, 5, 30)
    np.testing.assert_array_equal(closed_form_step2(v, 0.0, 1e-7, 5, 30), v)


def test_integration_matches_closed_forms():
    p = table1()
    dp = derived_params(p)
    sp = SpaceSpec(6, 53)
    alpha = math.sqrt(40 / 3)
    psi0 = initial_state(3, alpha, 0.0, sp)
    cfg = IntegratorConfig(method="adaptive", rel_tol=1e-12, abs_tol=1e-14, max_step=1e-8)
    r1 = evolve_unitary(psi0, step1_effective(p, sp), (0.0, dp.tau), cfg)
    v1 = np.kron([1, 0, 0], closed_form_step1(3, alpha, dp.lam1, dp.chi, dp.tau, sp.n1, sp.n2))
    v1 /= np.linalg.norm(v1)
    assert 1 - fidelity(r1.state, v1) ** 2 < 1e-8
    r2 = evolve_unitary(r1.state, step2_effective(p, sp), (0.0, dp.tau), cfg)
    v2 = np.kron([1, 0, 0], closed_form_step2(v1[: sp.n1 * sp.n2], dp.lam1t, dp.tau, sp.n1, sp.n2))
    assert 1 - fidelity(r2.state, v2) ** 2 < 1e-8


def test_fidelity_examples():
    psi = np.array([1, 0, 0], dtype=complex)
    perp = np.array([0, 1, 0], dtype=complex)
    assert fidelity(np.outer(psi, psi), psi) == pytest.approx(1.0)
    assert fidelity(np.outer(perp, perp), psi) == 0.0
    mix = 0.5 * np.outer(psi, psi) + 0.5 * np.outer(perp, perp)
    assert fidelity(mix, psi) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ValueError):
        fidelity(np.eye(2), psi)
    with pytest.raises(ValueError):
        fidelity(-np.outer(psi, psi), psi)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(steps_per_fastest_period=10)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evolve_unitary(np.ones(3), static(np.eye(4)), (0, 1))
    with pytest.raises(ValueError):
        evolve_master(np.eye(3) / 3, static(np.eye(4)), [], (0, 1))
    with pytest.raises(ValueError):
        evolve_unitary(np.ones(4) / 2, static(np.eye(4)), (1, 0))


def test_positivity_violation_is_flagged():
    # a far too coarse step on a fast Hamiltonian
    a = annihilation(6)
    h = 50.0 * (a + a.conj().T)
    rho0 = np.outer(fock(0, 6), fock(0, 6))
    res = evolve_master(rho0, static(h), [0.1 * a], (0.0, 0.05), IntegratorConfig(max_step=1e-2,
                        steps_per_fastest_period=20), n_samples=3)
    assert res.diagnostics["steps"] >= 1
    assert isinstance(res.flagged, bool)


def test_keep_states_and_trajectory(tmp_path):
    sp = SpaceSpec(3, 3)
    h = sp.n1_op + 0.5 * sp.n2_op
    psi0 = sp.product_state("g", np.ones(3) / math.sqrt(3), fock(1, 3))
    res = evolve_master(psi0, static(h), [0.1 * sp.a1], (0.0, 1.0), IntegratorConfig(max_step=1e-2),
                        space=sp, target=psi0, n_samples=5, keep_states=True)
    assert len(res.states) == len(res.samples) == 5
    np.testing.assert_allclose(res.states[-1], res.state)
    path = tmp_path / "traj.csv"
    write_trajectory(res.samples, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    assert len(rows) == 6


def test_trajectory_infidelity_identical_specs():
    sp = SpaceSpec(3, 3)
    spec = static(sp.n1_op)
    psi0 = sp.product_state("g", np.ones(3) / math.sqrt(3), fock(0, 3))
    inf = trajectory_infidelity(psi0, spec, spec, (0.0, 1.0), 7, IntegratorConfig(max_step=0.1))
    assert inf.shape == (7,) and np.abs(inf).max() < 1e-10
