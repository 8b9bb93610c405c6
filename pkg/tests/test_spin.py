import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvatmosphere import spin
from nvatmosphere.params import MWStep, PhysicalParams

from conftest import random_density_matrix, rk4_propagate


@pytest.mark.parametrize("p, diag", [
    (0.91, [0.955, 0.045, 0, 0]),
    (0.0, [0.5, 0.5, 0, 0]),
    (1.0, [1, 0, 0, 0]),
])
def test_initial_state(p, diag):
    rho = spin.initial_state(p)
    np.testing.assert_allclose(rho, np.diag(diag), atol=1e-15)
    spin.check_density_matrix(rho)


@pytest.mark.parametrize("p", [1.01, -2, float("nan")])
def test_initial_state_rejects_bad_polarization(p):
    with pytest.raises(spin.SpinModelError):
        spin.initial_state(p)


def _coherence_frequency(h, i, j):
    # ρ_ij evolves as exp(-i 2π (E_i - E_j) t) for diagonal h
    return abs(np.real(h[i, i] - h[j, j]))


def test_free_hamiltonian_mw1(params):
    h = spin.build_free_hamiltonian(params, MWStep.MW1)
    spin.check_hamiltonian(h)
    assert _coherence_frequency(h, 0, 2) == pytest.approx(1.0, abs=1e-12)
    assert _coherence_frequency(h, 1, 3) == pytest.approx(14.5, abs=1e-12)
    assert _coherence_frequency(h, 0, 1) == pytest.approx(0.496, abs=1e-12)


def test_free_hamiltonian_mw2(params):
    h = spin.build_free_hamiltonian(params, "MW2")
    assert _coherence_frequency(h, 1, 3) == pytest.approx(1.0, abs=1e-12)
    assert _coherence_frequency(h, 0, 2) == pytest.approx(14.5, abs=1e-12)


def test_transverse_term_only_in_minus_one_block(params):
    h = spin.build_free_hamiltonian(params, MWStep.MW1, include_transverse=True)
    assert h[2, 3] == pytest.approx(1.4)
    assert h[0, 1] == 0
    spin.check_hamiltonian(h)


def test_default_rabi_rates(params):
    assert params.rabi_mw1 == pytest.approx(2.137, abs=1e-3)
    assert params.rabi_mw2 == pytest.approx(3.247, abs=1e-3)


def test_resonant_pi_pulse(params):
    p = params.replace(detune1=0.0)
    h = spin.build_driven_hamiltonian(p, MWStep.MW1)
    rho = spin.propagate_unitary(spin.initial_state(1.0), h, 0.234)
    assert rho[0, 0].real == pytest.approx(0.0, abs=1e-6)


def test_half_pi_pulse_gives_half_population():
    params = PhysicalParams(detune1=0.0)
    h = spin.build_driven_hamiltonian(params, MWStep.MW1, rabi=2.137)
    rho = spin.propagate_unitary(spin.initial_state(1.0), h, 0.117)
    # 2.137 MHz is the rounded rate, so the rotation is π/2 to ~4e-4
    assert rho[0, 0].real == pytest.approx(0.5, abs=1e-3)
    h_exact = spin.build_driven_hamiltonian(params, MWStep.MW1)
    rho = spin.propagate_unitary(spin.initial_state(1.0), h_exact, 0.117)
    assert rho[0, 0].real == pytest.approx(0.5, abs=1e-6)


def test_off_resonant_manifold_transfer_matches_two_level_formula(params):
    # ↓ manifold under MW1: detuning 14.5 MHz, Rabi 2.137 MHz
    h = spin.build_driven_hamiltonian(params, MWStep.MW1)
    rho0 = spin.initial_state(-1.0)
    times = np.linspace(0, 0.5, 5001)
    us = spin.propagators(h, times)
    transfer = np.real((us @ rho0 @ us.conj().transpose(0, 2, 1))[:, 3, 3])
    omega, delta = params.rabi_mw1, 14.5
    expected = omega ** 2 / (omega ** 2 + delta ** 2)
    assert expected == pytest.approx(0.0213, abs=1e-4)
    assert transfer.max() == pytest.approx(expected, rel=1e-3)


def test_driven_rejects_nonpositive_rabi(params):
    with pytest.raises(spin.SpinModelError):
        spin.build_driven_hamiltonian(params, MWStep.MW1, rabi=0.0)


def test_propagate_identity_and_commuting(rng, params):
    rho = random_density_matrix(rng)
    h = spin.build_free_hamiltonian(params, MWStep.MW1)
    np.testing.assert_array_equal(spin.propagate_unitary(rho, h, 0.0), rho)
    diag = np.diag(np.diag(rho))
    np.testing.assert_allclose(spin.propagate_unitary(diag, h, 0.7), diag, atol=1e-14)


def test_propagate_negative_time(params):
    with pytest.raises(spin.SpinModelError):
        spin.propagate_unitary(spin.initial_state(0), spin.build_free_hamiltonian(params, "MW1"), -1)


def test_coherence_phase_oracle(params):
    rho = np.zeros((4, 4), complex)
    rho[0, 0] = rho[2, 2] = rho[0, 2] = rho[2, 0] = 0.5
    h = spin.build_free_hamiltonian(params, MWStep.MW1)
    out = spin.propagate_unitary(rho, h, 0.5)
    # phase 2π · 1.0 MHz · 0.5 µs = π
    assert out[0, 2] == pytest.approx(-0.5, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(detune=st.floats(-5, 5), tau=st.floats(0, 3))
def test_fringe_frequency_contract(detune, tau):
    params = PhysicalParams(detune1=detune)
    rho = np.zeros((4, 4), complex)
    rho[0, 0] = rho[2, 2] = rho[0, 2] = rho[2, 0] = 0.5
    out = spin.propagate_unitary(rho, spin.build_free_hamiltonian(params, MWStep.MW1), tau)
    expected = 2 * np.pi * (params.f1 - params.drive_frequency(MWStep.MW1)) * tau
    dphi = np.angle(out[0, 2] / 0.5) - expected
    assert abs(np.angle(np.exp(1j * dphi))) < 1e-9


def test_propagator_matches_fine_integrator(rng, params):
    for step, transverse in [(MWStep.MW1, False), (MWStep.MW2, True)]:
        h = spin.build_driven_hamiltonian(params, step, phase=0.3, include_transverse=transverse)
        rho = random_density_matrix(rng)
        exact = spin.propagate_unitary(rho, h, 0.2)
        ref = rk4_propagate(rho, h, 0.2, substeps=1000)
        assert np.max(np.abs(exact - ref)) < 1e-8


def test_composition_and_purity(rng, params):
    h = spin.build_driven_hamiltonian(params, MWStep.MW2, include_transverse=True)
    rho = random_density_matrix(rng)
    ab = spin.propagate_unitary(rho, h, 0.37 + 0.21)
    a_then_b = spin.propagate_unitary(spin.propagate_unitary(rho, h, 0.37), h, 0.21)
    assert np.max(np.abs(ab - a_then_b)) < 1e-9
    purity = np.trace(rho @ rho).real
    assert np.trace(ab @ ab).real == pytest.approx(purity, abs=1e-9)


def test_nuclear_populations_conserved_without_transverse(rng, params):
    rho = random_density_matrix(rng)
    h = spin.build_free_hamiltonian(params, MWStep.MW1)
    out = spin.propagate_unitary(rho, h, 2.3)
    assert spin.nuclear_polarization(out) == pytest.approx(spin.nuclear_polarization(rho), abs=1e-12)


def test_dephasing(rng):
    rho = random_density_matrix(rng)
    np.testing.assert_array_equal(spin.apply_dephasing(rho, 0.0, 1.8), rho)
    out = spin.apply_dephasing(rho, 1.8, 1.8)
    assert abs(out[0, 2]) == pytest.approx(abs(rho[0, 2]) * math.exp(-1), rel=1e-12)
    assert math.exp(-1) == pytest.approx(0.3679, abs=1e-4)
    assert abs(out[1, 2]) == pytest.approx(abs(rho[1, 2]) * math.exp(-1), rel=1e-12)
    assert out[0, 1] == rho[0, 1]
    np.testing.assert_array_equal(np.diag(out), np.diag(rho))
    gauss = spin.apply_dephasing(rho, 0.9, 1.8, "gaussian")
    assert abs(gauss[0, 3]) == pytest.approx(abs(rho[0, 3]) * math.exp(-0.25), rel=1e-12)
    spin.check_density_matrix(out)


def test_full_dephasing(rng):
    rho = random_density_matrix(rng)
    out = spin.apply_dephasing(rho, math.inf, 1.8)
    assert np.all(out[:2, 2:] == 0) and np.all(out[2:, :2] == 0)
    assert np.trace(out) == pytest.approx(1.0)
    with pytest.raises(spin.SpinModelError):
        spin.apply_dephasing(rho, -0.1, 1.8)


def test_nuclear_polarization():
    assert spin.nuclear_polarization(spin.initial_state(0.91)) == pytest.approx(0.91)
    assert spin.nuclear_polarization(spin.initial_state(0.0)) == 0.0
    u = spin.nuclear_rotation(math.pi)
    rho = u @ spin.initial_state(0.91) @ u.conj().T
    assert spin.nuclear_polarization(rho) == pytest.approx(-0.91, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(-10, 10), p=st.floats(-1, 1))
def test_nuclear_rotation_polarization_law(theta, p):
    u = spin.nuclear_rotation(theta)
    rho = u @ spin.initial_state(p) @ u.conj().T
    assert spin.nuclear_polarization(rho) == pytest.approx(p * math.cos(theta), abs=1e-12)


def test_check_density_matrix_rejects():
    bad = np.diag([0.6, 0.6, 0, 0]).astype(complex)
    with pytest.raises(spin.SpinModelError):
        spin.check_density_matrix(bad)
    neg = np.diag([1.2, -0.2, 0, 0]).astype(complex)
    with pytest.raises(spin.SpinModelError):
        spin.check_density_matrix(neg)
