"""
Tests de l'oracle de diagonalisation exacte
"""
import numpy as np
import pytest

from app.exceptions import InvalidParameterError, NonHermitianError, TooLargeInstanceError
from app.services.ed_oracle import (
    PROJECTOR_BUILDERS,
    Spectrum,
    bond_profile,
    bond_projector,
    build_hamiltonian,
    gibbs_expectation,
    ground_state_expectation,
    power_iteration_ground_energy,
    singlet_projector,
    spin_algebra_residuals,
    spin_correlation_ed,
    spin_dot_product,
    spin_matrices,
    total_spin_commutator_residual,
    verify_polynomial_identities,
)


# ---------- opérateurs locaux ----------

@pytest.mark.parametrize("twice_S", [1, 2, 3])
def test_polynomial_identities(twice_S):
    check = verify_polynomial_identities(twice_S)
    assert check.passed
    assert check.value <= 1e-12


def test_corrupted_projector_fails_identity():
    check = verify_polynomial_identities(1, projector_builder=PROJECTOR_BUILDERS["corrupted"])
    assert not check.passed
    assert check.value == pytest.approx(0.1)


def test_polynomial_identity_only_for_small_spins():
    with pytest.raises(InvalidParameterError):
        verify_polynomial_identities(4)


@pytest.mark.parametrize("twice_S", [1, 2, 3, 4])
def test_spin_algebra(twice_S):
    residuals = spin_algebra_residuals(twice_S)
    assert max(residuals.values()) <= 1e-12


def test_spin_half_matrices():
    spins = spin_matrices(1)
    np.testing.assert_allclose(spins.S3, np.diag([0.5, -0.5]))
    np.testing.assert_allclose(spins.S1, [[0, 0.5], [0.5, 0]])


@pytest.mark.parametrize("q", [2, 3, 4])
def test_singlet_projector_is_rank_one_projector(q):
    p = singlet_projector(q)
    np.testing.assert_allclose(p @ p, p, atol=1e-14)
    np.testing.assert_allclose(p, p.T)
    assert np.trace(p) == pytest.approx(1.0)


def test_singlet_is_annihilated_by_total_spin():
    q = 3
    spins = spin_matrices(q - 1)
    p = singlet_projector(q)
    x = spin_dot_product(spins)
    # S_x . S_y = -S(S+1) sur le singulet
    np.testing.assert_allclose(x @ p, -2.0 * p, atol=1e-12)


# ---------- hamiltonien ----------

def test_two_site_spectrum():
    spectrum = Spectrum(build_hamiltonian(1, 3))
    np.testing.assert_allclose(spectrum.energies, [-1.0] + [0.0] * 8, atol=1e-12)


def test_four_site_spin_half_ground_energy():
    spectrum = Spectrum(build_hamiltonian(2, 2))
    assert spectrum.ground_energy == pytest.approx(-(3 + np.sqrt(3)) / 2, abs=1e-7)
    assert spectrum.ground_energy == pytest.approx(-2.3660254, abs=1e-7)
    assert spectrum.residual <= 1e-9


def test_hamiltonian_trace():
    assert np.trace(build_hamiltonian(2, 3)) == pytest.approx(-27.0)
    assert np.trace(build_hamiltonian(2, 2)) == pytest.approx(-12.0)


def test_dense_budget():
    with pytest.raises(TooLargeInstanceError):
        build_hamiltonian(7, 2)


def test_non_hermitian_operator_is_rejected():
    with pytest.raises(NonHermitianError):
        Spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_total_spin_commutes_with_hamiltonian():
    assert total_spin_commutator_residual(2, 2) <= 1e-10


def test_power_iteration_agrees_with_eigh():
    h = build_hamiltonian(2, 2)
    assert power_iteration_ground_energy(h) == pytest.approx(Spectrum(h).ground_energy, abs=1e-8)


# ---------- espérances ----------

def test_singlet_correlation_in_ground_state():
    value = spin_correlation_ed(1, 2, 0, 1, 3, 3, beta_q=50.0)
    assert value == pytest.approx(-0.25, abs=1e-10)


def test_infinite_temperature_bond_energy():
    h = build_hamiltonian(2, 2)
    value = gibbs_expectation(h, bond_projector(0, 2, 2), beta_q=0.0)
    assert value == pytest.approx(1 / 4)


def test_ground_state_bond_profile_is_dimerized():
    h = build_hamiltonian(2, 2)
    spectrum = Spectrum(h)
    profile = bond_profile(2, 2, 50.0, spectrum=spectrum)
    assert profile[0] == pytest.approx(profile[2], abs=1e-10)
    assert profile[0] > profile[1]
    assert ground_state_expectation(h, bond_projector(-1, 2, 2), spectrum) == pytest.approx(profile[0])


def test_partition_function():
    spectrum = Spectrum(build_hamiltonian(1, 2))
    assert spectrum.partition_function(1.0) == pytest.approx(np.e + 3)
    with pytest.raises(InvalidParameterError):
        spectrum.boltzmann_weights(-1.0)
