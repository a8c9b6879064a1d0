"""
Tests de la suite de vérification (contrôles rapides; les critères lourds sont exclus)
"""
import pytest

from app.exceptions import TooLargeInstanceError
from app.services.chain_model import build_geometry, build_grid
from app.services.verification import VerificationSuite, _timed, enumeration_fits, exactness_verdict


@pytest.fixture
def suite():
    return VerificationSuite(sweeps=2000, n_seeds=2, seed=5)


def test_unknown_mutation_is_rejected():
    with pytest.raises(ValueError):
        VerificationSuite(mutations=["hamiltonian"])


def test_operator_identities(suite):
    assert suite.polynomial_identity(1).passed
    assert suite.polynomial_identity(3).passed
    assert suite.spin_algebra().passed


def test_mutated_projector_is_detected():
    mutated = VerificationSuite(mutations=["singlet-projector"], sweeps=2000)
    check = mutated.polynomial_identity(1)
    assert not check.passed
    assert check.name == "polynomial-identity-S=1/2"


@pytest.mark.parametrize("q", [2, 3])
def test_trotter_identity(suite, q):
    check = suite.trotter_identity(q)
    assert check.passed
    errors = list(check.detail["relative_errors"].values())
    assert errors == sorted(errors, reverse=True)
    assert check.detail["closed_form_vs_enumeration"] <= 1e-12


def test_bond_connectivity_bridge(suite):
    check = suite.bond_bridge()
    assert check.passed
    assert check.detail["transfer_matrix_vs_enumeration"] <= 1e-10


def test_ground_state_check(suite):
    check = suite.ground_state()
    assert check.passed
    assert check.value <= 1e-8
    profile = check.detail["bond_profile"]
    assert profile[-1] == pytest.approx(profile[1])
    assert profile[-1] > profile[0]


def test_loop_laws(suite):
    check = suite.loop_laws(n_configs=200)
    assert check.passed
    assert check.detail["failures"] == {}


def test_bounds_reference_values(suite):
    check = suite.bounds_numbers()
    assert check.passed
    assert check.value == pytest.approx(39.2, abs=0.1)
    assert check.detail["winding_suppression"]
    suppression = list(check.detail["winding_suppression_by_ell"].values())
    assert suppression == sorted(suppression, reverse=True)


def test_detailed_balance(suite):
    check = suite.detailed_balance()
    assert check.passed
    assert check.detail["transitions"] > 0


def test_sampler_exactness_report(suite):
    check = suite.sampler_exactness()
    assert check.name == "sampler-exactness"
    assert 0.0 <= check.value <= 1.0
    assert check.detail["n_configurations"] == 2 ** 7
    assert len(check.detail["per_seed_p_values"]) == 2
    assert all(s["stride"] >= 1 and s["n_samples"] > 0 for s in check.detail["per_seed"])
    assert check.value == min(check.detail["per_seed_p_values"] + [check.detail["p_value"]])


@pytest.mark.parametrize(
    "per_seed, pooled, expected",
    [
        ([0.3, 0.5, 0.2], 0.4, True),
        ([0.3, 1e-5, 0.2], 0.2, False),
        ([0.3, 0.5], 1e-4, False),
        ([], 0.5, False),
    ],
)
def test_exactness_requires_every_seed(per_seed, pooled, expected):
    assert exactness_verdict(per_seed, pooled) is expected


def test_correlation_convention_selects_twice_beta(suite):
    check = suite.correlation_convention()
    assert check.detail["matching_convention"] == "2beta"
    assert check.detail["max_gap"]["2beta"] <= 0.02


def test_run_collects_failures(suite):
    suite.checks = lambda: [
        ("spin-algebra", suite.spin_algebra),
        ("polynomial-identity-S=1/2", lambda: suite.polynomial_identity(1)),
    ]
    report = suite.run()
    assert report.passed
    assert [c.name for c in report.checks] == ["spin-algebra", "polynomial-identity-S=1/2"]

    mutated = VerificationSuite(mutations=["singlet-projector"], sweeps=2000)
    mutated.checks = lambda: [("polynomial-identity-S=1/2", lambda: mutated.polynomial_identity(1))]
    report = mutated.run()
    assert not report.passed
    assert report.failures == ["polynomial-identity-S=1/2"]
    assert report.provenance["mutations"] == ["singlet-projector"]


def test_timed_turns_domain_errors_into_failures():
    def explode():
        raise TooLargeInstanceError("trop grand")

    check = _timed("enumeration", explode)
    assert not check.passed
    assert check.detail["error"] == "too-large-instance"
    assert check.runtime_s >= 0


def test_enumeration_fits():
    assert enumeration_fits(build_geometry(1), build_grid(1, 8))
    assert not enumeration_fits(build_geometry(2), build_grid(1, 8))
