"""
Oracle de diagonalisation exacte: projecteur singulet, matrices de spin,
hamiltonien H_ell et espérances de Gibbs sur de petites chaînes
"""
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from app.config import settings
from app.exceptions import InvalidParameterError, NonHermitianError, TooLargeInstanceError
from app.schemas import VerificationCheck
from app.services.chain_model import build_geometry, make_spin
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

# Coefficients (degré décroissant) de P0 comme polynôme en X = S_x . S_y
POLYNOMIAL_IDENTITIES: Dict[int, Tuple[float, ...]] = {
    1: (-1.0, 1 / 4),
    2: (1 / 3, 0.0, -1 / 3),
    3: (-1 / 18, -5 / 72, 31 / 96, 33 / 128),
}


@dataclass(frozen=True)
class SpinMatrices:
    """
    Matrices de spin irréductibles dans la base propre de S3 (m = S, S-1, ..., -S)

    S2 est imaginaire pur: on stocke la matrice réelle iS2 = (S+ - S-)/2
    """
    twice_S: int
    S1: np.ndarray
    iS2: np.ndarray
    S3: np.ndarray

    @property
    def S(self) -> float:
        return self.twice_S / 2

    @property
    def S2(self) -> np.ndarray:
        return -1j * self.iS2

    def real_component(self, i: int) -> Tuple[complex, np.ndarray]:
        """Renvoie (phase c, R réelle) avec S^i = c R"""
        if i == 1:
            return 1.0, self.S1
        if i == 2:
            return -1j, self.iS2
        if i == 3:
            return 1.0, self.S3
        raise InvalidParameterError(f"Composante de spin inconnue: {i}")


def spin_matrices(twice_S: int) -> SpinMatrices:
    """
    Construit S1, S2, S3 de dimension q = 2S+1

    Args:
        twice_S: Deux fois le spin

    Returns:
        SpinMatrices
    """
    spin = make_spin(twice_S)
    q, S = spin.q, spin.S
    m = S - np.arange(q)
    # <m+1|S+|m> = sqrt(S(S+1) - m(m+1))
    raising = np.diag(np.sqrt(S * (S + 1) - m[1:] * (m[1:] + 1)), 1)
    lowering = raising.T
    return SpinMatrices(
        twice_S=twice_S,
        S1=0.5 * (raising + lowering),
        iS2=0.5 * (raising - lowering),
        S3=np.diag(m),
    )


def singlet_projector(q: int) -> np.ndarray:
    """
    Projecteur de rang 1 sur l'état singulet de deux spins, dimension q^2

    <a,c|P|b,d> = (1/q) (-1)^(a-b) delta(c,-a) delta(d,-b)
    """
    if q < 2:
        raise InvalidParameterError(f"q doit être >= 2 (reçu {q})")
    v = np.zeros(q * q)
    for i in range(q):
        # a = S - i, -a occupe l'indice q-1-i
        v[i * q + (q - 1 - i)] = (-1.0) ** i
    return np.outer(v, v) / q


def _corrupted_singlet_projector(q: int) -> np.ndarray:
    """Projecteur volontairement faux (injection de fautes de la suite de vérification)"""
    p = singlet_projector(q)
    p[0, 0] += 0.1
    return p


PROJECTOR_BUILDERS: Dict[str, Callable[[int], np.ndarray]] = {
    "exact": singlet_projector,
    "corrupted": _corrupted_singlet_projector,
}


def spin_dot_product(spins: SpinMatrices) -> np.ndarray:
    """X = S_x . S_y sur deux sites (réel: S2 x S2 = -(iS2) x (iS2))"""
    return (
        np.kron(spins.S1, spins.S1)
        - np.kron(spins.iS2, spins.iS2)
        + np.kron(spins.S3, spins.S3)
    )


def verify_polynomial_identities(
    twice_S: int,
    projector_builder: Callable[[int], np.ndarray] = singlet_projector,
    tolerance: float = 1e-10,
) -> VerificationCheck:
    """
    Compare P0 au polynôme en S_x . S_y correspondant

    Args:
        twice_S: 1, 2 ou 3
        projector_builder: Constructeur du projecteur (remplaçable pour l'injection de fautes)
        tolerance: Tolérance en norme max

    Returns:
        VerificationCheck nommé "polynomial-identity-S=..."
    """
    if twice_S not in POLYNOMIAL_IDENTITIES:
        raise InvalidParameterError(f"Identité polynomiale non disponible pour 2S={twice_S}")

    spins = spin_matrices(twice_S)
    q = twice_S + 1
    x = spin_dot_product(spins)
    identity = np.eye(q * q)
    polynomial = reduce(lambda acc, c: acc @ x + c * identity, POLYNOMIAL_IDENTITIES[twice_S], np.zeros_like(x))
    diff = float(np.max(np.abs(projector_builder(q) - polynomial)))

    label = {1: "1/2", 2: "1", 3: "3/2"}[twice_S]
    return VerificationCheck(
        name=f"polynomial-identity-S={label}",
        passed=diff <= tolerance,
        value=diff,
        tolerance=tolerance,
    )


def spin_algebra_residuals(twice_S: int) -> Dict[str, float]:
    """Résidus max de [S1,S2] = iS3 (et permutations) et de la relation de Casimir"""
    spins = spin_matrices(twice_S)
    S1, S2, S3 = spins.S1, spins.S2, spins.S3
    comm = lambda a, b: a @ b - b @ a  # noqa: E731
    casimir = S1 @ S1 + (S2 @ S2).real + S3 @ S3
    return {
        "commutator_12": float(np.max(np.abs(comm(S1, S2) - 1j * S3))),
        "commutator_23": float(np.max(np.abs(comm(S2, S3) - 1j * S1))),
        "commutator_31": float(np.max(np.abs(comm(S3, S1) - 1j * S2))),
        "casimir": float(np.max(np.abs(casimir - spins.S * (spins.S + 1) * np.eye(twice_S + 1)))),
    }


# ============ Opérateurs de chaîne ============

def _check_budget(ell: int, q: int) -> int:
    dim = q ** (2 * ell)
    if dim > settings.DENSE_BUDGET:
        raise TooLargeInstanceError(
            f"Dimension {dim} = {q}^{2 * ell} au-delà du budget dense {settings.DENSE_BUDGET}"
        )
    return dim


def embed(local: np.ndarray, first_site: int, ell: int, q: int) -> np.ndarray:
    """
    Plonge un opérateur agissant sur des sites consécutifs à partir de `first_site`

    Args:
        local: Opérateur de dimension q^k
        first_site: Site x du premier facteur (site x <-> facteur x + ell - 1)
        ell: Demi-longueur de la chaîne
        q: Dimension locale
    """
    k = int(round(np.log(local.shape[0]) / np.log(q)))
    left = first_site + ell - 1
    right = 2 * ell - left - k
    return np.kron(np.kron(np.eye(q ** left), local), np.eye(q ** right))


def bond_projector(x: int, ell: int, q: int, projector: Optional[np.ndarray] = None) -> np.ndarray:
    """P0_{x,x+1} plongé dans la chaîne"""
    return embed(singlet_projector(q) if projector is None else projector, x, ell, q)


def build_hamiltonian(ell: int, q: int, projector: Optional[np.ndarray] = None) -> np.ndarray:
    """
    H_ell = - somme des P0_{x,x+1}

    Args:
        ell: Demi-longueur de la chaîne
        q: 2S + 1
        projector: Projecteur de liaison (défaut: projecteur singulet exact)

    Returns:
        Matrice réelle symétrique de dimension q^(2 ell)
    """
    dim = _check_budget(ell, q)
    geometry = build_geometry(ell)
    p = singlet_projector(q) if projector is None else projector
    h = np.zeros((dim, dim))
    for x in geometry.edges:
        h -= embed(p, x, ell, q)
    logger.debug(f"Hamiltonien construit: ell={ell}, q={q}, dim={dim}")
    return h


def site_spin_product(ell: int, twice_S: int, x: int, y: int, i: int, j: int) -> Tuple[complex, np.ndarray]:
    """S^i_x S^j_y sous la forme (phase, matrice réelle)"""
    spins = spin_matrices(twice_S)
    q = twice_S + 1
    cx, rx = spins.real_component(i)
    cy, ry = spins.real_component(j)
    return cx * cy, embed(rx, x, ell, q) @ embed(ry, y, ell, q)


# ============ Diagonalisation ============

class Spectrum:
    """
    Décomposition propre complète d'un opérateur hermitien

    Attributes:
        energies: Valeurs propres croissantes
        vectors: Vecteurs propres en colonnes
    """

    def __init__(self, h: np.ndarray):
        if not np.allclose(h, h.conj().T, atol=1e-12, rtol=0):
            raise NonHermitianError("L'opérateur fourni n'est pas hermitien")
        self.energies, self.vectors = np.linalg.eigh(h)
        self.residual = float(np.max(np.abs(h @ self.vectors - self.vectors * self.energies)))
        if self.residual > settings.EIGEN_RESIDUAL_TOL:
            logger.warning(f"⚠️ Résidu de diagonalisation élevé: {self.residual:.3e}")

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    def boltzmann_weights(self, beta_q: float) -> np.ndarray:
        """Poids normalisés, décalés par l'énergie minimale pour la stabilité"""
        if beta_q < 0:
            raise InvalidParameterError(f"beta_q doit être >= 0 (reçu {beta_q})")
        w = np.exp(-beta_q * (self.energies - self.energies[0]))
        return w / w.sum()

    def partition_function(self, beta_q: float) -> float:
        return float(np.sum(np.exp(-beta_q * self.energies)))

    def expectation(self, observable: np.ndarray, beta_q: float) -> float:
        diag = np.einsum("ik,ij,jk->k", self.vectors.conj(), observable, self.vectors)
        return float(np.real(np.dot(self.boltzmann_weights(beta_q), diag)))


def gibbs_expectation(
    h: np.ndarray,
    observable: np.ndarray,
    beta_q: float,
    spectrum: Optional[Spectrum] = None,
) -> float:
    """
    Espérance de Gibbs Tr(a e^{-beta_q H}) / Tr e^{-beta_q H}

    Args:
        h: Hamiltonien hermitien
        observable: Observable de même dimension
        beta_q: Inverse température quantique (le modèle de boucles à beta correspond à 2 beta)
        spectrum: Décomposition propre déjà calculée de h

    Returns:
        Valeur réelle
    """
    spectrum = spectrum or Spectrum(h)
    return spectrum.expectation(observable, beta_q)


def ground_state_expectation(h: np.ndarray, observable: np.ndarray, spectrum: Optional[Spectrum] = None) -> float:
    """Limite beta -> infini approchée par beta_q = GROUND_STATE_BETA"""
    spectrum = spectrum or Spectrum(h)
    gap = spectrum.energies[1] - spectrum.energies[0] if len(spectrum.energies) > 1 else np.inf
    if gap * settings.GROUND_STATE_BETA < 5:
        logger.warning(f"⚠️ Quasi-dégénérescence (écart {gap:.3e}): état de Gibbs et non vecteur propre")
    return spectrum.expectation(observable, settings.GROUND_STATE_BETA)


def spin_correlation_ed(
    ell: int,
    q: int,
    x: int,
    y: int,
    i: int,
    j: int,
    beta_q: float,
    spectrum: Optional[Spectrum] = None,
) -> float:
    """
    Corrélation de Gibbs <S^i_x S^j_y> en arithmétique réelle

    Returns:
        Partie réelle de l'espérance
    """
    _check_budget(ell, q)
    spectrum = spectrum or Spectrum(build_hamiltonian(ell, q))
    phase, product = site_spin_product(ell, q - 1, x, y, i, j)
    return float(np.real(phase * spectrum.expectation(product, beta_q)))


def bond_profile(ell: int, q: int, beta_q: float, spectrum: Optional[Spectrum] = None) -> List[float]:
    """<P0_{x,x+1}> pour chaque arête de la chaîne"""
    spectrum = spectrum or Spectrum(build_hamiltonian(ell, q))
    geometry = build_geometry(ell)
    return [spectrum.expectation(bond_projector(x, ell, q), beta_q) for x in geometry.edges]


def total_spin_commutator_residual(ell: int, q: int) -> float:
    """max_i ||[H, somme_x S^i_x]||: symétrie SU(2) globale"""
    h = build_hamiltonian(ell, q)
    spins = spin_matrices(q - 1)
    geometry = build_geometry(ell)
    residual = 0.0
    for i in (1, 2, 3):
        _, r = spins.real_component(i)
        total = sum(embed(r, x, ell, q) for x in geometry.sites)
        residual = max(residual, float(np.max(np.abs(h @ total - total @ h))))
    return residual


def power_iteration_ground_energy(h: np.ndarray, iterations: int = 5000, seed: int = 0) -> float:
    """
    Énergie fondamentale par itération de la puissance sur -H (spectre de H dans [-(2ell-1), 0])
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(h.shape[0])
    v /= np.linalg.norm(v)
    a = -h
    value = 0.0
    for _ in range(iterations):
        w = a @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        new_value = float(v @ a @ v)
        if abs(new_value - value) < 1e-14:
            value = new_value
            break
        value = new_value
    return -value
