"""
Oracles exacts du modèle de boucles: énumération complète de Omega (poids rationnels exacts)
et évaluation par matrice de transfert
"""
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.exceptions import InvalidParameterError, TooLargeInstanceError
from app.schemas import ChainGeometry, ExactResult, TimeGrid
from app.services.contours import omega_alpha_members, surrounds
from app.services.ed_oracle import Spectrum, bond_projector, build_hamiltonian, site_spin_product
from app.services.loop_engine import LoopSet
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


# ============ Événements ============

@dataclass(frozen=True)
class Event:
    """Prédicat nommé sur une décomposition en boucles"""
    name: str
    predicate: Callable[[LoopSet], bool] = field(compare=False)

    def __call__(self, loop_set: LoopSet) -> bool:
        return bool(self.predicate(loop_set))


def connected_event(x: int, y: int) -> Event:
    return Event(f"{x}<->{y}", lambda ls: ls.connected(x, y))


def empty_event() -> Event:
    return Event("empty", lambda ls: not ls.by_slot)


def surround_event(x: int) -> Event:
    """E_x, faux sur les configurations contenant une boucle qui s'enroule"""
    return Event(f"E_{x}", lambda ls: not ls.winding_loops() and surrounds(ls, x))


def omega_alpha_event(alpha: int) -> Event:
    return Event(
        f"Omega^{alpha}",
        lambda ls: alpha in omega_alpha_members(ls.geometry, ls.grid, ls.by_slot),
    )


def omega_union_event() -> Event:
    return Event("Omega", lambda ls: bool(omega_alpha_members(ls.geometry, ls.grid, ls.by_slot)))


# ============ Énumération ============

def enumeration_size(geometry: ChainGeometry, grid: TimeGrid) -> int:
    return (geometry.n_edges + 1) ** grid.n_slots


def iter_configurations(geometry: ChainGeometry, grid: TimeGrid) -> Iterator[Dict[int, int]]:
    """Parcours en profondeur créneau par créneau: pas de barre, ou une barre sur l'une des arêtes"""
    slots = grid.slots
    choices = (None,) + geometry.edges
    for assignment in itertools.product(choices, repeat=len(slots)):
        yield {t: e for t, e in zip(slots, assignment) if e is not None}


class ExactEnumerator:
    """
    Énumération exhaustive de Omega_{ell,n}

    Le poids entier W(omega) = q^L (q n)^(N - |omega|) est proportionnel à
    (1/n)^|omega| q^(L - |omega|); la somme est donc exacte.
    """

    def __init__(self, geometry: ChainGeometry, grid: TimeGrid, q: int, budget: Optional[int] = None):
        if q < 2:
            raise InvalidParameterError(f"q doit être >= 2 (reçu {q})")
        self.geometry = geometry
        self.grid = grid
        self.q = q
        self.budget = settings.ENUM_BUDGET if budget is None else budget
        self.size = enumeration_size(geometry, grid)
        if self.size > self.budget:
            raise TooLargeInstanceError(
                f"{self.size} configurations au-delà du budget d'énumération {self.budget}"
            )

    def weight(self, loop_set: LoopSet) -> int:
        m = len(loop_set.by_slot)
        return self.q ** loop_set.total_loops * (self.q * self.grid.n) ** (self.grid.n_slots - m)

    def run(self, events: Sequence[Event] = ()) -> Tuple[int, Dict[str, int], int]:
        """
        Returns:
            (poids total, poids par événement, nombre de configurations)
        """
        logger.info(
            f"Énumération: ell={self.geometry.ell}, beta={self.grid.beta}, n={self.grid.n}, "
            f"q={self.q}, {self.size} configurations"
        )
        total = 0
        event_weights = {event.name: 0 for event in events}
        count = 0
        for by_slot in iter_configurations(self.geometry, self.grid):
            loop_set = LoopSet(self.geometry, self.grid, by_slot)
            w = self.weight(loop_set)
            total += w
            for event in events:
                if event(loop_set):
                    event_weights[event.name] += w
            count += 1
        logger.info(f"✅ Énumération terminée: {count} configurations")
        return total, event_weights, count

    def distribution(self) -> Dict[frozenset, Fraction]:
        """Loi exacte mu de chaque configuration, indexée par frozenset des couples (slot, edge)"""
        weights = {}
        for by_slot in iter_configurations(self.geometry, self.grid):
            weights[frozenset(by_slot.items())] = self.weight(LoopSet(self.geometry, self.grid, by_slot))
        total = sum(weights.values())
        return {key: Fraction(w, total) for key, w in weights.items()}

    def partition_function(self) -> Fraction:
        total, _, _ = self.run()
        return Fraction(total, (self.q * self.grid.n) ** self.grid.n_slots)

    def probabilities(self, events: Sequence[Event]) -> Dict[str, Fraction]:
        total, weights, _ = self.run(events)
        return {name: Fraction(w, total) for name, w in weights.items()}

    def conditional_probabilities(self, events: Sequence[Event], condition: Event) -> Dict[str, Fraction]:
        """P(A | condition) exact; lève si la condition est de probabilité nulle"""
        joint = [
            Event(f"{e.name}&{condition.name}", lambda ls, e=e: e(ls) and condition(ls))
            for e in events
        ]
        _, weights, _ = self.run(joint + [condition])
        if weights[condition.name] == 0:
            raise InvalidParameterError(f"Événement conditionnant {condition.name} de probabilité nulle")
        return {
            e.name: Fraction(weights[j.name], weights[condition.name]) for e, j in zip(events, joint)
        }


def enumerate_Z(
    geometry: ChainGeometry,
    grid: TimeGrid,
    q: int,
    events: Sequence[Event] = (),
) -> ExactResult:
    """
    Fonction de partition Z_n exacte et probabilités d'événements par énumération

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        q: Fugacité des boucles
        events: Événements dont on veut la probabilité

    Returns:
        ExactResult
    """
    enumerator = ExactEnumerator(geometry, grid, q)
    total, weights, count = enumerator.run(events)
    z = Fraction(total, (q * grid.n) ** grid.n_slots)
    return ExactResult(
        Z=float(z),
        Z_fraction=f"{z.numerator}/{z.denominator}",
        n_configs=count,
        event_probabilities={name: float(Fraction(w, total)) for name, w in weights.items()},
        method="enumeration",
        provenance={"ell": geometry.ell, "beta": grid.beta, "n": grid.n, "q": q},
    )


def exact_probability(geometry: ChainGeometry, grid: TimeGrid, q: int, event: Event) -> float:
    """Probabilité exacte d'un événement sous mu_{beta,ell,n}"""
    return float(ExactEnumerator(geometry, grid, q).probabilities([event])[event.name])


def two_site_closed_form(q: int, beta: int, n: int) -> float:
    """Z_n sur la chaîne à deux sites: q^2 - 1 + (1 + 1/n)^(2 beta n - 1)"""
    return q * q - 1 + (1 + 1 / n) ** (2 * beta * n - 1)


# ============ Matrice de transfert ============

class TransferMatrixOracle:
    """
    Évaluation exacte à n fini: Z_n = Tr T^N avec T = 1 - H/n et N = 2 beta n - 1

    Chaque créneau contribue un facteur 1 + (1/n) somme_e P0_e (au plus une barre par créneau).
    """

    def __init__(self, geometry: ChainGeometry, grid: TimeGrid, q: int):
        self.geometry = geometry
        self.grid = grid
        self.q = q
        self.twice_S = q - 1
        h = build_hamiltonian(geometry.ell, q)
        self.spectrum = Spectrum(h)
        factors = (1.0 - self.spectrum.energies / grid.n) ** grid.n_slots
        # Normalisation par le plus grand facteur pour éviter les débordements
        self._scale = float(factors.max())
        self._weights = factors / self._scale
        self.Z = float(self._weights.sum() * self._scale)
        logger.debug(f"Matrice de transfert: Z_n = {self.Z:.10g}")

    def expectation(self, observable: np.ndarray) -> float:
        """Tr(A T^N) / Tr T^N"""
        v = self.spectrum.vectors
        diag = np.einsum("ik,ij,jk->k", v.conj(), observable, v)
        return float(np.real(np.dot(self._weights, diag)) / self._weights.sum())

    def bond_energy(self, x: int) -> float:
        return self.expectation(bond_projector(x, self.geometry.ell, self.q))

    def nearest_neighbour_connectivity(self, x: int) -> float:
        """P_n(x <-> x+1) = (<P0_{x,x+1}> - 1/q^2) / (1 - 1/q^2)"""
        inv = 1.0 / self.q ** 2
        return (self.bond_energy(x) - inv) / (1.0 - inv)

    def pair_connectivity(self, x: int, y: int) -> float:
        """P_n(x <-> y) = 3 (-1)^(x-y) <S3_x S3_y> / (S(S+1))"""
        if x == y:
            return 1.0
        S = self.twice_S / 2
        phase, product = site_spin_product(self.geometry.ell, self.twice_S, x, y, 3, 3)
        value = float(np.real(phase * self.expectation(product)))
        return 3 * (-1) ** abs(x - y) * value / (S * (S + 1))

    def result(self, pairs: Sequence[Tuple[int, int]] = ()) -> ExactResult:
        return ExactResult(
            Z=self.Z,
            n_configs=0,
            event_probabilities={f"{x}<->{y}": min(max(self.pair_connectivity(x, y), 0.0), 1.0) for x, y in pairs},
            method="transfer-matrix",
            provenance={"ell": self.geometry.ell, "beta": self.grid.beta, "n": self.grid.n, "q": self.q},
        )


def bond_profile_exact(geometry: ChainGeometry, grid: TimeGrid, q: int) -> List[float]:
    """Profil <P0_{x,x+1}> du modèle de boucles à n fini"""
    oracle = TransferMatrixOracle(geometry, grid, q)
    return [oracle.bond_energy(x) for x in geometry.edges]
