"""
Observables mesurées sur une configuration tracée et estimateurs dérivés
"""
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from app.exceptions import InvalidParameterError
from app.schemas import ChainGeometry, ObservableRequest, TimeGrid
from app.services.contours import omega_alpha_members, surrounds
from app.services.loop_engine import LoopSet
from app.services.statistics import binned_error, ratio_estimate
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def observable_names(geometry: ChainGeometry, grid: TimeGrid, request: ObservableRequest) -> List[str]:
    """Noms des séries produites par `measure`, dans un ordre fixe"""
    names = ["loop_count", "n_bars", "n_winding", "n_long"]
    names += [f"conn_{x}_{y}" for x, y in request.pairs]
    if request.dimer_profile:
        names += [f"bond_{x}" for x in geometry.edges]
    if request.omega_alpha or request.surround_sites:
        names += [f"omega_{a}" for a in range(-grid.beta, grid.beta)] + ["omega"]
        names += [f"joint_bond_{x}" for x in geometry.edges]
        names += [f"joint_surround_{x}" for x in request.surround_sites]
    return names


def validate_request(geometry: ChainGeometry, request: ObservableRequest) -> None:
    for x, y in request.pairs:
        if not (geometry.has_site(x) and geometry.has_site(y)):
            raise InvalidParameterError(f"Paire ({x}, {y}) hors de la chaîne ell={geometry.ell}")
    for x in request.surround_sites:
        if not geometry.has_site(x):
            raise InvalidParameterError(f"Site {x} hors de la chaîne ell={geometry.ell}")


def measure(loop_set: LoopSet, request: ObservableRequest) -> Dict[str, float]:
    """
    Mesure toutes les observables demandées sur une configuration

    Args:
        loop_set: Décomposition courante
        request: Observables demandées

    Returns:
        Dictionnaire nom -> valeur
    """
    geometry, grid = loop_set.geometry, loop_set.grid
    values: Dict[str, float] = {
        "loop_count": loop_set.total_loops,
        "n_bars": len(loop_set.by_slot),
        "n_winding": len(loop_set.winding_loops()),
        "n_long": sum(1 for loop in loop_set.loops if not loop.is_short),
    }
    for x, y in request.pairs:
        values[f"conn_{x}_{y}"] = float(loop_set.connected(x, y))

    bonds = {x: float(loop_set.connected(x, x + 1)) for x in geometry.edges}
    if request.dimer_profile:
        for x, v in bonds.items():
            values[f"bond_{x}"] = v

    if request.omega_alpha or request.surround_sites:
        members = set(omega_alpha_members(geometry, grid, loop_set.by_slot))
        for a in range(-grid.beta, grid.beta):
            values[f"omega_{a}"] = float(a in members)
        in_union = bool(members)
        values["omega"] = float(in_union)
        for x, v in bonds.items():
            values[f"joint_bond_{x}"] = v if in_union else 0.0
        for x in request.surround_sites:
            # Aucune boucle ne s'enroule sur Omega^alpha: E_x y est défini
            values[f"joint_surround_{x}"] = float(in_union and surrounds(loop_set, x))
    return values


# ============ Estimateurs dérivés ============

def _estimate(series: np.ndarray, scale: float = 1.0, shift: float = 0.0) -> Dict[str, float]:
    report = binned_error(series)
    return {"mean": shift + scale * report.mean, "error": abs(scale) * report.error}


def bond_energy_profile(traces: Mapping[str, np.ndarray], geometry: ChainGeometry, q: int) -> Dict[int, Dict[str, float]]:
    """<P0_{x,x+1}> = 1/q^2 + (1 - 1/q^2) P(x <-> x+1)"""
    inv = 1.0 / q ** 2
    return {
        x: _estimate(traces[f"bond_{x}"], scale=1.0 - inv, shift=inv)
        for x in geometry.edges
        if f"bond_{x}" in traces
    }


def dimerization(traces: Mapping[str, np.ndarray], geometry: ChainGeometry, q: int) -> Dict[int, Dict[str, float]]:
    """D(x) = <P0_{x,x+1}> - <P0_{x-1,x}> sur les liaisons E1 intérieures"""
    scale = 1.0 - 1.0 / q ** 2
    result = {}
    for x in geometry.interior_e1_edges():
        if f"bond_{x}" in traces and f"bond_{x - 1}" in traces:
            result[x] = _estimate(traces[f"bond_{x}"] - traces[f"bond_{x - 1}"], scale=scale)
    return result


def spin_correlations(traces: Mapping[str, np.ndarray], pairs: Sequence[Tuple[int, int]], twice_S: int) -> Dict[str, Dict[str, float]]:
    """<S^i_x S^i_y> = (1/3) S(S+1) (-1)^(x-y) P(x <-> y)"""
    S = twice_S / 2
    result = {}
    for x, y in pairs:
        sign = (-1) ** abs(x - y)
        result[f"{x},{y}"] = _estimate(traces[f"conn_{x}_{y}"], scale=sign * S * (S + 1) / 3)
    return result


def conditional_probabilities(traces: Mapping[str, np.ndarray]) -> Dict[str, Dict[str, float]]:
    """P(A | union des Omega^alpha) estimée par rapport joint / marginal"""
    if "omega" not in traces or traces["omega"].sum() == 0:
        return {}
    result = {}
    for name, series in traces.items():
        if name.startswith("joint_"):
            r, err = ratio_estimate(series, traces["omega"])
            result[name[len("joint_"):]] = {"mean": r, "error": err}
    return result


def surround_margins(traces: Mapping[str, np.ndarray], geometry: ChainGeometry, sites: Sequence[int]) -> Dict[int, Dict[str, float]]:
    """
    Marge P(x<->x+1|Omega) - P(x-1<->x|Omega) - (1 - 2 P(E_x|Omega)), positive attendue

    Rapport linéarisé par la méthode delta.
    """
    if "omega" not in traces or traces["omega"].sum() == 0:
        return {}
    result = {}
    for x in sites:
        keys = (f"joint_bond_{x}", f"joint_bond_{x - 1}", f"joint_surround_{x}")
        if not all(k in traces for k in keys):
            continue
        numerator = traces[keys[0]] - traces[keys[1]] + 2 * traces[keys[2]]
        r, err = ratio_estimate(numerator, traces["omega"])
        result[x] = {"mean": r - 1.0, "error": err}
    return result


def decay_fit(distances: Sequence[int], probabilities: Sequence[float]) -> Dict[str, float]:
    """
    Ajustement log-linéaire log P = a - rate * d par moindres carrés

    Returns:
        {"rate", "intercept", "n_points"}
    """
    d = np.asarray(distances, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    mask = p > 0
    if mask.sum() < 2:
        return {"rate": float("nan"), "intercept": float("nan"), "n_points": int(mask.sum())}
    slope, intercept = np.polyfit(d[mask], np.log(p[mask]), 1)
    return {"rate": float(-slope), "intercept": float(intercept), "n_points": int(mask.sum())}


def derive_estimates(
    traces: Mapping[str, np.ndarray],
    geometry: ChainGeometry,
    twice_S: int,
    request: ObservableRequest,
) -> Dict[str, object]:
    """Assemble tous les estimateurs dérivés d'une chaîne"""
    q = twice_S + 1
    derived: Dict[str, object] = {}
    if request.dimer_profile:
        derived["bond_energy"] = {str(k): v for k, v in bond_energy_profile(traces, geometry, q).items()}
        derived["dimerization"] = {str(k): v for k, v in dimerization(traces, geometry, q).items()}
    if request.pairs:
        derived["spin_correlation"] = spin_correlations(traces, request.pairs, twice_S)
        far = [(abs(x - y), float(traces[f"conn_{x}_{y}"].mean())) for x, y in request.pairs if x != y]
        if len(far) >= 2:
            derived["decay_fit"] = decay_fit([d for d, _ in far], [p for _, p in far])
    if "omega" in traces:
        derived["omega_fraction"] = float(traces["omega"].mean())
        derived["conditional"] = conditional_probabilities(traces)
        if request.surround_sites:
            derived["surround_margin"] = {
                str(k): v for k, v in surround_margins(traces, geometry, request.surround_sites).items()
            }
    return derived
