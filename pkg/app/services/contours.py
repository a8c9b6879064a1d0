"""
Analyse des contours: boucles longues, enroulement, intérieurs (parité de Jordan),
événements E_x et Omega^alpha, géométrie des contours
"""
import csv
import io
from typing import Dict, List, Optional

from app.exceptions import InvalidParameterError, NoInteriorError, NotApplicableError
from app.schemas import BarConfiguration, ChainGeometry, ContourInfo, TimeGrid
from app.services.loop_engine import Loop, LoopSet, on_loop, trace_loops
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

CENSUS_HEADER = ["loop_id", "n_bars", "length_L", "int1", "int2", "external", "encloses_origin"]


def classify_loops(loop_set: LoopSet) -> Dict[int, str]:
    """Boucle courte: au plus deux sites visités; longue sinon"""
    return {loop.id: ("short" if loop.is_short else "long") for loop in loop_set.loops}


def winding_filter(loop_set: LoopSet) -> List[Loop]:
    """Boucles d'enroulement non nul"""
    return loop_set.winding_loops()


def interior_contains(loop_set: LoopSet, loop: Loop, site: float, t: float = 0) -> bool:
    """
    Test de parité: le point (site, t) est-il à l'intérieur de la boucle ?

    Les points situés sur la boucle renvoient False (voir on_loop).

    Args:
        loop_set: Décomposition contenant la boucle
        loop: Boucle sans enroulement
        site: Abscisse du point (entière ou demi-entière)
        t: Instant sans barre (0 ou milieu de créneaux)
    """
    if loop.winding != 0:
        raise NoInteriorError(f"La boucle {loop.id} s'enroule (w={loop.winding}) et n'a pas d'intérieur")
    if site < loop.site_min or site > loop.site_max:
        return False
    if float(site).is_integer() and loop_set.geometry.has_site(int(site)) and on_loop(loop_set, loop, int(site), t):
        return False
    return loop_set.strands_left_of(loop.id, site, t) % 2 == 1


def _check_no_winding(loop_set: LoopSet) -> None:
    winding = loop_set.winding_loops()
    if winding:
        raise NotApplicableError(f"{len(winding)} boucle(s) s'enroulent: E_x n'est pas défini")


def surrounds(loop_set: LoopSet, x: int) -> bool:
    """E_x sur une décomposition déjà tracée et sans enroulement"""
    _check_no_winding(loop_set)
    owner = loop_set.loops[loop_set.loop_at(x, 0)]
    if not owner.is_short:
        return True
    return any(
        interior_contains(loop_set, loop, x, 0)
        for loop in loop_set.loops
        if not loop.is_short
    )


def event_Ex(
    geometry: ChainGeometry,
    grid: TimeGrid,
    config: BarConfiguration,
    x: int,
    loop_set: Optional[LoopSet] = None,
) -> bool:
    """
    Vrai si (x, 0) est sur une boucle longue ou à l'intérieur d'une boucle longue

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        config: Configuration sans boucle d'enroulement
        x: Site
        loop_set: Décomposition déjà calculée (optionnelle)
    """
    if not geometry.has_site(x):
        raise InvalidParameterError(f"Site {x} absent de la chaîne")
    loop_set = loop_set or trace_loops(geometry, grid, config)
    return surrounds(loop_set, x)


# ============ Omega^alpha ============

def window_slots(grid: TimeGrid, alpha: int) -> List[int]:
    """Créneaux de [alpha, alpha+1] (bornes incluses, -beta identifié à beta)"""
    if not -grid.beta <= alpha < grid.beta:
        raise InvalidParameterError(f"alpha={alpha} hors de [-{grid.beta}, {grid.beta - 1}]")
    slots = {grid.wrap(k) for k in range(alpha * grid.n, (alpha + 1) * grid.n + 1)}
    slots.discard(0)
    return sorted(slots)


def omega_alpha_members(geometry: ChainGeometry, grid: TimeGrid, by_slot: Dict[int, int]) -> List[int]:
    """Liste des alpha tels que la configuration appartient à Omega^alpha"""
    e1 = set(geometry.e1_edges)
    members = []
    for alpha in range(-grid.beta, grid.beta):
        edges = {by_slot[k] for k in window_slots(grid, alpha) if k in by_slot}
        if e1 <= edges and not (edges - e1):
            members.append(alpha)
    return members


def omega_alpha_member(
    geometry: ChainGeometry,
    grid: TimeGrid,
    config: BarConfiguration,
    alpha: int,
) -> bool:
    """
    Toute arête E1 porte au moins une barre dans [alpha, alpha+1], aucune arête E2 n'en porte
    """
    by_slot = config.by_slot()
    edges = {by_slot[k] for k in window_slots(grid, alpha) if k in by_slot}
    e1 = set(geometry.e1_edges)
    return e1 <= edges and not (edges - e1)


# ============ Géométrie des contours ============

def _representative_point(loop_set: LoopSet, loop: Loop):
    """Un point (site, t) de la boucle, t étant un milieu de créneaux"""
    seg = loop.segments[0]
    t = seg.lower + 0.5
    if t > loop_set.grid.half:
        t -= loop_set.grid.circumference
    return seg.site, t


def has_e2_jump(loop_set: LoopSet, loop: Loop) -> bool:
    geometry = loop_set.geometry
    return any(not geometry.is_e1(loop_set.by_slot[t]) for t in loop.bar_slots)


def is_enclosed(loop_set: LoopSet, loop: Loop) -> bool:
    """La boucle est-elle contenue dans l'intérieur d'une autre boucle longue sans enroulement ?"""
    site, t = _representative_point(loop_set, loop)
    for other in loop_set.loops:
        if other.id == loop.id or other.is_short or other.winding != 0:
            continue
        if interior_contains(loop_set, other, site, t):
            return True
    return False


def interior_cells(loop_set: LoopSet, loop: Loop) -> Dict[str, int]:
    """
    Comptage des cellules (arête, intervalle unité) intérieures, testées en leur milieu

    Returns:
        {"int1": cellules sur E1, "int2": cellules sur E2}
    """
    geometry, grid = loop_set.geometry, loop_set.grid
    counts = {"int1": 0, "int2": 0}
    for edge in range(loop.site_min, loop.site_max):
        key = "int1" if geometry.is_e1(edge) else "int2"
        for k in range(-grid.half, grid.half):
            if loop_set.strands_left_of(loop.id, edge + 1, k + 0.5) % 2 == 1:
                counts[key] += 1
    return counts


def contour_geometry(geometry: ChainGeometry, grid: TimeGrid, loop: Loop, loop_set: LoopSet) -> ContourInfo:
    """
    Géométrie d'une boucle longue sans enroulement

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        loop: Boucle analysée
        loop_set: Décomposition contenant la boucle

    Returns:
        ContourInfo (L défini par int1 - int2 = n L / 2)
    """
    if loop.winding != 0:
        raise NoInteriorError(f"La boucle {loop.id} s'enroule")
    if loop.is_short:
        raise NoInteriorError(f"La boucle {loop.id} est courte")

    cells = interior_cells(loop_set, loop)
    length_L = 2 * (cells["int1"] - cells["int2"]) / grid.n
    leg_length = loop.vertical_extent / grid.n
    support = sorted(
        x for x in geometry.edges if x in loop.site_support or x + 1 in loop.site_support
    )
    e2 = has_e2_jump(loop_set, loop)
    external = e2 and not is_enclosed(loop_set, loop)
    origin = on_loop(loop_set, loop, 0) or interior_contains(loop_set, loop, 0, 0)

    return ContourInfo(
        loop_id=loop.id,
        n_bars=loop.n_bars,
        int1_size=cells["int1"],
        int2_size=cells["int2"],
        length_L=length_L,
        leg_length=leg_length,
        legs_consistent=abs(abs(length_L) - leg_length) <= loop.n_bars / grid.n + 1e-12,
        support=support,
        has_e2_jump=e2,
        is_external=external,
        encloses_origin=origin,
    )


def contour_census(loop_set: LoopSet) -> List[ContourInfo]:
    """Tous les contours (boucles longues sans enroulement avec un saut sur E2)"""
    census = []
    for loop in loop_set.loops:
        if loop.is_short or loop.winding != 0 or not has_e2_jump(loop_set, loop):
            continue
        census.append(contour_geometry(loop_set.geometry, loop_set.grid, loop, loop_set))
    logger.debug(f"Recensement: {len(census)} contour(s)")
    return census


def external_contours(loop_set: LoopSet) -> List[ContourInfo]:
    return [info for info in contour_census(loop_set) if info.is_external]


def census_rows(rows: List[ContourInfo], sample: Optional[int] = None) -> List[list]:
    """Lignes du recensement dans l'ordre de CENSUS_HEADER (précédées de `sample` si fourni)"""
    prefix = [sample] if sample is not None else []
    return [
        prefix + [info.loop_id, info.n_bars, info.length_L, info.int1_size, info.int2_size,
                  int(info.is_external), int(info.encloses_origin)]
        for info in rows
    ]


def census_to_csv(rows: List[ContourInfo], sample: Optional[int] = None) -> str:
    """Recensement au format CSV (colonne `sample` si fournie)"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow((["sample"] if sample is not None else []) + CENSUS_HEADER)
    writer.writerows(census_rows(rows, sample))
    return buffer.getvalue()
