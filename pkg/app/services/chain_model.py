"""
Service de construction de la chaîne, de la grille temporelle et validation des configurations
"""
from collections import defaultdict
from typing import Dict, Iterable, List, Optional

import numpy as np
from pydantic import ValidationError

from app.exceptions import (
    ConfigParseError,
    InvalidConfigurationError,
    InvalidParameterError,
)
from app.schemas import (
    Bar,
    BarConfiguration,
    ChainGeometry,
    SpinWeight,
    TimeGrid,
    ValidityReport,
    Violation,
)
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def make_spin(twice_S: int) -> SpinWeight:
    """
    Construit le poids de spin à partir de 2S

    Args:
        twice_S: Deux fois le spin (entier >= 1)

    Returns:
        SpinWeight avec q = 2S + 1
    """
    if not isinstance(twice_S, int) or twice_S < 1:
        raise InvalidParameterError(f"twice_S doit être un entier >= 1 (reçu {twice_S!r})")
    return SpinWeight(twice_S=twice_S)


def build_geometry(ell: int) -> ChainGeometry:
    """
    Construit la chaîne paire de 2*ell sites et ses classes d'arêtes E1/E2

    Args:
        ell: Demi-longueur de la chaîne

    Returns:
        ChainGeometry validée
    """
    if not isinstance(ell, int) or ell < 1:
        raise InvalidParameterError(f"ell doit être un entier >= 1 (reçu {ell!r})")

    sites = tuple(range(-ell + 1, ell + 1))
    edges = tuple(range(-ell + 1, ell))
    # Les deux arêtes du bord sont dans E1
    classes = tuple("E1" if (x + ell - 1) % 2 == 0 else "E2" for x in edges)
    return ChainGeometry(ell=ell, sites=sites, edges=edges, edge_classes=classes)


def build_grid(beta: int, n: int) -> TimeGrid:
    """
    Construit la grille temporelle discrète

    Args:
        beta: Beta entier (>= 1)
        n: Résolution de Trotter (>= 1)

    Returns:
        TimeGrid validée
    """
    if not isinstance(beta, int) or beta < 1:
        raise InvalidParameterError(f"beta doit être un entier strictement positif (reçu {beta!r})")
    if not isinstance(n, int) or n < 1:
        raise InvalidParameterError(f"n doit être un entier strictement positif (reçu {n!r})")
    return TimeGrid(beta=beta, n=n)


def validate_config(
    geometry: ChainGeometry,
    grid: TimeGrid,
    config: BarConfiguration,
) -> ValidityReport:
    """
    Liste toutes les violations des contraintes de Omega (aucune exception levée)

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        config: Configuration de barres

    Returns:
        Rapport vide si et seulement si la configuration est dans Omega
    """
    violations: List[Violation] = []
    per_slot: Dict[int, List[Bar]] = defaultdict(list)

    for bar in config.bars:
        if bar.slot == 0:
            violations.append(Violation(
                kind="zero-time-bar", bar=bar,
                message=f"Barre au temps 0 sur l'arête {bar.edge}",
            ))
        elif not grid.has_slot(bar.slot):
            violations.append(Violation(
                kind="unknown-slot", bar=bar,
                message=f"Créneau {bar.slot} hors de [{-grid.half + 1}, {grid.half}]",
            ))
        if not geometry.has_edge(bar.edge):
            violations.append(Violation(
                kind="unknown-edge", bar=bar,
                message=f"Arête {{{bar.edge},{bar.edge + 1}}} absente de la chaîne ell={geometry.ell}",
            ))
        per_slot[bar.slot].append(bar)

    for slot, bars in per_slot.items():
        for extra in bars[1:]:
            violations.append(Violation(
                kind="slot-collision", bar=extra,
                message=f"Créneau {slot} déjà occupé par l'arête {bars[0].edge}",
            ))

    if violations:
        logger.debug(f"{len(violations)} violation(s) détectée(s)")
    return ValidityReport(violations=violations)


def require_valid(geometry: ChainGeometry, grid: TimeGrid, config: BarConfiguration) -> None:
    """Lève InvalidConfigurationError avec toutes les violations si config n'est pas dans Omega"""
    report = validate_config(geometry, grid, config)
    if not report.valid:
        raise InvalidConfigurationError([v.message for v in report.violations])


def dimer_configuration(
    geometry: ChainGeometry,
    grid: TimeGrid,
    bars_per_edge: int = 1,
    start_slot: int = 1,
    slots_per_edge: Optional[Dict[int, Iterable[int]]] = None,
) -> BarConfiguration:
    """
    Motif de dimères: des barres sur les arêtes E1 uniquement

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        bars_per_edge: Nombre de barres par arête E1 (placement automatique)
        start_slot: Premier créneau utilisé par le placement automatique
        slots_per_edge: Créneaux explicites par arête E1 (prioritaire)

    Returns:
        Configuration validée
    """
    pairs = []
    if slots_per_edge is not None:
        for edge, slots in slots_per_edge.items():
            if not geometry.has_edge(edge) or not geometry.is_e1(edge):
                raise InvalidParameterError(f"L'arête {edge} n'est pas une arête E1")
            pairs.extend((edge, s) for s in slots)
    else:
        slot = start_slot
        for edge in geometry.e1_edges:
            for _ in range(bars_per_edge):
                if slot == 0:
                    slot += 1
                pairs.append((edge, slot))
                slot += 1

    config = BarConfiguration.from_pairs(pairs)
    report = validate_config(geometry, grid, config)
    if not report.valid:
        raise InvalidParameterError(
            "Motif de dimères impossible sur cette grille: "
            + "; ".join(v.message for v in report.violations)
        )
    return config


def random_configuration(
    geometry: ChainGeometry,
    grid: TimeGrid,
    rng: np.random.Generator,
    n_bars: Optional[int] = None,
) -> BarConfiguration:
    """
    Configuration valide aléatoire: n_bars créneaux distincts, arêtes uniformes

    Args:
        geometry: Géométrie de la chaîne
        grid: Grille temporelle
        rng: Générateur numpy
        n_bars: Nombre de barres (défaut: uniforme dans [0, N_slots])
    """
    slots = np.asarray(grid.slots)
    if n_bars is None:
        n_bars = int(rng.integers(0, len(slots) + 1))
    if not 0 <= n_bars <= len(slots):
        raise InvalidParameterError(f"n_bars={n_bars} hors de [0, {len(slots)}]")
    chosen = rng.choice(slots, size=n_bars, replace=False)
    edges = rng.integers(geometry.edges[0], geometry.edges[-1] + 1, size=n_bars)
    return BarConfiguration.from_pairs(zip(edges.tolist(), chosen.tolist()))


# ============ Format texte "edge,slot" ============

def format_config_lines(config: BarConfiguration) -> str:
    """Sérialise une configuration en lignes 'edge_left_site,slot' triées canoniquement"""
    lines = config.to_lines()
    return "\n".join(lines) + ("\n" if lines else "")


def parse_config_lines(text: str) -> BarConfiguration:
    """
    Lit le format 'edge_left_site,slot' (lignes vides et commentaires '#' ignorés)

    Args:
        text: Contenu texte

    Returns:
        BarConfiguration (non validée contre une géométrie)
    """
    errors = []
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            errors.append(f"ligne {lineno}: attendu 'edge,slot', reçu {raw!r}")
            continue
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            errors.append(f"ligne {lineno}: entiers attendus, reçu {raw!r}")

    if errors:
        raise ConfigParseError(errors)

    try:
        return BarConfiguration.from_pairs(pairs)
    except ValidationError as e:
        raise ConfigParseError([str(e)])
