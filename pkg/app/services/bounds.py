"""
Bornes explicites de l'argument de Peierls: somme sur les contours, c(S),
seuil en S et taux de décroissance exponentielle
"""
import math
from typing import Dict, List, Sequence

import numpy as np
from scipy import optimize

from app.exceptions import DivergentSeriesError, InvalidParameterError
from app.schemas import BoundReport
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

# S = 15/2: r = 4/sqrt(2S+1) = 1
CONVERGENCE_EDGE = 7.5
THRESHOLD_BRACKET = (CONVERGENCE_EDGE, 100.0)


def _fugacity(S: float) -> float:
    if S <= 0:
        raise InvalidParameterError(f"S doit être strictement positif (reçu {S})")
    return 2 * S + 1


def geometric_tail(r, m: int):
    """Somme_{k>=m} (k+1) r^k = r^m ((m+1) - m r) / (1-r)^2 (série géométrique dérivée)"""
    return r ** m * ((m + 1) - m * r) / (1 - r) ** 2


def truncated_tail(r: float, m: int, rtol: float = 1e-17, max_terms: int = 100000) -> float:
    """Somme partielle de la même série, arrêtée quand les termes deviennent négligeables"""
    total = 0.0
    for k in range(m, m + max_terms):
        term = (k + 1) * r ** k
        total += term
        if term < rtol * total:
            break
    return total


def peierls_pieces(S: float) -> Dict[str, float]:
    """
    Les trois contributions de la borne: contours k=5, k=6 et queue k >= 7

    Raises:
        DivergentSeriesError: si S <= 15/2
    """
    q = _fugacity(S)
    r = 4 / math.sqrt(q)
    if r >= 1:
        raise DivergentSeriesError(f"Série divergente pour S={S} (4/sqrt(2S+1) = {r:.6f} >= 1)")
    return {
        "k5": 64 * q ** -1.5,
        "k6": 128 * q ** -2,
        "tail": q / 12 * geometric_tail(r, 7),
    }


def peierls_bound(S: float) -> float:
    """64/q^{3/2} + 128/q^2 + (1/12) somme_{k>=7} (k+1) 4^k / q^{k/2-1}, q = 2S+1"""
    return sum(peierls_pieces(S).values())


def peierls_bound_truncated(S: float) -> float:
    """Même borne, queue évaluée par sommation directe (contrôle)"""
    q = _fugacity(S)
    r = 4 / math.sqrt(q)
    if r >= 1:
        raise DivergentSeriesError(f"Série divergente pour S={S}")
    return 64 * q ** -1.5 + 128 * q ** -2 + q / 12 * truncated_tail(r, 7)


def peierls_bound_array(S: np.ndarray) -> np.ndarray:
    """Version vectorisée (S > 15/2 supposé)"""
    q = 2 * np.asarray(S, dtype=float) + 1
    r = 4 / np.sqrt(q)
    return 64 * q ** -1.5 + 128 * q ** -2.0 + q / 12 * geometric_tail(r, 7)


def c_of_S(S: float) -> float:
    """c(S) = (1 - 1/q^2)(1 - 2 borne(S))"""
    q = _fugacity(S)
    return (1 - 1 / q ** 2) * (1 - 2 * peierls_bound(S))


def dimerization_threshold(xtol: float = 1e-6) -> float:
    """Racine S* de borne(S) = 1/2 par bissection sur (15/2, 100]"""
    lo, hi = THRESHOLD_BRACKET
    root = optimize.bisect(lambda s: peierls_bound(s) - 0.5, lo + 1e-9, hi, xtol=xtol)
    logger.debug(f"Seuil de dimérisation: S* = {root:.6f}")
    return float(root)


def threshold_grid_scan(lo: float = 8.0, hi: float = 100.0, step: float = 1e-7) -> float:
    """
    Premier point de grille où la borne passe sous 1/2 (contrôle indépendant de la bissection)

    Balayage grossier au pas 1e-3, puis balayage au pas `step` dans la cellule trouvée.
    """
    for current_step in (1e-3, step):
        grid = np.arange(lo, hi + current_step, current_step)
        below = np.nonzero(peierls_bound_array(grid) < 0.5)[0]
        if len(below) == 0:
            raise InvalidParameterError(f"Pas de passage sous 1/2 sur [{lo}, {hi}]")
        i = below[0]
        if i == 0:
            return float(grid[0])
        lo, hi = float(grid[i - 1]), float(grid[i])
    return hi


def decay_rate(S: float) -> float:
    """eta_min = 1 / ln(sqrt(q)/4): plus petit eta pour lequel 4 e^{1/eta} / sqrt(q) < 1"""
    q = _fugacity(S)
    ratio = math.sqrt(q) / 4
    if ratio <= 1:
        raise DivergentSeriesError(f"Pas de décroissance contrôlée pour S={S}")
    return 1 / math.log(ratio)


def decay_tail_bound(S: float, eta: float, m: int) -> float:
    """
    (1/12) somme_{k>=m} (k+1) (4 e^{1/eta})^k q^{1-k/2}

    Args:
        S: Spin
        eta: Longueur de décroissance, eta > eta_min(S)
        m: Distance |x - y|
    """
    q = _fugacity(S)
    if eta <= 0:
        raise InvalidParameterError(f"eta doit être > 0 (reçu {eta})")
    rho = 4 * math.exp(1 / eta) / math.sqrt(q)
    if rho >= 1:
        raise DivergentSeriesError(f"eta={eta} trop petit pour S={S} (eta_min={decay_rate(S) if q > 16 else math.inf})")
    return q / 12 * geometric_tail(rho, m)


def winding_suppression_bound(q: float, ell: int, n: int) -> float:
    """
    (1 + q^-2/n)^{ell n} / (1 + 1/n)^{(2 ell + 1) n}: minoration de la probabilité
    d'une couche complète de dimères dans une fenêtre de temps unité
    """
    return (1 + q ** -2 / n) ** (ell * n) / (1 + 1 / n) ** ((2 * ell + 1) * n)


def bound_report(S: float) -> BoundReport:
    q = _fugacity(S)
    try:
        pieces = peierls_pieces(S)
    except DivergentSeriesError:
        return BoundReport(S=S, q=q, series_convergent=False)
    total = sum(pieces.values())
    return BoundReport(
        S=S,
        q=q,
        series_convergent=True,
        peierls_bound=total,
        k5_term=pieces["k5"],
        k6_term=pieces["k6"],
        tail_term=pieces["tail"],
        c_of_S=(1 - 1 / q ** 2) * (1 - 2 * total),
        eta_min=decay_rate(S) if math.sqrt(q) > 4 else None,
    )


def bounds_table(S_grid: Sequence[float]) -> List[BoundReport]:
    """Rapport de bornes pour chaque S de la grille"""
    return [bound_report(S) for S in S_grid]


def parse_S_grid(grid: str) -> List[float]:
    """
    Lit une grille 'debut:fin:pas' (fin incluse) ou une liste 'a,b,c'
    """
    grid = grid.strip()
    if ":" in grid:
        parts = grid.split(":")
        if len(parts) != 3:
            raise InvalidParameterError(f"Grille attendue 'debut:fin:pas', reçu {grid!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise InvalidParameterError(f"Grille vide ou pas invalide: {grid!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(p) for p in grid.split(",") if p.strip()]
