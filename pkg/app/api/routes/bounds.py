"""
Routes API pour les bornes de Peierls
"""
from typing import List

from fastapi import APIRouter, HTTPException, Query

from app.exceptions import LoopModelError
from app.schemas import BoundReport
from app.services import bounds as bounds_service
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

router = APIRouter(prefix="/api/bounds", tags=["Bornes"])


@router.get(
    "",
    response_model=List[BoundReport],
    summary="Table des bornes",
    description="Borne de Peierls, c(S) et eta_min sur une grille de S"
)
def get_bounds_table(
    S_grid: str = Query("8:100:0.5", description="Grille 'debut:fin:pas' ou 'a,b,c'")
):
    """
    Table des bornes sur une grille de S

    **Paramètres:**
    - **S_grid**: Grille de spins

    **Retour:**
    - Un rapport par valeur de S (série divergente signalée pour S <= 15/2)
    """
    try:
        grid = bounds_service.parse_S_grid(S_grid)
        if len(grid) > 10000:
            raise HTTPException(status_code=400, detail="Grille trop grande (10000 points au plus)")
        reports = bounds_service.bounds_table(grid)
        logger.info(f"Table de bornes: {len(reports)} valeur(s) de S")
        return reports

    except (HTTPException, LoopModelError):
        raise
    except Exception as e:
        logger.error(f"Erreur lors du calcul de la table de bornes: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors du calcul des bornes")


@router.get(
    "/threshold",
    summary="Seuil de dimérisation",
    description="Plus petit S pour lequel la borne passe sous 1/2"
)
def get_threshold():
    try:
        threshold = bounds_service.dimerization_threshold()
        return {"S_star": threshold, "c_of_S_star": bounds_service.c_of_S(threshold)}
    except Exception as e:
        logger.error(f"Erreur lors du calcul du seuil: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors du calcul du seuil")


@router.get(
    "/{S}",
    response_model=BoundReport,
    summary="Borne pour un spin",
    description="Rapport complet pour une valeur de S"
)
def get_bound(S: float):
    """
    **Erreurs:**
    - 400: S <= 0
    """
    return bounds_service.bound_report(S)
