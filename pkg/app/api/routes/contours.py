"""
Routes API pour l'analyse des boucles et contours d'une configuration soumise
"""
from fastapi import APIRouter, HTTPException

from app.exceptions import LoopModelError
from app.schemas import BarConfiguration, ConfigurationPayload
from app.services.chain_model import build_geometry, build_grid, validate_config
from app.services.contours import contour_census, omega_alpha_members
from app.services.loop_engine import LoopSet
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

router = APIRouter(prefix="/api/contours", tags=["Contours"])


def _trace(payload: ConfigurationPayload) -> LoopSet:
    geometry, grid = build_geometry(payload.ell), build_grid(payload.beta, payload.n)
    config = BarConfiguration.from_pairs(payload.bars)
    report = validate_config(geometry, grid, config)
    if not report.valid:
        raise HTTPException(
            status_code=422,
            detail=[v.model_dump(mode="json") for v in report.violations],
        )
    return LoopSet(geometry, grid, config.by_slot())


@router.post(
    "/loops",
    summary="Décomposition en boucles",
    description="Boucles d'une configuration: enroulement, support, extension verticale"
)
def get_loops(payload: ConfigurationPayload):
    try:
        loop_set = _trace(payload)
        return {
            "total_loops": loop_set.total_loops,
            "loops": [
                {
                    "id": loop.id,
                    "winding": loop.winding,
                    "n_bars": loop.n_bars,
                    "site_min": loop.site_min,
                    "site_max": loop.site_max,
                    "vertical_extent": loop.vertical_extent,
                }
                for loop in loop_set.loops
            ],
        }
    except (HTTPException, LoopModelError):
        raise
    except Exception as e:
        logger.error(f"Erreur lors du tracé des boucles: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors du tracé des boucles")


@router.post(
    "",
    summary="Recensement des contours",
    description="Contours (boucles longues avec un saut sur E2) et appartenance aux Omega^alpha"
)
def get_census(payload: ConfigurationPayload):
    """
    **Erreurs:**
    - 400: Une boucle s'enroule (les intérieurs ne sont pas définis)
    - 422: Configuration hors de Omega
    """
    try:
        loop_set = _trace(payload)
        if loop_set.winding_loops():
            raise HTTPException(status_code=400, detail="Configuration avec une boucle qui s'enroule")
        census = contour_census(loop_set)
        logger.info(f"Recensement: {len(census)} contour(s)")
        return {
            "contours": [info.model_dump(mode="json") for info in census],
            "omega_alpha": omega_alpha_members(loop_set.geometry, loop_set.grid, loop_set.by_slot),
        }
    except (HTTPException, LoopModelError):
        raise
    except Exception as e:
        logger.error(f"Erreur lors du recensement: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors du recensement")
