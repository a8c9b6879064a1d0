"""
Routes API pour les oracles exacts (énumération, matrice de transfert)
"""
from fastapi import APIRouter, HTTPException

from app.exceptions import LoopModelError
from app.schemas import EnumerationRequest, ExactResult
from app.services.chain_model import build_geometry, build_grid
from app.services.enumerator import (
    TransferMatrixOracle,
    connected_event,
    empty_event,
    enumerate_Z,
)
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

router = APIRouter(prefix="/api/enumeration", tags=["Énumération"])


@router.post(
    "",
    response_model=ExactResult,
    summary="Évaluation exacte",
    description="Z_n et probabilités de connexion exactes à n fini"
)
def evaluate(request: EnumerationRequest):
    """
    Évaluation exacte du modèle de boucles

    **Paramètres:**
    - **method**: "enumeration" (poids rationnels exacts) ou "transfer-matrix"
    - **pairs**: Paires (x, y) dont on veut P(x <-> y)

    **Erreurs:**
    - 400: Instance au-delà du budget, paramètres invalides
    """
    try:
        geometry = build_geometry(request.ell)
        grid = build_grid(request.beta, request.n)
        q = request.twice_S + 1
        for x, y in request.pairs:
            if not (geometry.has_site(x) and geometry.has_site(y)):
                raise HTTPException(status_code=400, detail=f"Paire ({x}, {y}) hors de la chaîne")

        if request.method == "transfer-matrix":
            result = TransferMatrixOracle(geometry, grid, q).result(request.pairs)
        else:
            events = [empty_event()] + [connected_event(x, y) for x, y in request.pairs]
            result = enumerate_Z(geometry, grid, q, events)
        logger.info(f"Évaluation exacte ({request.method}): Z = {result.Z:.10g}")
        return result

    except (HTTPException, LoopModelError):
        raise
    except Exception as e:
        logger.error(f"Erreur lors de l'évaluation exacte: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors de l'évaluation exacte")
