"""
Routes API pour les simulations Monte Carlo (exécution synchrone et archive)
"""
from typing import List, Optional

from fastapi import APIRouter, Depends, HTTPException, Query
from sqlalchemy.orm import Session

from app.database import get_db
from app.exceptions import LoopModelError
from app.schemas import RunRecordResponse, SimulationRequest
from app.services.archive import archive_run, get_run, list_runs
from app.services.sampler import run
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

router = APIRouter(prefix="/api/simulations", tags=["Simulations"])

# Nombre maximal de propositions d'une simulation synchrone
MAX_SYNC_PROPOSALS = 5_000_000


@router.post(
    "",
    response_model=RunRecordResponse,
    summary="Lancer une simulation",
    description="Exécute une petite chaîne de façon synchrone et l'archive"
)
def launch_simulation(request: SimulationRequest, db: Session = Depends(get_db)):
    """
    Lance une simulation et archive son résultat

    **Erreurs:**
    - 400: Simulation trop longue pour une exécution synchrone, paramètres invalides
    """
    try:
        p = request.params
        proposals = p.n_sweeps * (2 * p.beta * p.n - 1)
        if proposals > MAX_SYNC_PROPOSALS:
            raise HTTPException(
                status_code=400,
                detail=f"{proposals} propositions: au-delà de {MAX_SYNC_PROPOSALS}, utiliser la CLI",
            )
        result = run(p, request.observables)
        record = archive_run(
            db,
            command="simulate",
            config=request.model_dump(mode="json"),
            result=result.model_dump(mode="json"),
            seed=p.seed,
        )
        return record

    except (HTTPException, LoopModelError):
        raise
    except Exception as e:
        logger.error(f"Erreur lors de la simulation: {e}")
        db.rollback()
        raise HTTPException(status_code=500, detail="Erreur lors de la simulation")


@router.get(
    "",
    response_model=List[RunRecordResponse],
    summary="Exécutions archivées",
    description="Liste paginée des exécutions archivées"
)
def get_runs(
    command: Optional[str] = Query(None, description="Filtrer par sous-commande"),
    skip: int = Query(0, ge=0, description="Nombre d'éléments à sauter"),
    limit: int = Query(100, ge=1, le=1000, description="Nombre maximum d'éléments"),
    db: Session = Depends(get_db)
):
    try:
        records = list_runs(db, command=command, skip=skip, limit=limit)
        logger.info(f"Récupération de {len(records)} exécution(s)")
        return records
    except Exception as e:
        logger.error(f"Erreur lors de la récupération des exécutions: {e}")
        raise HTTPException(status_code=500, detail="Erreur lors de la récupération des exécutions")


@router.get(
    "/{run_id}",
    response_model=RunRecordResponse,
    summary="Exécution archivée",
    description="Configuration et résultat d'une exécution"
)
def get_run_by_id(run_id: int, db: Session = Depends(get_db)):
    """
    **Erreurs:**
    - 404: Exécution inconnue
    """
    try:
        record = get_run(db, run_id)
        if not record:
            logger.warning(f"Exécution non trouvée: {run_id}")
            raise HTTPException(status_code=404, detail=f"Exécution {run_id} non trouvée")
        return record
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"Erreur lors de la récupération de l'exécution {run_id}: {e}")
        raise HTTPException(status_code=500, detail="Erreur serveur")
