"""
Archivage des exécutions dans la table run_records
"""
from typing import Any, Dict, List, Optional

from sqlalchemy.orm import Session

from app.models import RunRecord
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def archive_run(
    db: Session,
    command: str,
    config: Dict[str, Any],
    result: Dict[str, Any],
    seed: Optional[int] = None,
) -> RunRecord:
    """
    Enregistre une exécution

    Args:
        db: Session SQLAlchemy
        command: Sous-commande exécutée
        config: Configuration complète (JSON)
        result: Résultat (JSON)
        seed: Graine de l'exécution, si elle en a une

    Returns:
        L'enregistrement créé
    """
    record = RunRecord(
        command=command,
        seed=None if seed is None else str(seed),
        config=config,
        result=result,
    )
    db.add(record)
    db.commit()
    db.refresh(record)
    logger.info(f"💾 Exécution archivée: #{record.id} ({command})")
    return record


def list_runs(db: Session, command: Optional[str] = None, skip: int = 0, limit: int = 100) -> List[RunRecord]:
    query = db.query(RunRecord)
    if command:
        query = query.filter(RunRecord.command == command)
    return query.order_by(RunRecord.created_at.desc(), RunRecord.id.desc()).offset(skip).limit(limit).all()


def get_run(db: Session, run_id: int) -> Optional[RunRecord]:
    return db.query(RunRecord).filter(RunRecord.id == run_id).first()
