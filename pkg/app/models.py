"""
Modèles SQLAlchemy pour l'archive des exécutions
"""
from sqlalchemy import JSON, Column, DateTime, Index, Integer, String
from sqlalchemy.sql import func

from app.database import Base


class RunRecord(Base):
    """
    Une exécution archivée: configuration complète et résultat JSON
    """
    __tablename__ = "run_records"

    id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String(20), nullable=False, index=True)
    # Graines Philox jusqu'à 2^64: stockées en texte pour SQLite
    seed = Column(String(24), nullable=True)
    config = Column(JSON, nullable=False)
    result = Column(JSON, nullable=False)
    created_at = Column(DateTime, default=func.now(), index=True)

    __table_args__ = (
        Index('idx_command_date', 'command', 'created_at'),
    )

    def __repr__(self):
        return f"<RunRecord {self.id} {self.command} seed={self.seed}>"
