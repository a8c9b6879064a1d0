"""
Archive SQLite des exécutions (configuration et résultat de chaque commande archivée)
"""
from contextlib import contextmanager
from typing import Iterator

from sqlalchemy import Engine, create_engine, event, inspect, text
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from app.config import settings
from app.utils.logger import app_logger


def make_engine(url: str) -> Engine:
    """
    Crée le moteur de l'archive

    Pour SQLite, la session peut changer de thread sous FastAPI et la CLI peut
    écrire pendant que l'API lit: on désactive le contrôle de thread et on attend
    le verrou au lieu d'échouer.
    """
    is_sqlite = url.startswith("sqlite")
    engine = create_engine(
        url,
        connect_args={"check_same_thread": False, "timeout": 30} if is_sqlite else {},
        pool_pre_ping=True,
        echo=settings.DEBUG,
    )

    if is_sqlite:
        @event.listens_for(engine, "connect")
        def _sqlite_pragmas(dbapi_conn, connection_record):
            cursor = dbapi_conn.cursor()
            cursor.execute("PRAGMA busy_timeout = 30000")
            cursor.close()

    return engine


engine = make_engine(settings.DATABASE_URL)
SessionLocal = sessionmaker(bind=engine, autocommit=False, autoflush=False)
Base = declarative_base()


def get_db() -> Iterator[Session]:
    """Dépendance FastAPI: une session par requête"""
    db = SessionLocal()
    try:
        yield db
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()


@contextmanager
def get_db_context() -> Iterator[Session]:
    """
    Session transactionnelle pour la CLI (--archive): commit en sortie, rollback sur erreur
    """
    db = SessionLocal()
    try:
        yield db
        db.commit()
    except Exception as e:
        app_logger.error(f"❌ Archivage annulé: {e}")
        db.rollback()
        raise
    finally:
        db.close()


def init_db() -> None:
    """Crée la table run_records si elle n'existe pas encore"""
    from app import models  # noqa: F401  (enregistre RunRecord sur Base.metadata)

    existed = inspect(engine).has_table(models.RunRecord.__tablename__)
    Base.metadata.create_all(bind=engine)
    if not existed:
        app_logger.info(f"📦 Archive créée: {engine.url.render_as_string(hide_password=True)}")


def check_db_connection() -> bool:
    """
    Vérifie que l'archive répond

    Returns:
        True si la connexion est OK, False sinon
    """
    try:
        with engine.connect() as conn:
            conn.execute(text("SELECT 1"))
        return True
    except Exception as e:
        app_logger.error(f"❌ Archive inaccessible ({settings.DATABASE_URL}): {e}")
        return False
