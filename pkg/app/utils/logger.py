"""
Logging du laboratoire: un fichier tournant partagé et la console (stderr)

Les sorties JSON/CSV de la CLI passent par des fichiers et stdout; les logs
restent sur stderr pour ne jamais s'y mêler.
"""
import logging
import os
from functools import lru_cache
from logging.handlers import RotatingFileHandler
from typing import Tuple

from app.config import settings

LOG_FORMAT = '%(asctime)s - %(processName)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
LOG_FILE = 'loop_lab.log'


@lru_cache(maxsize=1)
def _handlers() -> Tuple[logging.Handler, logging.Handler]:
    """Handlers partagés par tous les loggers du processus"""
    os.makedirs(settings.LOGS_DIR, exist_ok=True)
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    file_handler = RotatingFileHandler(
        os.path.join(settings.LOGS_DIR, LOG_FILE),
        maxBytes=settings.LOG_MAX_BYTES,
        backupCount=settings.LOG_BACKUP_COUNT,
        encoding='utf-8',
        delay=True,
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(formatter)
    return file_handler, console_handler


def setup_logger(name: str = __name__) -> logging.Logger:
    """
    Retourne le logger `name` branché sur les handlers partagés

    Args:
        name: Nom du logger (en général __name__)

    Returns:
        Logger configuré
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    logger.setLevel(getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))
    for handler in _handlers():
        logger.addHandler(handler)
    logger.propagate = False
    return logger


def set_console_level(level: int) -> None:
    """Ajuste la verbosité console (options --verbose / --quiet de la CLI)"""
    _handlers()[1].setLevel(level)


app_logger = setup_logger('loop_lab')
