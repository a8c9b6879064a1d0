"""
Fixtures partagées: répertoires temporaires et configurations construites à la main
"""
import os
import tempfile

# Avant tout import de `app`: settings est lu à l'import
_WORKDIR = tempfile.mkdtemp(prefix="loop_lab_tests_")
os.environ["DATABASE_URL"] = f"sqlite:///{os.path.join(_WORKDIR, 'runs.db')}"
os.environ["LOGS_DIR"] = os.path.join(_WORKDIR, "logs")
os.environ["OUTPUT_DIR"] = os.path.join(_WORKDIR, "outputs")
os.environ["THREADS"] = "1"

import pytest  # noqa: E402

from app.schemas import BarConfiguration  # noqa: E402
from app.services.chain_model import build_geometry, build_grid  # noqa: E402
from app.services.loop_engine import LoopSet  # noqa: E402


@pytest.fixture
def geometry2():
    """Chaîne à quatre sites {-1, 0, 1, 2}: E1 = {-1, 1}, E2 = {0}"""
    return build_geometry(2)


@pytest.fixture
def grid14():
    """beta = 1, n = 4: créneaux -3..4 sauf 0, circonférence 8"""
    return build_grid(1, 4)


@pytest.fixture
def five_bar_config():
    """
    Contour à cinq barres sur ell = 2: arête -1 aux créneaux -2 et 3, arête 1 aux
    créneaux -1 et 2, barre E2 (arête 0) au créneau 1
    """
    return BarConfiguration.from_pairs([(-1, -2), (-1, 3), (1, -1), (1, 2), (0, 1)])


@pytest.fixture
def five_bar_loops(geometry2, grid14, five_bar_config):
    return LoopSet(geometry2, grid14, five_bar_config.by_slot())


@pytest.fixture
def dimer_config():
    """Une barre par arête E1 de ell = 2 (créneaux 1 et 2)"""
    return BarConfiguration.from_pairs([(-1, 1), (1, 2)])
