"""
Écriture des fichiers de résultats (CSV, JSON) avec la configuration complète embarquée
"""
import csv
import json
import os
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence

from app.config import settings
from app.schemas import RunConfig
from app.services.run_config import PROVENANCE_PREFIX, format_config
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


class ResultWriter:
    """
    Seul point d'écriture d'une exécution: chaque fichier embarque la RunConfig et la graine

    Args:
        config: Configuration de l'exécution
        output_dir: Répertoire de sortie (doit exister sauf s'il s'agit du répertoire par défaut)
    """

    def __init__(self, config: RunConfig, output_dir: Optional[str] = None):
        self.config = config
        self.output_dir = output_dir or config.output_dir
        if not os.path.isdir(self.output_dir):
            if os.path.normpath(self.output_dir) == os.path.normpath(settings.OUTPUT_DIR):
                os.makedirs(self.output_dir, exist_ok=True)
            else:
                raise FileNotFoundError(f"Répertoire de sortie introuvable: {self.output_dir}")
        self.written: List[str] = []

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def provenance(self) -> Dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "seed": self.config.seed,
            "version": settings.APP_VERSION,
            "written_at": datetime.now().isoformat(timespec="seconds"),
        }

    def write_json(self, name: str, payload: Dict[str, Any]) -> str:
        """Écrit payload + provenance en JSON"""
        if "json" not in self.config.formats:
            return ""
        path = self._path(name)
        document = dict(payload)
        document.setdefault("provenance", {}).update(self.provenance())
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, default=str)
        self.written.append(path)
        logger.info(f"💾 Résultat JSON écrit: {path}")
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        """Écrit un CSV précédé des lignes '#config clé = valeur'"""
        if "csv" not in self.config.formats:
            return ""
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in format_config(self.config).splitlines():
                f.write(f"{PROVENANCE_PREFIX}{line}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        self.written.append(path)
        logger.info(f"💾 Résultat CSV écrit: {path}")
        return path


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    """Relit un CSV écrit par ResultWriter (lignes de provenance ignorées)"""
    with open(path, encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith(PROVENANCE_PREFIX)]
    return list(csv.DictReader(lines))
