"""
Lecture et écriture des configurations de run au format plat "clé = valeur"
"""
from typing import Any, Callable, Dict, List, Mapping, Tuple

from pydantic import ValidationError

from app.exceptions import ConfigParseError, InvalidParameterError
from app.schemas import RunConfig
from app.services.bounds import parse_S_grid
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

POSITIVE_INTS = ("twice_S", "ell", "beta", "n", "n_sweeps", "measure_every", "n_chains")

# Lignes de configuration embarquées en tête des fichiers CSV
PROVENANCE_PREFIX = "#config "


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"booléen attendu, reçu {text!r}")


def _parse_pairs(text: str) -> List[Tuple[int, int]]:
    """'0:1, -1:2' -> [(0, 1), (-1, 2)]"""
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        x, y = item.split(":")
        pairs.append((int(x), int(y)))
    return pairs


def _parse_int_list(text: str) -> List[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _parse_str_list(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _parse_S_grid(text: str) -> List[float]:
    try:
        return parse_S_grid(text)
    except InvalidParameterError as e:
        raise ValueError(e.message)


def _optional(parser: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda text: None if text.strip().lower() in ("", "none") else parser(text)


CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "command": str.strip,
    "twice_S": int,
    "ell": int,
    "beta": int,
    "n": int,
    "n_sweeps": int,
    "n_burnin": int,
    "measure_every": int,
    "seed": int,
    "n_chains": int,
    "p_insert": float,
    "pairs": _parse_pairs,
    "surround_sites": _parse_int_list,
    "omega_alpha": _parse_bool,
    "beta_q": _optional(float),
    "S_grid": _parse_S_grid,
    "config_file": _optional(str.strip),
    "full": _parse_bool,
    "output_dir": str.strip,
    "formats": _parse_str_list,
}


def split_lines(text: str) -> Tuple[Dict[str, str], List[str]]:
    """Découpe le texte en couples clé/valeur bruts; renvoie aussi les erreurs de syntaxe"""
    raw: Dict[str, str] = {}
    errors: List[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(PROVENANCE_PREFIX):
            stripped = stripped[len(PROVENANCE_PREFIX):].strip()
        else:
            stripped = stripped.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"ligne {lineno}: 'clé = valeur' attendu, reçu {line!r}")
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            errors.append(f"ligne {lineno}: clé {key!r} répétée")
            continue
        raw[key] = value
    return raw, errors


def config_from_mapping(values: Mapping[str, Any], errors: List[str] = None) -> RunConfig:
    """
    Valide un dictionnaire (valeurs brutes texte ou déjà typées) en RunConfig

    Toutes les erreurs sont collectées avant de lever ConfigParseError.
    """
    errors = list(errors or [])
    typed: Dict[str, Any] = {}
    for key, value in values.items():
        if key not in CONVERTERS:
            errors.append(f"clé inconnue: {key!r}")
            continue
        if isinstance(value, str):
            try:
                value = CONVERTERS[key](value)
            except (TypeError, ValueError) as e:
                errors.append(f"{key}: valeur invalide {values[key]!r} ({e})")
                continue
        if key in POSITIVE_INTS and (not isinstance(value, int) or value < 1):
            errors.append(f"{key} doit être un entier strictement positif (reçu {value!r})")
            continue
        typed[key] = value

    if not errors:
        try:
            return RunConfig(**typed)
        except ValidationError as e:
            for err in e.errors():
                loc = ".".join(str(part) for part in err["loc"]) or "config"
                errors.append(f"{loc}: {err['msg']}")

    logger.warning(f"Configuration invalide: {len(errors)} erreur(s)")
    raise ConfigParseError(errors)


def parse_config(text: str) -> RunConfig:
    """
    Lit une configuration "clé = valeur" (une clé par ligne, commentaires '#')

    Args:
        text: Contenu du fichier

    Returns:
        RunConfig validée

    Raises:
        ConfigParseError: avec la liste complète des erreurs
    """
    raw, errors = split_lines(text)
    return config_from_mapping(raw, errors)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return ", ".join(f"{a}:{b}" for a, b in value)
        return ",".join(str(v) for v in value)
    return str(value)


def format_config(config: RunConfig) -> str:
    """Sérialisation inverse de parse_config"""
    lines = [f"{key} = {_format_value(value)}" for key, value in config.model_dump().items()]
    return "\n".join(lines) + "\n"
