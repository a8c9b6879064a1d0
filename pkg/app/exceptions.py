"""
Exceptions métier du modèle de boucles
"""
from typing import List, Optional


class LoopModelError(Exception):
    """Exception de base; `code` identifie le type d'erreur dans les rapports JSON"""

    code: str = "loop-model-error"

    def __init__(self, message: str, code: Optional[str] = None):
        if code is not None:
            self.code = code
        self.message = message
        super().__init__(message)


class InvalidParameterError(LoopModelError):
    """Paramètre hors du domaine autorisé (ell < 1, beta <= 0, S non supporté...)"""
    code = "invalid-parameter"


class SlotCollisionError(LoopModelError):
    """Deux barres sur le même créneau temporel"""
    code = "slot-collision"


class InvalidConfigurationError(LoopModelError):
    """Configuration hors de Omega; porte la liste complète des violations"""
    code = "invalid-configuration"

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("Configuration invalide: " + "; ".join(self.violations))


class TooLargeInstanceError(LoopModelError):
    """Instance au-delà du budget d'énumération ou de diagonalisation"""
    code = "too-large-instance"


class DivergentSeriesError(LoopModelError):
    """Série de Peierls divergente (S <= 15/2)"""
    code = "divergent"


class NotApplicableError(LoopModelError):
    """Événement non défini: la configuration contient une boucle qui s'enroule"""
    code = "not-applicable"


class NoInteriorError(LoopModelError):
    """Intérieur demandé pour une boucle qui s'enroule ou une boucle courte"""
    code = "no-interior"


class SeriesTooShortError(LoopModelError):
    """Série temporelle trop courte pour l'analyse par blocs"""
    code = "series-too-short"


class NonHermitianError(LoopModelError):
    """Opérateur non hermitien passé à l'oracle de diagonalisation"""
    code = "non-hermitian"


class NonFiniteAccumulatorError(LoopModelError):
    """Accumulateur non fini pendant une simulation (débordement de poids)"""
    code = "non-finite-accumulator"


class ConfigParseError(LoopModelError):
    """Erreurs de lecture d'un fichier de configuration clé = valeur"""
    code = "config-parse-error"

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("Configuration de run invalide: " + "; ".join(self.errors))
