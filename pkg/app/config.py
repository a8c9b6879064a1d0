"""
Configuration centralisée de l'application Loop Dimerization Lab
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Configuration de l'application avec gestion des variables d'environnement"""

    # Application
    APP_NAME: str = "Loop Dimerization Lab"
    APP_VERSION: str = "1.0.0"
    APP_DESCRIPTION: str = (
        "Simulation Monte Carlo et vérification exacte de la représentation en boucles "
        "des chaînes de spins SU(2S+1) à projecteur singulet"
    )
    DEBUG: bool = False

    # Serveur HTTP
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # Base de données (archive des exécutions)
    DATABASE_URL: str = "sqlite:///./runs.db"

    # Fichiers
    OUTPUT_DIR: str = "outputs"
    LOGS_DIR: str = "logs"
    LOG_LEVEL: str = "INFO"
    LOG_MAX_BYTES: int = 10485760  # 10 MB
    LOG_BACKUP_COUNT: int = 5

    # Oracles exacts
    ENUM_BUDGET: int = 10**8          # nombre maximal de configurations énumérées
    DENSE_BUDGET: int = 4096          # dimension maximale des matrices denses
    GROUND_STATE_BETA: float = 50.0   # beta quantique utilisé pour l'état fondamental
    EIGEN_RESIDUAL_TOL: float = 1e-9

    # Échantillonneur
    DEFAULT_SEED: int = 20170101
    DEFAULT_SWEEPS: int = 20000
    DEFAULT_BURNIN: int = 2000
    MEASURE_EVERY: int = 1
    INSERT_PROBABILITY: float = 0.5

    # Parallélisme (seule variable d'environnement lue par la CLI)
    THREADS: int = 1

    # Vérification
    VERIFY_SWEEPS: int = 20000
    VERIFY_SEEDS: int = 10

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": True,
        "extra": "ignore"  # Ignore les variables d'environnement supplémentaires
    }


settings = Settings()
