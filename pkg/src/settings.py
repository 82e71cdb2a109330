import logging
import os
import warnings
from logging.config import dictConfig

import mlflow
from dotenv import load_dotenv

# Load environment variables from a .env file if available
load_dotenv()


class BaseSettings:
    """
    Base settings class that provides configurations for all environments.
    """
    # Pipeline defaults (CLI flags override these)
    THREADS: int = int(os.getenv("TRACEGT_THREADS", "1"))
    MAX_EXTRAPOLATION_FRAMES: int = int(os.getenv("TRACEGT_MAX_EXTRAPOLATION", "10"))
    OCCLUSION_TOLERANCE: float = float(os.getenv("TRACEGT_OCCLUSION_TOLERANCE", "1e-4"))
    DEFAULT_SEED: int = int(os.getenv("TRACEGT_SEED", "0"))

    # MLFlow Config
    MLFLOW = mlflow
    TRACK_METRICS: bool = os.getenv("TRACEGT_TRACK_METRICS", "0").lower() in ("1", "true", "yes")
    MLFLOW_TRACKING_URI: str = os.getenv("MLFLOW_TRACKING_URI", "file:./mlruns")

    # Logging Configuration
    LOGGING = {
        "version": 1,
        "formatters": {
            "standard": {
                "format": "%(asctime)s %(name)-12s %(levelname)-8s %(message)s"
            }
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": os.getenv("TRACEGT_LOG_LEVEL", "INFO"),
                "formatter": "standard",
                "stream": "ext://sys.stderr",
            }
        },
        "loggers": {
            "": {"handlers": ["console"], "level": "DEBUG"}
        },
        "disable_existing_loggers": False,
    }


class DevSettings(BaseSettings):
    """
    Development environment settings.
    """
    def __init__(self):
        warnings.filterwarnings("ignore", category=RuntimeWarning)
        if self.TRACK_METRICS:
            self.MLFLOW.set_tracking_uri(self.MLFLOW_TRACKING_URI)


class ProdSettings(BaseSettings):
    """
    Production environment settings.
    """
    TRACK_METRICS: bool = True

    def __init__(self):
        self.MLFLOW.set_tracking_uri(self.MLFLOW_TRACKING_URI)


# Environment-based settings initialization
settings: DevSettings | ProdSettings
match os.getenv("ENV", "local"):
    case "prod":
        settings = ProdSettings()
    case _:
        settings = DevSettings()

dictConfig(settings.LOGGING)
LOGGER = logging.getLogger("tracegt")
