"""
Django settings for the nlsnorm project.

Веб-части нет: Django держит реестр приложений, management-команды
(ground, minimize, mountain_pass, ...) и тест-раннер.

Локально всё настраивается через .env в корне проекта (см. .env.example).
"""

import os
from pathlib import Path

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent

# Загружаем .env из корня проекта (если есть).
load_dotenv(BASE_DIR / ".env")


# -------------------------
# Core
# -------------------------
SECRET_KEY = os.getenv("SECRET_KEY", "nlsnorm-local-key")
DEBUG = os.getenv("DEBUG", "0") == "1"


# -------------------------
# Application definition
# -------------------------
INSTALLED_APPS = [
    "radial",
    "ground",
    "energy",
    "flow",
    "minimax",
    "runner",
]

# База не нужна: все тесты на SimpleTestCase.
DATABASES = {}

USE_TZ = True
TIME_ZONE = os.getenv("TIME_ZONE", "UTC")


# -------------------------
# Solver defaults
# -------------------------
NLSNORM_JOBS = max(1, int(os.getenv("NLSNORM_JOBS", "1")))
NLSNORM_OUTDIR = os.getenv("NLSNORM_OUTDIR", "out")
NLSNORM_GRID_NODES = int(os.getenv("NLSNORM_GRID_NODES", "4096"))
NLSNORM_GRID_RMAX = float(os.getenv("NLSNORM_GRID_RMAX", "20.0"))
NLSNORM_TOL = float(os.getenv("NLSNORM_TOL", "1e-6"))

# Долгие воспроизведения (сканы по массам) в тестах только по флагу.
NLSNORM_SLOW = os.getenv("NLSNORM_SLOW", "0") == "1"


# -------------------------
# Logging
# -------------------------
NLSNORM_LOG_LEVEL = os.getenv("NLSNORM_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        app: {"handlers": ["console"], "level": NLSNORM_LOG_LEVEL, "propagate": False}
        for app in INSTALLED_APPS
    },
}
