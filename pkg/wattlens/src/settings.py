"""
Django settings for the wattlens project.

Only the management-command machinery and the settings layer are used; there
is no web frontend and no database.
"""

from pathlib import Path

import environ

BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env(
    DEBUG=(bool, False),
)

environ.Env.read_env(BASE_DIR / ".env")

SECRET_KEY = env("DJANGO_SECRET_KEY", default="wattlens-insecure-placeholder")
DEBUG = env("DEBUG")
ALLOWED_HOSTS: list[str] = []


# Application definition

INSTALLED_APPS = [
    'core',
    'energy',
    'machine',
    'device',
    'simulator',
    'profiler',
    'staticanalysis',
    'hir',
    'parametric',
    'probabilistic',
    'cli',
]

DATABASES: dict = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging

LOG_LEVEL = env("LOG_LEVEL", default="WARNING")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s [%(name)s] %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}


# Toolkit defaults

WATTLENS_SEED = env.int("WATTLENS_SEED", default=2017)
WATTLENS_FUEL = env.int("WATTLENS_FUEL", default=10_000_000)
WATTLENS_T_MAX = env.int("WATTLENS_T_MAX", default=8)
WATTLENS_CHANNEL_LATENCY = env.int("WATTLENS_CHANNEL_LATENCY", default=3)
WATTLENS_SUPPORT_LIMIT = env.int("WATTLENS_SUPPORT_LIMIT", default=100_000)
WATTLENS_WORKERS = env.int("WATTLENS_WORKERS", default=1)
WATTLENS_PROFILE_DURATION = env.int("WATTLENS_PROFILE_DURATION", default=4096)
WATTLENS_PROFILE_WARMUP = env.int("WATTLENS_PROFILE_WARMUP", default=64)
