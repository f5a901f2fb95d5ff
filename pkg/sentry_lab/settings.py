"""
Django settings for sentry_lab project.

For more information on this file, see
https://docs.djangoproject.com/en/5.1/topics/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv(
    "SECRET_KEY", "django-insecure-sentry-lab-desk-key-not-for-deployment"
)

DEBUG = os.getenv("DEBUG", "False").lower() in ("1", "true", "yes")

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "hostility",
]


# Database
# https://docs.djangoproject.com/en/5.1/ref/settings/#databases

DATABASE_URL = os.getenv("DATABASE_URL", "sqlite://db.sqlite3")

# Parse DATABASE_URL for PostgreSQL
if DATABASE_URL.startswith("postgres://") or DATABASE_URL.startswith("postgresql://"):
    import dj_database_url

    DATABASES = {
        "default": dj_database_url.config(default=DATABASE_URL, conn_max_age=600)
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }


# Internationalization
# https://docs.djangoproject.com/en/5.1/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.1/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "{levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "services": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "hostility": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
    },
}


# Seeds
# When set, overrides every scenario, training and engine seed.
_seed = os.getenv("SENTRY_SEED", "").strip()
SENTRY_SEED = int(_seed) if _seed else None


# Detection and training defaults. Each key can be overridden with DETECTION_<KEY>.

_DETECTION_DEFAULTS = {
    "THETA": 0.7,
    "GATE": 60.0,
    "MAX_COAST": 5,
    "SOM_WIDTH": 8,
    "SOM_HEIGHT": 8,
    "HIDDEN_DIM": 16,
    "MAX_OBJECTS": 6,
    "LEARNING_RATE": 0.05,
    "BATCH_SIZE": 16,
    "EPOCHS": 40,
    "WORKERS": 1,
    "RETRAIN_TARGET_LOSS": 0.05,
    "RETRAIN_MAX_STEPS": 2000,
}

DETECTION = {
    key: type(default)(os.getenv(f"DETECTION_{key}", default))
    for key, default in _DETECTION_DEFAULTS.items()
}
