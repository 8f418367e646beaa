"""
Django settings for viscowave project.

Numerical simulator for strongly damped viscoelastic Kirchhoff systems.
Clean single file approach with python-decouple.
"""

import sys
from pathlib import Path

from decouple import Csv, config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# No web surface is served; the key only satisfies Django's startup checks.
SECRET_KEY = config("SECRET_KEY", default="insecure-cli-key-change-me")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = config("ALLOWED_HOSTS", default="localhost", cast=Csv())

# Testing mode detection - when pytest is running
TESTING = "pytest" in sys.modules or "test" in sys.argv


def _optional(cast):
    """decouple casts its default too; map an empty value to None."""

    def _cast(value):
        if value is None or value == "":
            return None
        return cast(value)

    return _cast


# Application definition
THIRD_PARTY_APPS = [
    "rest_framework",
]

LOCAL_APPS = [
    "simulations",
]

INSTALLED_APPS = THIRD_PARTY_APPS + LOCAL_APPS

# Simulations keep no relational state.
DATABASES = {}

USE_TZ = True
TIME_ZONE = "UTC"

# Simulator configuration. Every key can be overridden with a VISCO_* variable;
# command-line flags take precedence over these values.
VISCOWAVE = {
    "MEMORY_MODE": config("VISCO_MEMORY_MODE", default="", cast=_optional(str)),
    "STRIDE": config("VISCO_STRIDE", default="", cast=_optional(int)),
    "SEED": config("VISCO_SEED", default="", cast=_optional(int)),
    "OUTPUT_DIR": config("VISCO_OUTPUT_DIR", default="", cast=_optional(Path)),
    "DIVERGENCE_THRESHOLD": config(
        "VISCO_DIVERGENCE_THRESHOLD", default="", cast=_optional(float)
    ),
    "CG_TOLERANCE": config("VISCO_CG_TOLERANCE", default="", cast=_optional(float)),
    "CG_MAX_ITERATIONS": config(
        "VISCO_CG_MAX_ITERATIONS", default="", cast=_optional(int)
    ),
    "CFL_SAFETY": config("VISCO_CFL_SAFETY", default="", cast=_optional(float)),
    "ETA_BUDGET": config("VISCO_ETA_BUDGET", default="", cast=_optional(int)),
    "DIRECT_MAX_STEPS": config("VISCO_DIRECT_MAX_STEPS", default=10_000, cast=int),
    "METRICS_TEXTFILE": config(
        "VISCO_METRICS_TEXTFILE", default="", cast=_optional(Path)
    ),
}

# Sentry Configuration
SENTRY_DSN = config("SENTRY_DSN", default="")
if SENTRY_DSN and not TESTING:
    import sentry_sdk
    from sentry_sdk.integrations.django import DjangoIntegration

    sentry_sdk.init(
        dsn=SENTRY_DSN,
        integrations=[DjangoIntegration()],
        traces_sample_rate=0.0,
        send_default_pii=False,
    )

# Logging
if TESTING:
    # Minimal logging for tests
    LOGGING = {
        "version": 1,
        "disable_existing_loggers": False,
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
            },
        },
        "root": {
            "handlers": ["console"],
            "level": "WARNING",
        },
    }
else:
    # Full logging for command-line runs
    LOGGING = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "verbose": {
                "format": "{levelname} {asctime} {name} {process:d} {message}",
                "style": "{",
            },
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "formatter": "verbose",
            },
        },
        "root": {
            "handlers": ["console"],
            "level": config("VISCO_LOG_LEVEL", default="INFO"),
        },
        "loggers": {
            "django": {
                "handlers": ["console"],
                "level": "WARNING",
                "propagate": False,
            },
            "simulations": {
                "handlers": ["console"],
                "level": "DEBUG" if DEBUG else config("VISCO_LOG_LEVEL", default="INFO"),
                "propagate": False,
            },
        },
    }
