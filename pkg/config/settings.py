"""
Django settings for the edgecast toolkit.

The project has no database and no HTTP surface; Django provides the settings
layer, the management-command CLI and form-based config validation.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

import os
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from dotenv import load_dotenv

load_dotenv()

# build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = os.environ.get('DEBUG', 'False').lower() in ('true', '1', 'yes')

INSTALLED_APPS = [
    'offloading.apps.OffloadingConfig',
]

# no persistence layer, every artifact is a file
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'


# edgecast

EDGECAST_LOG = os.environ.get('EDGECAST_LOG', 'WARNING').upper()
if EDGECAST_LOG not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
    raise ImproperlyConfigured(
        f'EDGECAST_LOG must be a log level name, got {EDGECAST_LOG!r}. '
        'Set it in your .env file or export it in your shell.'
    )

EDGECAST_OUTPUT_DIR = Path(os.environ.get('EDGECAST_OUTPUT_DIR', 'out'))

try:
    EDGECAST_LOOCV_CAP = int(os.environ.get('EDGECAST_LOOCV_CAP', '2000'))
except ValueError as exc:
    raise ImproperlyConfigured('EDGECAST_LOOCV_CAP must be an integer.') from exc


# logging
# https://docs.djangoproject.com/en/6.0/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'offloading': {
            'handlers': ['console'],
            'level': EDGECAST_LOG,
            'propagate': False,
        },
    },
}
