"""
Django settings for the MalwareLab project.

MalwareLab has no web surface and no database: Django provides the settings
layer, the management-command CLI and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os
import dotenv

# Load environment variables from .env file
dotenv.load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('MALWARELAB_SECRET_KEY', 'malwarelab-offline-toolkit')

DEBUG = os.getenv('MALWARELAB_DEBUG', 'false').lower() == 'true'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'featuresets',
    'binaries',
    'ngrams',
    'selection',
    'classifiers',
    'evaluation',
    'pipeline',
]

# Artifacts are flat CSV/text files under the configured output directory.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging

LOG_LEVEL = os.getenv('MALWARELAB_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}


# Toolkit defaults. Every key can be overridden with MALWARELAB_<KEY>.

def _env(name, default, cast=str):
    value = os.getenv(f'MALWARELAB_{name}')
    return default if value is None else cast(value)


MALWARELAB = {
    'SEED': _env('SEED', 0, int),
    'JOBS': _env('JOBS', 1, int),
    'FOLDS': _env('FOLDS', 5, int),
    'FAILURE_CEILING': _env('FAILURE_CEILING', 0.2, float),
    'SIGNATURES_FILE': _env(
        'SIGNATURES_FILE', str(BASE_DIR / 'binaries' / 'data' / 'signatures.env')
    ),
    'DISCRETIZATION_BINS': _env('DISCRETIZATION_BINS', 10, int),
    'PROFILE_WINDOW': _env('PROFILE_WINDOW', 32, int),
    'PROFILE_SKIP': _env('PROFILE_SKIP', 32, int),
    'PROFILE_COUNT': _env('PROFILE_COUNT', 30, int),
    'NGRAM_PER_CLASS': _env('NGRAM_PER_CLASS', 100, int),
    'NGRAM_TOP_K': _env('NGRAM_TOP_K', 100, int),
    'DATASET_CUTOFF': _env('DATASET_CUTOFF', '2012-06-30'),
    'OUTPUT_DIR': _env('OUTPUT_DIR', str(BASE_DIR / 'out')),
}
