"""
Base settings for the transfer-learning attack toolkit.
Django 5 configuration shared by every environment.
"""
import environ
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Environment variables
env = environ.Env(
    DEBUG=(bool, False),
    SECRET_KEY=(str, ''),
    ALLOWED_HOSTS=(list, []),
    TIME_ZONE=(str, 'UTC'),
    USE_TZ=(bool, True),
    CELERY_BROKER_URL=(str, 'redis://localhost:6379/0'),
    CELERY_RESULT_BACKEND=(str, 'redis://localhost:6379/0'),
    TOOLKIT_SEED=(int, 13),
    TOOLKIT_QUERY_LIMIT=(int, 0),  # 0 means unlimited
    TOOLKIT_ARTIFACT_DIR=(str, str(BASE_DIR / 'artifacts')),
)

# Read .env file if exists
env_file = BASE_DIR / '.env'
if env_file.exists():
    environ.Env.read_env(env_file)

SECRET_KEY = env('SECRET_KEY')

DEBUG = env('DEBUG')

ALLOWED_HOSTS = env('ALLOWED_HOSTS')

# Application definition
DJANGO_APPS = [
    'django.contrib.contenttypes',
]

LOCAL_APPS = [
    'apps.core',
    'apps.audit',
    'apps.embeddings',
    'apps.textproc',
    'apps.victims',
    'apps.wordscore',
    'apps.shadow',
    'apps.attacks',
    'apps.evaluation',
]

INSTALLED_APPS = DJANGO_APPS + LOCAL_APPS

# Database
DATABASES = {
    'default': env.db('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}")
}

TIME_ZONE = env('TIME_ZONE')
USE_I18N = False
USE_TZ = env('USE_TZ')

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Celery Configuration
CELERY_BROKER_URL = env('CELERY_BROKER_URL')
CELERY_RESULT_BACKEND = env('CELERY_RESULT_BACKEND')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'json': {
            'format': '{"timestamp": "%(asctime)s", "level": "%(levelname)s", "name": "%(name)s", "message": "%(message)s"}',
            'datefmt': '%Y-%m-%d %H:%M:%S',
        },
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'json',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'toolkit.log',
            'formatter': 'json',
            'delay': True,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'apps': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}

# Toolkit defaults. Every RunConfig field falls back to these values.
ATTACK_TOOLKIT = {
    'SEED': env('TOOLKIT_SEED'),
    'QUERY_LIMIT': env('TOOLKIT_QUERY_LIMIT') or None,
    'ARTIFACT_DIR': env('TOOLKIT_ARTIFACT_DIR'),
    'VICTIM': {
        'MODE': 'FE',
        'LEARNING_RATE': 0.05,
        'EMBEDDING_LEARNING_RATE': 0.05,  # only used by fine-tuned victims
        'EPOCHS': 30,
        'BATCH_SIZE': 32,
        'DROPOUT_RATIO': 0.0,
        'DEFENSE_DROPOUT_RATIO': 0.5,
        'ADVTRAIN_EPOCHS': 200,  # adversarial retraining always fine-tunes
        'LENGTH_CAP': 32,
        'TEST_FRACTION': 0.2,
    },
    'SHADOW': {
        'QUERIES': 1000,
        'HIDDEN_UNITS': 64,
        'EPOCHS': 200,
        'LEARNING_RATE': 0.05,
        'BATCH_SIZE': 32,
    },
    'ATTACK': {
        'NEIGHBORS': 10,
        'MAX_REPLACED_FRACTION': 0.5,
        'KEEP_SENTENCES': 1,
        'APPEND_SENTENCES': 10,
        'APPEND_CAP': 32,
        'SWEEP_NEIGHBORS': [5, 10],
        'SWEEP_FRACTIONS': [0.2, 0.5],
    },
    'WORDSCORE': {
        'MULTICLASS_PERCENTILE': 60.0,
        'SKEW_CORRECTED': True,
    },
}
