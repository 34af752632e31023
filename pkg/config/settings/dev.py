"""
Development settings for the attack toolkit.
"""
from .base import *

DEBUG = True

SECRET_KEY = SECRET_KEY or 'dev-only-not-secret'

ALLOWED_HOSTS = ['*']

# Additional development apps
INSTALLED_APPS += [
    'django_extensions',
]

# Less strict logging in development
LOGGING['loggers']['django']['level'] = 'INFO'
LOGGING['loggers']['apps']['level'] = 'DEBUG'

# Create logs directory if it doesn't exist
logs_dir = BASE_DIR / 'logs'
if not logs_dir.exists():
    logs_dir.mkdir(exist_ok=True)

# Smaller sweeps in development
ATTACK_TOOLKIT['SHADOW'].update({
    'QUERIES': 200,
})

# Celery configuration for development
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
