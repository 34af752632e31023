"""
Text processing app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class TextprocConfig(AppConfig):
    """Text processing application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.textproc'
    verbose_name = 'Text processing'
