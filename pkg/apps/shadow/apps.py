"""
Shadow models app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class ShadowConfig(AppConfig):
    """Shadow models application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.shadow'
    verbose_name = 'Shadow models'
