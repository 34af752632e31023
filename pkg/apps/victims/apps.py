"""
Victims app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class VictimsConfig(AppConfig):
    """Victims application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.victims'
    verbose_name = 'Victims'
