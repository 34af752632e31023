"""
Attacks app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class AttacksConfig(AppConfig):
    """Attacks application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.attacks'
    verbose_name = 'Attacks'
