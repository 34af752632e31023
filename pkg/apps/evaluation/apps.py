"""
Evaluation app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class EvaluationConfig(AppConfig):
    """Evaluation application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.evaluation'
    verbose_name = 'Evaluation'
