"""
Word scores app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class WordscoreConfig(AppConfig):
    """Word scores application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.wordscore'
    verbose_name = 'Word scores'
