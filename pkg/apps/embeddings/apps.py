"""
Embeddings app configuration for the attack toolkit.
"""
from django.apps import AppConfig


class EmbeddingsConfig(AppConfig):
    """Embeddings application configuration."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.embeddings'
    verbose_name = 'Embeddings'
