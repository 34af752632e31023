"""
Word-score choices for the attack toolkit.
"""
from django.db import models
from django.utils.translation import gettext_lazy as _


class ScoreSource(models.TextChoices):
    """Where the scores of a table came from."""
    VICTIM_QUERIES = 'victim', _('Victim queries')
    SHADOW = 'shadow', _('Shadow model')
