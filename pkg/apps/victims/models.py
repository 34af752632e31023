"""
Victim choices for the attack toolkit.
"""
from django.db import models
from django.utils.translation import gettext_lazy as _


class VictimMode(models.TextChoices):
    """How the student uses the public embedding table."""
    FEATURE_EXTRACTOR = 'FE', _('Feature extractor')
    FINE_TUNED = 'FT', _('Fine tuned')


class VictimKind(models.TextChoices):
    """Feature layout of a trained student."""
    WORD = 'word', _('Word-embedding classifier')
    SENTENCE = 'sentence', _('Sentence-embedding classifier')
