"""
Text processing choices for the attack toolkit.
"""
from django.db import models
from django.utils.translation import gettext_lazy as _


class PosTag(models.TextChoices):
    """Single lexicon tag per word."""
    NOUN = 'Noun', _('Noun')
    VERB = 'Verb', _('Verb')
    ADJECTIVE = 'Adjective', _('Adjective')
    ADVERB = 'Adverb', _('Adverb')
    OTHER = 'Other', _('Other')
    UNKNOWN = 'Unknown', _('Unknown')

    @classmethod
    def open_classes(cls) -> frozenset:
        """Tags a replacement may be drawn for."""
        return frozenset({cls.NOUN, cls.VERB, cls.ADJECTIVE, cls.ADVERB})

    @classmethod
    def lexicon_tags(cls) -> frozenset:
        """Tags allowed in a lexicon file (Unknown is lookup-only)."""
        return frozenset(tag for tag in cls if tag != cls.UNKNOWN)
