"""
Evaluation choices for the attack toolkit.
"""
from django.db import models
from django.utils.translation import gettext_lazy as _


class DefenseKind(models.TextChoices):
    """Victim variants the attack suite is re-run against."""
    FINETUNE = 'finetune', _('Fine-tuned teacher')
    DROPOUT = 'dropout', _('Dropout on the features')
    ADVTRAIN = 'advtrain', _('Adversarial retraining')
