"""
Defense re-evaluation for the attack toolkit.

Each round re-queries the (possibly defended) victim for a fresh shadow
model, attacks the given texts and verifies the flips on the victim.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from django.conf import settings

from apps.attacks.services.word_attack_service import AdvResult, AttackConfig, WordAttackService
from apps.evaluation.models import DefenseKind
from apps.evaluation.services.metrics_service import AttackReport, EvaluationError, EvaluationService
from apps.shadow.services.shadow_service import ShadowModel, ShadowService
from apps.textproc.services.lexicon_service import PosLexicon
from apps.victims.models import VictimKind, VictimMode
from apps.victims.services.dataset_service import DatasetService, LabeledDataset
from apps.victims.services.victim_service import VictimConfig, VictimModel, VictimService

logger = logging.getLogger(__name__)


@dataclass
class AttackRound:
    shadow: ShadowModel
    results: List[AdvResult]
    report: AttackReport
    queries: int

    def replacement_words(self, flipped_only: bool = True) -> set:
        return {
            new
            for result in self.results
            if result.victim_flip or not flipped_only
            for _, _, new in result.replacements
        }


class DefenseService:
    """Service class for attacking defended victims."""

    @staticmethod
    def attack_round(victim: VictimModel, texts: Sequence[str], vocabulary: Mapping[str, int],
                     cfg: AttackConfig, lexicon: PosLexicon, q: int, seed: int) -> AttackRound:
        """Shadow from q queries, offline generation, victim verification."""
        used_before = victim.budget.used
        teacher = victim.teacher
        in_vocabulary = {word: count for word, count in vocabulary.items() if word in teacher.index}
        words = ShadowService.select_query_words(in_vocabulary, q)
        shadow = ShadowService.train_shadow(ShadowService.collect_pairs(victim, words), teacher, seed)
        results = [
            WordAttackService.generate_adv_example(text, cfg, shadow, teacher, lexicon)
            for text in texts
        ]
        report = EvaluationService.attack_accuracy(results, victim)
        return AttackRound(shadow=shadow, results=results, report=report,
                           queries=victim.budget.used - used_before)

    @staticmethod
    def adversarial_pairs(results: Sequence[AdvResult]) -> List[Tuple[str, int]]:
        """Perturbed texts that differ from their original, labeled with the source class."""
        return [(result.perturbed, result.source_class) for result in results if result.replacements]

    @staticmethod
    def defended_victim(defense: str, victim: VictimModel, train: LabeledDataset,
                        adversarial: Optional[Sequence[Tuple[str, int]]] = None,
                        dropout_ratio: Optional[float] = None,
                        embedding_learning_rate: Optional[float] = None) -> VictimModel:
        """Victim variant trained on ``train`` with the requested defense."""
        defense = DefenseKind(defense)
        defaults = settings.ATTACK_TOOLKIT['VICTIM']
        config: VictimConfig = victim.config

        if defense == DefenseKind.ADVTRAIN:
            if not adversarial:
                raise EvaluationError("Adversarial retraining needs adversarial examples")
            return VictimService.adversarial_retrain(victim, adversarial, original=train)

        if defense == DefenseKind.FINETUNE:
            config = replace(
                config,
                mode=VictimMode.FINE_TUNED,
                embedding_learning_rate=embedding_learning_rate or defaults['EMBEDDING_LEARNING_RATE'],
            )
        else:
            config = replace(config, dropout_ratio=dropout_ratio or defaults['DEFENSE_DROPOUT_RATIO'])

        if victim.kind == VictimKind.SENTENCE:
            return VictimService.train_sentence_victim(train, victim.teacher, config, victim.budget.limit)
        return VictimService.train_word_victim(train, victim.teacher, config, victim.budget.limit)

    @staticmethod
    def evaluate_defense(defense: str, victim: VictimModel, train: LabeledDataset,
                         texts: Sequence[str], cfg: AttackConfig, lexicon: PosLexicon,
                         q: int, seed: int, dropout_ratio: Optional[float] = None,
                         held_out: Optional[LabeledDataset] = None) -> Dict:
        """
        Baseline round, defended victim, fresh round; one report row.

        ``clean_accuracy`` is measured on ``held_out``. Without one, a seeded
        split of ``train`` is held back from the defended victim.
        """
        if held_out is None:
            train, held_out = DatasetService.split_dataset(
                train, settings.ATTACK_TOOLKIT['VICTIM']['TEST_FRACTION'], seed
            )
        vocabulary = dict(DatasetService.word_frequencies(train))

        baseline = DefenseService.attack_round(victim, texts, vocabulary, cfg, lexicon, q, seed)
        adversarial = DefenseService.adversarial_pairs(baseline.results)
        defended = DefenseService.defended_victim(
            defense, victim, train, adversarial=adversarial, dropout_ratio=dropout_ratio
        )
        fresh = DefenseService.attack_round(defended, texts, vocabulary, cfg, lexicon, q, seed)

        row = {
            'defense': str(DefenseKind(defense)),
            'baseline_accuracy': baseline.report.accuracy,
            'defended_accuracy': fresh.report.accuracy,
            'clean_accuracy': VictimService.accuracy(defended, held_out),
            'queries': baseline.queries + fresh.queries,
            'seed': seed,
        }
        if DefenseKind(defense) == DefenseKind.ADVTRAIN and adversarial:
            adversarial_set = LabeledDataset.from_pairs(adversarial, train.class_names)
            row['adversarial_recall'] = VictimService.accuracy(defended, adversarial_set)
            row['new_replacement_words'] = len(fresh.replacement_words() - baseline.replacement_words())
        logger.info(
            f"Defense {row['defense']}: attack accuracy {row['baseline_accuracy']:.3f} -> "
            f"{row['defended_accuracy']:.3f}",
            extra={**row, 'event_type': 'defense_evaluated'}
        )
        return row
