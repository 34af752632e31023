"""
Evaluation service for the attack toolkit.
Victim-verified metrics: boundary agreement, attack accuracy, feature
usefulness and flip curves, plus the dataset diagnostics used in reports.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from django.conf import settings

from apps.attacks.services.sentence_attack_service import SentenceAnchor
from apps.attacks.services.word_attack_service import AdvResult
from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.shadow.services.shadow_service import ShadowModel, ShadowService
from apps.textproc.services.text_service import TextService
from apps.victims.services.dataset_service import DatasetService, LabeledDataset
from apps.victims.services.victim_service import VictimModel, VictimService
from apps.wordscore.services.score_service import (
    ClassWordRatios,
    MulticlassThreshold,
    ScoreTable,
    WordScoreService,
)

logger = logging.getLogger(__name__)


class EvaluationError(Exception):
    """Base exception for evaluation errors."""
    pass


@dataclass(frozen=True)
class AgreementReport:
    """Confusion counts of boundary prediction against the victim, class 1 positive."""
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def avg_acc(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def to_dict(self) -> Dict:
        return {**asdict(self), 'total': self.total, 'avg_acc': self.avg_acc}


@dataclass(frozen=True)
class AttackReport:
    """Victim-verified flips; ``avg_t`` over flipped results unless ``avg_t_over`` is 'all'."""
    attempted: int
    flipped: int
    avg_t: float
    avg_t_over: str = 'flipped'

    @property
    def accuracy(self) -> float:
        return self.flipped / self.attempted

    def to_dict(self) -> Dict:
        return {**asdict(self), 'accuracy': self.accuracy}


@dataclass(frozen=True)
class UsefulnessEstimate:
    rho_hat: float
    n: int


@dataclass(frozen=True)
class FlipPoint:
    """Source-minus-target log-probability and score-sum differences after ``step`` replacements."""
    step: int
    log_prob_diff: float
    score_diff: float


class EvaluationService:
    """Service class for attack evaluation."""

    @staticmethod
    def boundary_agreement(predictor: Union[ScoreTable, ShadowModel], victim: VictimModel,
                           dataset: LabeledDataset, ratios: Optional[ClassWordRatios] = None,
                           threshold: Optional[MulticlassThreshold] = None,
                           skew_corrected: bool = True, positive_class: int = 1,
                           percentile: Optional[float] = None) -> AgreementReport:
        """
        Compare score-sum predictions with the victim's argmax on ``dataset``.

        The victim is queried once per sample. Multi-class tables without an
        explicit ``threshold`` use the ``percentile`` of their positive scores.
        """
        if isinstance(predictor, ShadowModel):
            table = ShadowService.predict_table(predictor, predictor.teacher)
        else:
            table = predictor
        if ratios is None and skew_corrected:
            ratios = WordScoreService.class_word_ratios(table)
        if threshold is None and table.n_classes > 2:
            if percentile is None:
                percentile = settings.ATTACK_TOOLKIT['WORDSCORE']['MULTICLASS_PERCENTILE']
            threshold = MulticlassThreshold.from_table(table, percentile)

        distributions = VictimService.query_many(victim, dataset.texts)
        tp = tn = fp = fn = 0
        for text, distribution in zip(dataset.texts, distributions):
            k_i = WordScoreService.input_score(TextService.tokenize(text), table, threshold)
            predicted = WordScoreService.predict_class(k_i, ratios, skew_corrected)
            actual = distribution.argmax
            if predicted == actual:
                if actual == positive_class:
                    tp += 1
                else:
                    tn += 1
            elif predicted == positive_class:
                fp += 1
            else:
                fn += 1

        report = AgreementReport(tp=tp, tn=tn, fp=fp, fn=fn)
        logger.info(
            f"Boundary agreement {report.avg_acc:.3f} on {report.total} samples",
            extra={**report.to_dict(), 'source': str(table.source),
                   'event_type': 'boundary_agreement'}
        )
        return report

    @staticmethod
    def attack_accuracy(results: Sequence[AdvResult], victim: VictimModel,
                        average_over: str = 'flipped') -> AttackReport:
        """Query the victim on every perturbed text and fill ``victim_flip``."""
        if not results:
            raise EvaluationError("No attack results to evaluate")
        if average_over not in ('flipped', 'all'):
            raise EvaluationError("average_over must be 'flipped' or 'all'")

        distributions = VictimService.query_many(victim, [result.perturbed for result in results])
        for result, distribution in zip(results, distributions):
            result.victim_flip = distribution.argmax == result.target_class

        flipped = [result for result in results if result.victim_flip]
        pool = flipped if average_over == 'flipped' else list(results)
        avg_t = float(np.mean([result.t for result in pool])) if pool else 0.0
        return AttackReport(attempted=len(results), flipped=len(flipped), avg_t=avg_t,
                            avg_t_over=average_over)

    @staticmethod
    def estimate_usefulness(feature: Callable[[str], float], dataset: LabeledDataset) -> UsefulnessEstimate:
        """rho_hat = mean of y * f(x) with labels mapped to -1/+1."""
        if not len(dataset):
            raise EvaluationError("Dataset is empty")
        signs = DatasetService.signed_labels(dataset)
        values = np.array([float(feature(text)) for text in dataset.texts])
        return UsefulnessEstimate(rho_hat=float(np.mean(signs * values)), n=len(dataset))

    @staticmethod
    def flip_curve(text: str, victim: VictimModel, table: ScoreTable, max_steps: int,
                   target_class: Optional[int] = None) -> List[FlipPoint]:
        """
        Replace the highest source-scored word type with the best target word, one type per step.

        The source class is the victim's prediction on ``text``; one
        accounted query per recorded point.
        """
        if max_steps < 0:
            raise EvaluationError("max_steps cannot be negative")

        seq = TextService.tokenize(text)
        baseline = VictimService.query(victim, text)
        source = baseline.argmax
        if target_class is None:
            if victim.n_classes != 2:
                raise EvaluationError("target_class is required for multi-class victims")
            target_class = 1 - source
        target = target_class

        best_target = min(
            table.words, key=lambda word: (-table.score(word)[target], word)
        )

        def point(step: int, current: str, distribution) -> FlipPoint:
            log_probs = distribution.log_probabilities()
            sums = WordScoreService.input_score(
                TextService.tokenize(current), table,
                MulticlassThreshold(percentile=0.0, cutoff=0.0) if table.n_classes > 2 else None,
            ).sums
            return FlipPoint(
                step=step,
                log_prob_diff=float(log_probs[source] - log_probs[target]),
                score_diff=float(sums[source] - sums[target]),
            )

        curve = [point(0, text, baseline)]
        replacements: Dict[int, str] = {}
        order = sorted(
            seq.first_positions(), key=lambda word: -table.score(word)[source]
        )
        candidates = [word for word in order if table.score(word)[source] > 0]

        for step, word in enumerate(candidates[:max_steps], 1):
            for position in seq.positions_of(word):
                replacements[position] = best_target
            current = TextService.replace_tokens(text, seq, replacements)
            curve.append(point(step, current, VictimService.query(victim, current)))
        return curve

    @staticmethod
    def crossing_step(values: Sequence[float]) -> Optional[int]:
        """First index whose value is at or below zero after a positive start."""
        for index, value in enumerate(values):
            if value <= 0:
                return index
        return None

    @staticmethod
    def anchor_closeness(dataset: LabeledDataset, anchors: Mapping[int, SentenceAnchor],
                         teacher: EmbeddingTable, length_feature: bool = True,
                         cap: int = 32) -> Dict[str, float]:
        """Per class, the share of samples whose embedding is closer (dot product) to their own anchor."""
        if len(anchors) < 2:
            raise EvaluationError("At least two anchors are required")
        closeness = {}
        for label, anchor in anchors.items():
            members = [text for text, y in dataset if y == label]
            if not members:
                continue
            hits = 0
            for text in members:
                embedding = VictimService.sentence_embed(teacher, text, length_feature, cap)
                own = float(embedding @ anchor.anchor_embedding)
                if all(own > float(embedding @ other.anchor_embedding)
                       for c, other in anchors.items() if c != label):
                    hits += 1
            closeness[dataset.class_names[label]] = hits / len(members)
        return closeness

    @staticmethod
    def length_profile(dataset: LabeledDataset, cutoff: int) -> Dict[str, float]:
        """Per class, the share of samples with fewer than ``cutoff`` sentences."""
        profile = {}
        for label, count in dataset.class_counts().items():
            if not count:
                continue
            short = sum(
                1 for text in dataset.of_class(label).texts
                if TextService.sentence_count(text) < cutoff
            )
            profile[dataset.class_names[label]] = short / count
        return profile

    @staticmethod
    def per_class_sample(dataset: LabeledDataset, class_index: int, n_pos: int, n_neg: int,
                         seed: int) -> LabeledDataset:
        """``n_pos`` samples of one class plus ``n_neg`` drawn uniformly from all other samples."""
        rng = np.random.default_rng(seed)
        labels = dataset.labels
        positives = np.flatnonzero(labels == class_index)
        negatives = np.flatnonzero(labels != class_index)
        if len(positives) < n_pos or len(negatives) < n_neg:
            logger.warning(
                f"Per-class sample for class {class_index} is smaller than requested",
                extra={'positives': len(positives), 'negatives': len(negatives),
                       'event_type': 'per_class_sample_short'}
            )
        chosen = np.concatenate([
            rng.choice(positives, size=min(n_pos, len(positives)), replace=False),
            rng.choice(negatives, size=min(n_neg, len(negatives)), replace=False),
        ])
        return dataset.subset(sorted(chosen.tolist()))
