"""
Sentence-level attacks for the attack toolkit.
Length truncation and anchor-sentence appending against sentence victims.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from apps.attacks.services.word_attack_service import AttackError
from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.textproc.services.text_service import TextService
from apps.victims.services.dataset_service import LabeledDataset
from apps.victims.services.victim_service import VictimModel, VictimService

logger = logging.getLogger(__name__)

SENTENCE_TERMINATORS = ('.', '!', '?')


@dataclass(frozen=True)
class SentenceAnchor:
    """A confidently classified sample and its public sentence embedding."""
    anchor_text: str
    anchor_embedding: np.ndarray
    anchor_class: int

    @classmethod
    def from_text(cls, teacher: EmbeddingTable, text: str, anchor_class: int,
                  length_feature: bool = True, cap: int = 32) -> 'SentenceAnchor':
        return cls(
            anchor_text=text,
            anchor_embedding=VictimService.sentence_embed(teacher, text, length_feature, cap),
            anchor_class=anchor_class,
        )


class SentenceAttackService:
    """Service class for length and anchor attacks."""

    @staticmethod
    def length_attack(text: str, keep_sentences: int) -> str:
        """First ``keep_sentences`` sentences; shorter texts come back unchanged."""
        if keep_sentences <= 0:
            raise AttackError("keep_sentences must be a positive integer")
        sentences = TextService.split_sentences(text)
        if len(sentences) <= keep_sentences:
            return text
        return TextService.join_sentences(sentences[:keep_sentences])

    @staticmethod
    def sentence_append_attack(text: str, anchor: SentenceAnchor, k: int, teacher: EmbeddingTable,
                               length_feature: bool = True, cap: int = 32,
                               length_cap: int = 32) -> Tuple[str, List[float]]:
        """
        Append up to ``k`` anchor sentences one at a time.

        Returns the final text and, per appended sentence, the raw dot
        product between the current text's sentence embedding and the
        anchor embedding. The combined text never exceeds ``cap`` sentences;
        ``length_cap`` normalizes the length feature as the victim does.
        A text without a closing terminator gets a period before the first
        appended sentence.
        """
        if k < 0:
            raise AttackError("k cannot be negative")
        if cap <= 0:
            raise AttackError("cap must be a positive integer")
        anchor_sentences = TextService.split_sentences(anchor.anchor_text)
        if not anchor_sentences and k:
            raise AttackError("Anchor has no sentence")

        current = text
        count = TextService.sentence_count(text)
        products: List[float] = []
        for sentence in anchor_sentences[:k]:
            if count >= cap:
                break
            base = current.rstrip()
            if base and not base.endswith(SENTENCE_TERMINATORS):
                base = f"{base}."
            current = f"{base} {sentence}" if base else sentence
            count += 1
            embedding = VictimService.sentence_embed(teacher, current, length_feature, length_cap)
            products.append(float(embedding @ anchor.anchor_embedding))
        return current, products

    @staticmethod
    def select_anchor(victim: VictimModel, pool: LabeledDataset, anchor_class: int,
                      teacher: EmbeddingTable) -> SentenceAnchor:
        """
        Highest-confidence correctly classified ``anchor_class`` sample of ``pool``.

        One accounted victim query per candidate.
        """
        candidates = pool.of_class(anchor_class).texts
        distributions = VictimService.query_many(victim, candidates)
        best_text, best_confidence = None, -1.0
        for text, distribution in zip(candidates, distributions):
            if distribution.argmax != anchor_class:
                continue
            confidence = float(distribution.probabilities[anchor_class])
            if confidence > best_confidence:
                best_text, best_confidence = text, confidence
        if best_text is None:
            raise AttackError(f"No correctly classified sample of class {anchor_class} in the pool")

        logger.info(
            f"Selected anchor with confidence {best_confidence:.3f}",
            extra={'anchor_class': anchor_class, 'confidence': best_confidence,
                   'queries': len(candidates), 'event_type': 'anchor_selected'}
        )
        return SentenceAnchor.from_text(
            teacher, best_text, anchor_class, victim.uses_length, victim.config.length_cap
        )
