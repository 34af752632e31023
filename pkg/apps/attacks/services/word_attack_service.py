"""
Word-substitution attack for the attack toolkit.
Replaces the words that push hardest toward the source class with
same-part-of-speech neighbors the shadow model scores highest for the target.
No victim query is issued while generating.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from apps.embeddings.services.embedding_service import EmbeddingService, EmbeddingTable
from apps.shadow.services.shadow_service import ShadowModel, ShadowService
from apps.textproc.models import PosTag
from apps.textproc.services.lexicon_service import LexiconService, PosLexicon
from apps.textproc.services.text_service import TextService

logger = logging.getLogger(__name__)


class AttackError(Exception):
    """Base exception for attack errors."""
    pass


@dataclass(frozen=True)
class AttackConfig:
    """g_w: neighbor pool size; th: max fraction of replaced token positions."""
    g_w: int
    th: float
    target_class: int
    source_class: int

    def __post_init__(self):
        if self.g_w <= 0:
            raise AttackError("g_w must be a positive integer")
        if not 0 <= self.th <= 1:
            raise AttackError("th must lie in [0, 1]")
        if self.target_class == self.source_class:
            raise AttackError("target and source classes must differ")


@dataclass
class AdvResult:
    """Outcome of one generation; ``victim_flip`` is filled by evaluation only."""
    original: str
    perturbed: str
    replacements: List[Tuple[int, str, str]]
    t: float
    source_class: int
    target_class: int
    victim_flip: Optional[bool] = None
    extra: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['replacements'] = [
            {'position': position, 'old': old, 'new': new}
            for position, old, new in self.replacements
        ]
        extra = data.pop('extra')
        data.update(extra)
        return data


class WordAttackService:
    """Service class for score-guided synonym substitution."""

    @staticmethod
    def check_constraints(lexicon: PosLexicon, w: str, w_cand: str) -> bool:
        """Both words share one open-class tag."""
        tag = LexiconService.pos_tag(lexicon, w)
        if tag not in PosTag.open_classes():
            return False
        return tag == LexiconService.pos_tag(lexicon, w_cand)

    @staticmethod
    def get_replacement_word(w: str, cfg: AttackConfig, shadow: ShadowModel,
                             teacher: EmbeddingTable, lexicon: PosLexicon) -> Optional[str]:
        """
        Best same-tag word among the g_w nearest neighbors of ``w``.

        Returns None when no neighbor passes the constraints or when ``w``
        already scores higher for the target class than the best candidate.
        """
        if w not in teacher.index:
            return None

        neighbors = EmbeddingService.nearest_neighbors(teacher, w, cfg.g_w)
        candidates = [
            candidate for candidate in neighbors.words
            if WordAttackService.check_constraints(lexicon, w, candidate)
        ]
        if not candidates:
            return None

        target = cfg.target_class
        scored = [
            (ShadowService.shadow_score(shadow, teacher, candidate)[target], candidate)
            for candidate in candidates
        ]
        best_score, best = min(scored, key=lambda item: (-item[0], item[1]))
        if ShadowService.shadow_score(shadow, teacher, w)[target] > best_score:
            return None
        return best

    @staticmethod
    def generate_adv_example(text: str, cfg: AttackConfig, shadow: ShadowModel,
                             teacher: EmbeddingTable, lexicon: PosLexicon) -> AdvResult:
        """
        Perturb ``text`` toward ``cfg.target_class``.

        Word types are visited by descending source-class shadow score
        (document order on ties); each replaced type changes at all of its
        positions. Types that would push the replaced fraction above th
        are skipped; generation ends when no position is left in the budget.
        """
        seq = TextService.tokenize(text)
        n_tokens = len(seq)
        replacements: Dict[int, Tuple[str, str]] = {}

        if n_tokens and cfg.th > 0:
            first_seen = seq.first_positions()
            source_scores = {
                word: ShadowService.shadow_score(shadow, teacher, word)[cfg.source_class]
                for word in first_seen
            }
            # sorted() is stable and first_seen is in document order.
            ordered = sorted(first_seen, key=lambda word: -source_scores[word])

            capacity = int(np.floor(cfg.th * n_tokens + 1e-9))
            for word in ordered:
                if len(replacements) >= capacity:
                    break
                positions = seq.positions_of(word)
                if len(replacements) + len(positions) > capacity:
                    continue
                new_word = WordAttackService.get_replacement_word(word, cfg, shadow, teacher, lexicon)
                if new_word is None:
                    continue
                for position in positions:
                    replacements[position] = (word, new_word)

        perturbed = TextService.replace_tokens(
            text, seq, {position: new for position, (_, new) in replacements.items()}
        )
        result = AdvResult(
            original=text,
            perturbed=perturbed,
            replacements=[(position, old, new) for position, (old, new) in sorted(replacements.items())],
            t=len(replacements) / n_tokens if n_tokens else 0.0,
            source_class=cfg.source_class,
            target_class=cfg.target_class,
        )
        logger.debug(
            f"Generated adversarial example with t={result.t:.3f}",
            extra={'t': result.t, 'replacements': len(result.replacements), 'g_w': cfg.g_w,
                   'th': cfg.th, 'event_type': 'attack_generated'}
        )
        return result
