"""
Attack-knob sweeps for the attack toolkit.
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from apps.attacks.services.word_attack_service import AttackConfig, WordAttackService
from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.evaluation.services.metrics_service import EvaluationService
from apps.shadow.services.shadow_service import ShadowModel
from apps.textproc.services.lexicon_service import PosLexicon
from apps.victims.services.victim_service import VictimModel

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['g_w', 'th', 'attempted', 'flipped', 'accuracy', 'avg_t', 'queries', 'seed']


class SweepService:
    """Service class for g_w x th attack grids."""

    @staticmethod
    def sample_texts(texts: Sequence[str], sample_size: Optional[int], seed: int) -> List[str]:
        """Seeded sample of ``texts`` in original order (all of them when no size is given)."""
        if not sample_size or sample_size >= len(texts):
            return list(texts)
        rng = np.random.default_rng(seed)
        chosen = sorted(rng.choice(len(texts), size=sample_size, replace=False).tolist())
        return [texts[i] for i in chosen]

    @staticmethod
    def run_cell(texts: Sequence[str], g_w: int, th: float, source_class: int, target_class: int,
                 shadow: ShadowModel, teacher: EmbeddingTable, lexicon: PosLexicon,
                 victim: VictimModel, seed: int, average_over: str = 'flipped') -> Dict:
        """Attack every text with one (g_w, th) setting and verify on the victim."""
        cfg = AttackConfig(g_w=g_w, th=th, target_class=target_class, source_class=source_class)
        results = [
            WordAttackService.generate_adv_example(text, cfg, shadow, teacher, lexicon)
            for text in texts
        ]
        used_before = victim.budget.used
        report = EvaluationService.attack_accuracy(results, victim, average_over)
        return {
            'g_w': g_w,
            'th': th,
            'attempted': report.attempted,
            'flipped': report.flipped,
            'accuracy': report.accuracy,
            'avg_t': report.avg_t,
            'queries': victim.budget.used - used_before,
            'seed': seed,
        }

    @staticmethod
    def sweep_attack_grid(texts: Sequence[str], source_class: int, target_class: int,
                          shadow: ShadowModel, teacher: EmbeddingTable, lexicon: PosLexicon,
                          victim: VictimModel, g_ws: Sequence[int], ths: Sequence[float],
                          seed: int, sample_size: Optional[int] = None) -> List[Dict]:
        """One row per (g_w, th) cell; the seed is embedded in every row."""
        sample = SweepService.sample_texts(texts, sample_size, seed)
        cells = [
            SweepService.run_cell(sample, g_w, th, source_class, target_class,
                                  shadow, teacher, lexicon, victim, seed)
            for g_w in g_ws
            for th in ths
        ]
        logger.info(
            f"Swept {len(cells)} attack cells over {len(sample)} texts",
            extra={'cells': len(cells), 'texts': len(sample), 'seed': seed,
                   'event_type': 'attack_sweep_completed'}
        )
        return cells
