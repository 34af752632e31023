"""
Celery tasks for attack sweeps.
"""
import logging
from typing import Dict, List, Optional, Sequence

from celery import shared_task
from django.conf import settings
from django.utils import timezone

from apps.embeddings.services.embedding_service import EmbeddingService
from apps.evaluation.services.sweep_service import SweepService
from apps.shadow.services.shadow_service import ShadowService
from apps.textproc.services.lexicon_service import LexiconService
from apps.victims.services.dataset_service import DatasetService
from apps.victims.services.victim_service import VictimService

logger = logging.getLogger(__name__)


@shared_task(bind=True)
def run_sweep_cell(self, artifacts: Dict, g_w: int, th: float, source_class: int,
                   target_class: int, seed: int, sample_size: Optional[int] = None,
                   query_limit: Optional[int] = None, test_fraction: Optional[float] = None):
    """
    Run one (g_w, th) cell from artifact paths.

    ``artifacts`` holds 'embeddings', 'victim', 'shadow', 'dataset' and
    optionally 'lexicon' and 'class_names'. Texts come from the seeded test
    split of the dataset. The outcome carries the victim queries spent,
    including those consumed by a cell that ran out of budget.
    """
    victim = None
    try:
        teacher = EmbeddingService.load_embeddings(artifacts['embeddings'])
        lexicon = (LexiconService.load_lexicon(artifacts['lexicon'])
                   if artifacts.get('lexicon') else LexiconService.default_lexicon())
        victim = VictimService.load_victim(artifacts['victim'], teacher, query_limit=query_limit)
        shadow = ShadowService.load_shadow(artifacts['shadow'], teacher)
        dataset = DatasetService.load_dataset(artifacts['dataset'], artifacts.get('class_names'))
        _, test = DatasetService.split_dataset(
            dataset, test_fraction or settings.ATTACK_TOOLKIT['VICTIM']['TEST_FRACTION'], seed
        )

        texts = SweepService.sample_texts(test.of_class(source_class).texts, sample_size, seed)
        cell = SweepService.run_cell(texts, g_w, th, source_class, target_class,
                                     shadow, teacher, lexicon, victim, seed)
        logger.info(
            f"Sweep cell g_w={g_w} th={th} accuracy {cell['accuracy']:.3f}",
            extra={**cell, 'task_id': self.request.id, 'event_type': 'sweep_cell_completed'}
        )
        return {'status': 'success', 'cell': cell, 'queries': cell['queries'],
                'timestamp': timezone.now().isoformat()}

    except Exception as e:
        logger.error(
            f"Sweep cell g_w={g_w} th={th} failed: {str(e)}",
            extra={'task_id': self.request.id, 'error': str(e), 'event_type': 'sweep_cell_failed'},
            exc_info=True
        )
        return {'status': 'failed', 'error': str(e), 'g_w': g_w, 'th': th,
                'queries': victim.budget.used if victim is not None else 0,
                'timestamp': timezone.now().isoformat()}


def dispatch_sweep_grid(artifacts: Dict, g_ws: Sequence[int], ths: Sequence[float],
                        source_class: int, target_class: int, seed: int,
                        sample_size: Optional[int] = None, query_limit: Optional[int] = None,
                        test_fraction: Optional[float] = None) -> List[Dict]:
    """
    Submit the grid one cell at a time, g_w-major.

    Every cell loads its own victim, so each one is handed the part of
    ``query_limit`` the previous cells left. Cells after the limit is
    spent are reported as skipped and never submitted.
    """
    outcomes: List[Dict] = []
    spent = 0
    for g_w in g_ws:
        for th in ths:
            remaining = None if query_limit is None else query_limit - spent
            if remaining is not None and remaining <= 0:
                outcomes.append({'status': 'skipped', 'error': f"query limit {query_limit} spent",
                                 'g_w': g_w, 'th': th, 'queries': 0})
                continue
            outcome = run_sweep_cell.apply_async(kwargs={
                'artifacts': artifacts,
                'g_w': g_w,
                'th': th,
                'source_class': source_class,
                'target_class': target_class,
                'seed': seed,
                'sample_size': sample_size,
                'query_limit': remaining,
                'test_fraction': test_fraction,
            }).get()
            spent += outcome.get('queries', 0)
            outcomes.append(outcome)

    logger.info(
        f"Sweep grid finished with {spent} victim queries",
        extra={'cells': len(outcomes), 'queries': spent, 'query_limit': query_limit,
               'event_type': 'sweep_grid_dispatched'}
    )
    return outcomes
