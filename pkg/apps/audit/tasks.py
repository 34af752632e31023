"""
Celery tasks for the experiment ledger.
"""
import logging
from celery import shared_task
from django.utils import timezone
from apps.audit.services.audit_service import AuditService

logger = logging.getLogger(__name__)


@shared_task(bind=True)
def verify_ledger(self):
    """
    Check the hash chain and that no run spent more victim queries than its limit.
    """
    try:
        chain = AuditService.verify_audit_chain()
        spend = AuditService.reconcile_query_spend()
        valid = chain['valid'] and spend['valid']
        errors = chain['errors'] + [
            f"Run {run['run_id']} spent {run['queries']} queries over limit {run['query_limit']}"
            for run in spend['overspent']
        ]

        log = logger.info if valid else logger.error
        log(
            f"Ledger verification {'passed' if valid else 'failed'}: "
            f"{chain['verified_records']}/{chain['total_records']} records, "
            f"{len(spend['overspent'])}/{spend['total_runs']} runs over their query limit",
            extra={
                'task_id': self.request.id,
                'total_records': chain['total_records'],
                'total_runs': spend['total_runs'],
                'errors': errors,
                'valid': valid,
                'event_type': 'ledger_verification_completed' if valid else 'ledger_verification_failed'
            }
        )

        return {
            'status': 'success' if valid else 'failed',
            'total_records': chain['total_records'],
            'verified_records': chain['verified_records'],
            'total_runs': spend['total_runs'],
            'overspent_runs': [run['run_id'] for run in spend['overspent']],
            'valid': valid,
            'errors': errors,
            'timestamp': timezone.now().isoformat()
        }

    except Exception as e:
        logger.error(
            f"Ledger verification task failed: {str(e)}",
            extra={'task_id': self.request.id, 'error': str(e), 'event_type': 'ledger_verification_task_failed'},
            exc_info=True
        )
        return {'status': 'error', 'error': str(e), 'timestamp': timezone.now().isoformat()}
