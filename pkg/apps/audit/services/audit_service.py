"""
Audit service for the attack toolkit.
Handles immutable experiment logging with hash chaining.
"""
from typing import Any, Dict, List, Optional
from django.db import transaction
from apps.audit.models import EventLog


class AuditService:
    """Service class for the experiment ledger."""

    @staticmethod
    @transaction.atomic
    def log_event(
        actor: str,
        entity_type: str,
        entity_id: str,
        action: str,
        before_data: Optional[Dict[str, Any]] = None,
        after_data: Optional[Dict[str, Any]] = None,
        run_id: Optional[str] = None
    ) -> EventLog:
        """
        Log an audit event with hash chaining.

        Args:
            actor: Command or task that performed the action
            entity_type: Kind of artifact affected
            entity_id: Artifact path or identifier
            action: Action performed
            before_data: State before the action; defaults to the state
                recorded by the latest event on the same artifact
            after_data: State after the action
            run_id: Identifier shared by one command run

        Returns:
            Created EventLog instance
        """
        if before_data is None:
            previous = EventLog.objects.filter(
                entity_type=entity_type, entity_id=str(entity_id)[:255]
            ).order_by('-timestamp', '-created_at').first()
            if previous is not None:
                before_data = previous.after_data
        if before_data:
            before_data = AuditService._sanitize_data(before_data)
        if after_data:
            after_data = AuditService._sanitize_data(after_data)

        event = EventLog(
            actor=actor,
            entity_type=entity_type,
            entity_id=str(entity_id)[:255],
            action=action,
            before_data=before_data,
            after_data=after_data,
            run_id=run_id or ''
        )
        event.save()

        return event

    @staticmethod
    def _sanitize_data(data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Sanitize data for JSON serialization.
        Converts non-serializable objects to strings.
        """
        if not isinstance(data, dict):
            return str(data) if data is not None else None

        sanitized = {}
        for key, value in data.items():
            if value is None:
                sanitized[key] = None
            elif isinstance(value, (str, int, float, bool)):
                sanitized[key] = value
            elif isinstance(value, dict):
                sanitized[key] = AuditService._sanitize_data(value)
            elif isinstance(value, (list, tuple)):
                sanitized[key] = [
                    AuditService._sanitize_data(item) if isinstance(item, dict)
                    else item if isinstance(item, (str, int, float, bool)) else str(item)
                    for item in value
                ]
            else:
                sanitized[key] = str(value)

        return sanitized

    @staticmethod
    def verify_audit_chain() -> Dict[str, Any]:
        """
        Verify the integrity of the whole ledger.

        Returns:
            Dictionary with verification results
        """
        events = list(EventLog.objects.order_by('timestamp', 'created_at'))
        if not events:
            return {
                'valid': True,
                'total_records': 0,
                'verified_records': 0,
                'errors': []
            }

        errors = []
        verified_count = 0

        for event in events:
            if not event.verify_hash():
                errors.append(f"Hash mismatch for record {event.id}")
            else:
                verified_count += 1

        for i, event in enumerate(events):
            if i == 0:
                if event.prev_hash:
                    errors.append(f"First record {event.id} has non-empty prev_hash")
            elif event.prev_hash != events[i - 1].record_hash:
                errors.append(f"Chain break at record {event.id}: prev_hash doesn't match previous record")

        return {
            'valid': len(errors) == 0,
            'total_records': len(events),
            'verified_records': verified_count,
            'errors': errors
        }

    @staticmethod
    def get_entity_history(entity_type: str, entity_id: str) -> List[Dict[str, Any]]:
        """
        Get the ledger history of one artifact.

        Args:
            entity_type: Kind of artifact
            entity_id: Artifact path or identifier

        Returns:
            List of audit events for the artifact, newest first
        """
        events = EventLog.objects.filter(
            entity_type=entity_type,
            entity_id=entity_id
        ).order_by('-timestamp')

        return [
            {
                'id': str(event.id),
                'actor': event.actor,
                'action': event.action,
                'timestamp': event.timestamp.isoformat(),
                'before_data': event.before_data,
                'after_data': event.after_data,
                'run_id': event.run_id,
            }
            for event in events
        ]

    @staticmethod
    def queries_spent(run_id: str) -> int:
        """Victim queries recorded by the events of one run."""
        total = 0
        for event in EventLog.objects.filter(run_id=run_id):
            if event.after_data and isinstance(event.after_data.get('queries'), int):
                total += event.after_data['queries']
        return total

    @staticmethod
    def reconcile_query_spend() -> Dict[str, Any]:
        """
        Compare the victim queries each run recorded against its query limit.

        A run's limit is the largest ``query_limit`` found in its events; runs
        without one are counted but never flagged.

        Returns:
            Dictionary with per-run totals and the runs that overspent
        """
        runs: Dict[str, Dict[str, Any]] = {}
        for event in EventLog.objects.exclude(run_id='').order_by('timestamp', 'created_at'):
            run = runs.setdefault(event.run_id, {'run_id': event.run_id, 'queries': 0, 'query_limit': None})
            data = event.after_data or {}
            if isinstance(data.get('queries'), int):
                run['queries'] += data['queries']
            if isinstance(data.get('query_limit'), int):
                run['query_limit'] = max(run['query_limit'] or 0, data['query_limit'])

        overspent = [
            run for run in runs.values()
            if run['query_limit'] is not None and run['queries'] > run['query_limit']
        ]
        return {
            'valid': not overspent,
            'total_runs': len(runs),
            'runs': list(runs.values()),
            'overspent': overspent,
        }
