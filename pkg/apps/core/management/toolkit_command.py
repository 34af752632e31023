"""
Shared base for toolkit management commands.
Resolves the run configuration, echoes it, converts service errors to
CommandError and records artifacts in the audit ledger.
"""
import argparse
import logging
import uuid
from typing import Any, Dict, Optional

from django.core.management.base import BaseCommand, CommandError

from apps.attacks.services.word_attack_service import AttackError
from apps.audit.services.audit_service import AuditService
from apps.core.services.run_config import RunConfig, RunConfigError, RunConfigService
from apps.embeddings.services.embedding_service import EmbeddingError
from apps.evaluation.services.metrics_service import EvaluationError
from apps.shadow.services.shadow_service import ShadowServiceError
from apps.textproc.services.text_service import TextProcessingError
from apps.victims.services.dataset_service import DatasetError
from apps.victims.services.victim_service import VictimServiceError
from apps.wordscore.services.score_service import ScoreError

logger = logging.getLogger(__name__)

SERVICE_ERRORS = (
    AttackError,
    DatasetError,
    EmbeddingError,
    EvaluationError,
    RunConfigError,
    ScoreError,
    ShadowServiceError,
    TextProcessingError,
    VictimServiceError,
)


def comma_list(value: str):
    return [item.strip() for item in value.split(',') if item.strip()]


class ToolkitCommand(BaseCommand):
    """Subclasses implement ``add_command_arguments`` and ``run``."""

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file with run configuration values')
        parser.add_argument('--embeddings', help='Teacher embedding text file')
        parser.add_argument('--lexicon', help='Part-of-speech lexicon TSV (default: bundled lexicon)')
        parser.add_argument('--dataset', help='Labeled CSV dataset with text,label columns')
        parser.add_argument('--class-names', type=comma_list, dest='class_names',
                            help='Comma-separated class order, e.g. real,fake')
        parser.add_argument('--artifact-dir', dest='artifact_dir', help='Directory for model files')
        parser.add_argument('--victim', help='Victim model file')
        parser.add_argument('--shadow', help='Shadow model file')
        parser.add_argument('--seed', type=int, help='Seed for every random choice')
        parser.add_argument('--query-limit', type=int, dest='query_limit',
                            help='Maximum number of victim queries')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        self.run_id = str(uuid.uuid4())
        try:
            config = RunConfigService.resolve(options.get('config'), options)
            self.config = config
            self.stdout.write(RunConfigService.to_json(config))
            self.run(config, options)
        except SERVICE_ERRORS as e:
            logger.error(
                f"Command {self.command_name} failed: {str(e)}",
                extra={'command': self.command_name, 'run_id': self.run_id, 'error': str(e),
                       'event_type': 'command_failed'}
            )
            raise CommandError(str(e))

    def run(self, config: RunConfig, options: Dict[str, Any]) -> None:
        raise NotImplementedError

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def audit(self, entity_type: str, entity_id: str, action: str,
              after_data: Optional[Dict[str, Any]] = None) -> None:
        """Record an artifact with the run's query limit for spend reconciliation."""
        after_data = {**(after_data or {}), 'query_limit': self.config.query_limit}
        AuditService.log_event(
            actor=f"manage.py {self.command_name}",
            entity_type=entity_type,
            entity_id=str(entity_id),
            action=action,
            after_data=after_data,
            run_id=self.run_id,
        )

    @staticmethod
    def flag(parser, *names, **kwargs):
        """Boolean flag whose absence leaves the configured value untouched."""
        parser.add_argument(*names, action=argparse.BooleanOptionalAction, default=None, **kwargs)
