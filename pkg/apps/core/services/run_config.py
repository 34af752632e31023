"""
Run configuration for toolkit commands.

Values resolve in three layers: ``settings.ATTACK_TOOLKIT`` defaults, an
optional JSON config file, then command-line flags. Later layers win.
"""
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from django.conf import settings

from apps.attacks.services.word_attack_service import AttackConfig
from apps.embeddings.services.embedding_service import EmbeddingService, EmbeddingTable
from apps.shadow.services.shadow_service import ShadowModel, ShadowService
from apps.textproc.services.lexicon_service import LexiconService, PosLexicon
from apps.victims.models import VictimKind, VictimMode
from apps.victims.services.dataset_service import DatasetService, LabeledDataset
from apps.victims.services.victim_service import VictimConfig, VictimModel, VictimService

logger = logging.getLogger(__name__)

PATH_FIELDS = ('embeddings', 'lexicon', 'dataset', 'artifact_dir', 'victim', 'shadow', 'scores', 'output')


class RunConfigError(Exception):
    """Base exception for run configuration errors."""
    pass


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved options of one command run."""
    # artifacts
    embeddings: Optional[str] = None
    lexicon: Optional[str] = None
    dataset: Optional[str] = None
    class_names: Optional[List[str]] = None
    artifact_dir: str = 'artifacts'
    victim: Optional[str] = None
    shadow: Optional[str] = None
    scores: Optional[str] = None
    output: Optional[str] = None
    # victim
    kind: str = VictimKind.WORD
    mode: str = VictimMode.FEATURE_EXTRACTOR
    dropout_ratio: float = 0.0
    defense_dropout_ratio: float = 0.5
    learning_rate: float = 0.05
    embedding_learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    length_feature: bool = False
    length_cap: int = 32
    test_fraction: float = 0.2
    # shadow
    q: int = 1000
    hidden_units: int = 64
    shadow_epochs: int = 200
    shadow_learning_rate: float = 0.05
    # attack
    g_w: int = 10
    th: float = 0.5
    source_class: int = 1
    target_class: int = 0
    keep_sentences: int = 1
    append_sentences: int = 10
    append_cap: int = 32
    sweep_neighbors: List[int] = None
    sweep_fractions: List[float] = None
    sample_size: Optional[int] = None
    # word scores
    multiclass_percentile: float = 60.0
    skew_corrected: bool = True
    # run
    seed: int = 13
    query_limit: Optional[int] = None

    def path(self, name: str) -> Optional[Path]:
        value = getattr(self, name)
        return Path(value) if value else None

    def artifact(self, name: str, default_file: str) -> Path:
        """Explicit artifact path, or ``default_file`` inside the artifact directory."""
        return self.path(name) or Path(self.artifact_dir) / default_file

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['kind'] = str(self.kind)
        data['mode'] = str(self.mode)
        return data


class RunConfigService:
    """Service class for resolving and using run configurations."""

    @staticmethod
    def defaults() -> Dict[str, Any]:
        toolkit = settings.ATTACK_TOOLKIT
        victim = toolkit['VICTIM']
        shadow = toolkit['SHADOW']
        attack = toolkit['ATTACK']
        wordscore = toolkit['WORDSCORE']
        return {
            'artifact_dir': str(toolkit['ARTIFACT_DIR']),
            'mode': victim['MODE'],
            'dropout_ratio': victim['DROPOUT_RATIO'],
            'defense_dropout_ratio': victim['DEFENSE_DROPOUT_RATIO'],
            'learning_rate': victim['LEARNING_RATE'],
            'embedding_learning_rate': victim['EMBEDDING_LEARNING_RATE'],
            'epochs': victim['EPOCHS'],
            'batch_size': victim['BATCH_SIZE'],
            'length_cap': victim['LENGTH_CAP'],
            'test_fraction': victim['TEST_FRACTION'],
            'q': shadow['QUERIES'],
            'hidden_units': shadow['HIDDEN_UNITS'],
            'shadow_epochs': shadow['EPOCHS'],
            'shadow_learning_rate': shadow['LEARNING_RATE'],
            'g_w': attack['NEIGHBORS'],
            'th': attack['MAX_REPLACED_FRACTION'],
            'keep_sentences': attack['KEEP_SENTENCES'],
            'append_sentences': attack['APPEND_SENTENCES'],
            'append_cap': attack['APPEND_CAP'],
            'sweep_neighbors': list(attack['SWEEP_NEIGHBORS']),
            'sweep_fractions': list(attack['SWEEP_FRACTIONS']),
            'multiclass_percentile': wordscore['MULTICLASS_PERCENTILE'],
            'skew_corrected': wordscore['SKEW_CORRECTED'],
            'seed': toolkit['SEED'],
            'query_limit': toolkit['QUERY_LIMIT'],
        }

    @staticmethod
    def read_config_file(path: Path) -> Dict[str, Any]:
        path = Path(path)
        if not path.exists():
            raise RunConfigError(f"Config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise RunConfigError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise RunConfigError(f"Config file {path} must hold a JSON object")
        return data

    @staticmethod
    def resolve(config_file: Optional[Path] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
        """Settings defaults, then the config file, then non-None ``overrides``."""
        known = {f.name for f in fields(RunConfig)}
        values = RunConfigService.defaults()

        if config_file:
            from_file = RunConfigService.read_config_file(config_file)
            unknown = sorted(set(from_file) - known)
            if unknown:
                raise RunConfigError(f"Unknown config keys in {config_file}: {', '.join(unknown)}")
            values.update(from_file)

        for key, value in (overrides or {}).items():
            if key in known and value is not None:
                values[key] = value
        for key in PATH_FIELDS:
            if values.get(key) is not None:
                values[key] = str(values[key])

        try:
            config = RunConfig(**values)
        except TypeError as e:
            raise RunConfigError(f"Invalid configuration: {e}")
        if config.kind not in VictimKind.values:
            raise RunConfigError(f"Unknown victim kind '{config.kind}'")
        if config.mode not in VictimMode.values:
            raise RunConfigError(f"Unknown victim mode '{config.mode}'")
        if config.query_limit is not None and config.query_limit < 0:
            raise RunConfigError("query_limit cannot be negative")
        if config.append_cap <= 0:
            raise RunConfigError("append_cap must be positive")
        logger.debug(
            "Resolved run configuration",
            extra={'config_file': str(config_file or ''), 'seed': config.seed,
                   'event_type': 'run_config_resolved'}
        )
        return config

    @staticmethod
    def to_json(config: RunConfig) -> str:
        return json.dumps({'resolved_config': config.to_dict()}, sort_keys=True)

    @staticmethod
    def require(config: RunConfig, names: Sequence[str]) -> None:
        """Every named path is set and exists."""
        for name in names:
            path = config.path(name)
            if path is None:
                raise RunConfigError(f"--{name.replace('_', '-')} is required")
            if not path.exists():
                raise RunConfigError(f"{name} path does not exist: {path}")

    @staticmethod
    def victim_config(config: RunConfig, **overrides) -> VictimConfig:
        values = {
            'mode': config.mode,
            'dropout_ratio': config.dropout_ratio,
            'learning_rate': config.learning_rate,
            'embedding_learning_rate': config.embedding_learning_rate,
            'epochs': config.epochs,
            'batch_size': config.batch_size,
            'seed': config.seed,
            'length_feature': config.length_feature,
            'length_cap': config.length_cap,
        }
        values.update(overrides)
        return VictimConfig(**values)

    @staticmethod
    def attack_config(config: RunConfig, **overrides) -> AttackConfig:
        values = {
            'g_w': config.g_w,
            'th': config.th,
            'target_class': config.target_class,
            'source_class': config.source_class,
        }
        values.update(overrides)
        return AttackConfig(**values)

    @staticmethod
    def load_teacher(config: RunConfig) -> EmbeddingTable:
        RunConfigService.require(config, ['embeddings'])
        return EmbeddingService.load_embeddings(config.path('embeddings'))

    @staticmethod
    def load_lexicon(config: RunConfig) -> PosLexicon:
        if config.lexicon:
            RunConfigService.require(config, ['lexicon'])
            return LexiconService.load_lexicon(config.path('lexicon'))
        return LexiconService.default_lexicon()

    @staticmethod
    def load_dataset(config: RunConfig) -> LabeledDataset:
        RunConfigService.require(config, ['dataset'])
        return DatasetService.load_dataset(config.path('dataset'), config.class_names)

    @staticmethod
    def load_victim(config: RunConfig, teacher: EmbeddingTable) -> VictimModel:
        return VictimService.load_victim(
            config.artifact('victim', 'victim.json'), teacher, query_limit=config.query_limit
        )

    @staticmethod
    def load_shadow(config: RunConfig, teacher: EmbeddingTable) -> ShadowModel:
        return ShadowService.load_shadow(config.artifact('shadow', 'shadow.json'), teacher)
