"""
Victim service for the attack toolkit.
Trains and serves the student classifiers that the attacks target.

The student is an embedding-bag classifier: the feature of a text is the
mean of its in-vocabulary token vectors (optionally followed by a
normalized sentence count) and a linear softmax head sits on top.
"""
import json
import logging
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings

from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.textproc.services.text_service import TextService
from apps.victims.models import VictimKind, VictimMode
from apps.victims.services.dataset_service import DatasetError, LabeledDataset

logger = logging.getLogger(__name__)

VICTIM_FORMAT = 'attack-toolkit/victim'
VICTIM_FORMAT_VERSION = 1


class VictimServiceError(Exception):
    """Base exception for victim service errors."""
    pass


class BudgetExceeded(VictimServiceError):
    """Raised when a query would go past the budget limit."""

    def __init__(self, used: int, limit: int, requested: int):
        self.used = used
        self.limit = limit
        self.requested = requested
        super().__init__(
            f"Query budget exhausted: {used} of {limit} queries used, {requested} requested"
        )


@dataclass(frozen=True)
class VictimConfig:
    """Training options of a student classifier."""
    mode: str = VictimMode.FEATURE_EXTRACTOR
    dropout_ratio: float = 0.0
    learning_rate: float = 0.05
    embedding_learning_rate: float = 0.0
    epochs: int = 30
    batch_size: int = 32
    seed: int = 13
    n_classes: int = 2
    length_feature: bool = False
    length_cap: int = 32

    def __post_init__(self):
        object.__setattr__(self, 'mode', VictimMode(self.mode))
        if not 0 <= self.dropout_ratio < 1:
            raise VictimServiceError("dropout_ratio must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise VictimServiceError("learning_rate must be positive")
        if self.embedding_learning_rate < 0:
            raise VictimServiceError("embedding_learning_rate cannot be negative")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise VictimServiceError("epochs and batch_size must be positive")
        if self.n_classes < 2:
            raise VictimServiceError("n_classes must be at least 2")
        if self.length_cap <= 0:
            raise VictimServiceError("length_cap must be positive")
        # Frozen embeddings never move.
        if self.mode == VictimMode.FEATURE_EXTRACTOR:
            object.__setattr__(self, 'embedding_learning_rate', 0.0)

    @classmethod
    def from_settings(cls, **overrides) -> 'VictimConfig':
        """Defaults from ``settings.ATTACK_TOOLKIT`` with keyword overrides."""
        toolkit = settings.ATTACK_TOOLKIT
        defaults = toolkit['VICTIM']
        values = {
            'mode': defaults['MODE'],
            'dropout_ratio': defaults['DROPOUT_RATIO'],
            'learning_rate': defaults['LEARNING_RATE'],
            'embedding_learning_rate': defaults['EMBEDDING_LEARNING_RATE'],
            'epochs': defaults['EPOCHS'],
            'batch_size': defaults['BATCH_SIZE'],
            'seed': toolkit['SEED'],
            'length_cap': defaults['LENGTH_CAP'],
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['mode'] = str(self.mode.value)
        return data


@dataclass
class QueryBudget:
    """Counts victim queries; ``limit`` None means unlimited, 0 refuses every query."""
    used: int = 0
    limit: Optional[int] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def remaining(self) -> Optional[int]:
        return None if self.limit is None else self.limit - self.used

    def charge(self, count: int = 1) -> None:
        """
        Account for ``count`` queries.

        When the limit would be passed, the queries that still fit are
        consumed and BudgetExceeded is raised for the rest.
        """
        with self._lock:
            if self.limit is not None and self.used + count > self.limit:
                used_before = self.used
                self.used = self.limit
                logger.warning(
                    f"Query budget exhausted at {self.limit} queries",
                    extra={'used': used_before, 'limit': self.limit, 'requested': count,
                           'event_type': 'query_budget_exhausted'}
                )
                raise BudgetExceeded(used_before, self.limit, count)
            self.used += count


@dataclass(frozen=True)
class ClassDistribution:
    """Softmax output of one query."""
    probabilities: np.ndarray
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.probabilities)

    @property
    def argmax(self) -> int:
        # np.argmax keeps the first maximum, i.e. the lower class index.
        return int(np.argmax(self.probabilities))

    def log_probabilities(self) -> np.ndarray:
        return np.log(np.clip(self.probabilities, 1e-300, None))


class GradientResult(NamedTuple):
    loss: float
    weights: np.ndarray
    bias: np.ndarray
    features: np.ndarray


@dataclass
class VictimModel:
    """
    Black-box student C = (f, w, b).

    ``teacher`` is the public table; ``embedding`` is the table the student
    actually reads (a private copy for fine-tuned students).
    """
    kind: str
    teacher: EmbeddingTable
    embedding: EmbeddingTable
    head_weights: np.ndarray
    head_bias: np.ndarray
    config: VictimConfig
    class_names: Tuple[str, ...]
    budget: QueryBudget = field(default_factory=QueryBudget)
    tuned_words: Tuple[str, ...] = ()
    training_data: Optional[LabeledDataset] = field(default=None, repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def uses_length(self) -> bool:
        return self.kind == VictimKind.SENTENCE and self.config.length_feature

    @property
    def feature_dim(self) -> int:
        return self.embedding.dim + (1 if self.uses_length else 0)

    def predict_proba(self, text: str) -> ClassDistribution:
        """Unaccounted forward pass (owner side)."""
        return self.predict_many([text])[0]

    def predict_many(self, texts: Sequence[str]) -> List[ClassDistribution]:
        features, counts = VictimService.featurize_many(
            self.embedding, texts, self.uses_length, self.config.length_cap
        )
        probabilities = VictimService.softmax(features @ self.head_weights.T + self.head_bias)
        uniform = np.full(self.n_classes, 1.0 / self.n_classes)
        results = []
        for row, count in zip(probabilities, counts):
            if count == 0:
                results.append(ClassDistribution(probabilities=uniform.copy(), degenerate=True))
            else:
                results.append(ClassDistribution(probabilities=row))
        return results


class VictimService:
    """Service class for student classifiers."""

    @staticmethod
    def normalized_length(text: str, cap: int = 32) -> float:
        """min(sentence count, cap) / cap."""
        return min(TextService.sentence_count(text), cap) / cap

    @staticmethod
    def token_indices(table: EmbeddingTable, text: str) -> np.ndarray:
        """Row indices of the in-vocabulary tokens of ``text`` (repeats kept)."""
        index = table.index
        return np.array(
            [index[token] for token in TextService.tokenize(text).tokens if token in index],
            dtype=np.int64,
        )

    @staticmethod
    def featurize_many(table: EmbeddingTable, texts: Sequence[str], length_feature: bool,
                       cap: int = 32) -> Tuple[np.ndarray, np.ndarray]:
        """Feature rows and in-vocabulary token counts for ``texts``."""
        width = table.dim + (1 if length_feature else 0)
        features = np.zeros((len(texts), width))
        counts = np.zeros(len(texts), dtype=np.int64)
        for row, text in enumerate(texts):
            indices = VictimService.token_indices(table, text)
            counts[row] = indices.size
            if indices.size:
                features[row, :table.dim] = table.vectors[indices].mean(axis=0)
            if length_feature:
                features[row, table.dim] = VictimService.normalized_length(text, cap)
        return features, counts

    @staticmethod
    def sentence_embed(teacher: EmbeddingTable, text: str, length_feature: bool,
                       cap: int = 32) -> np.ndarray:
        """Attacker-side sentence feature computed on the public table."""
        features, _ = VictimService.featurize_many(teacher, [text], length_feature, cap)
        return features[0]

    @staticmethod
    def softmax(logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max(axis=-1, keepdims=True)
        exp = np.exp(shifted)
        return exp / exp.sum(axis=-1, keepdims=True)

    @staticmethod
    def cross_entropy_loss(weights: np.ndarray, bias: np.ndarray, features: np.ndarray,
                           targets: np.ndarray) -> float:
        """Mean cross-entropy of one-hot ``targets``."""
        probabilities = VictimService.softmax(features @ weights.T + bias)
        return float(-np.mean(np.sum(targets * np.log(np.clip(probabilities, 1e-300, None)), axis=1)))

    @staticmethod
    def cross_entropy_gradients(weights: np.ndarray, bias: np.ndarray, features: np.ndarray,
                                targets: np.ndarray) -> GradientResult:
        """Analytic gradients of the mean cross-entropy of the linear head."""
        probabilities = VictimService.softmax(features @ weights.T + bias)
        n = features.shape[0]
        delta = (probabilities - targets) / n
        loss = float(-np.mean(np.sum(targets * np.log(np.clip(probabilities, 1e-300, None)), axis=1)))
        return GradientResult(
            loss=loss,
            weights=delta.T @ features,
            bias=delta.sum(axis=0),
            features=delta @ weights,
        )

    @staticmethod
    def train_word_victim(dataset: LabeledDataset, teacher: EmbeddingTable, config: VictimConfig,
                          query_limit: Optional[int] = None) -> VictimModel:
        """Train a mean-of-embeddings classifier on ``dataset``."""
        return VictimService._fit(VictimKind.WORD, dataset, teacher, config, query_limit)

    @staticmethod
    def train_sentence_victim(dataset: LabeledDataset, teacher: EmbeddingTable, config: VictimConfig,
                              query_limit: Optional[int] = None) -> VictimModel:
        """Train a sentence-embedding classifier (mean vector plus optional length feature)."""
        return VictimService._fit(VictimKind.SENTENCE, dataset, teacher, config, query_limit)

    @staticmethod
    def _fit(kind: str, dataset: LabeledDataset, teacher: EmbeddingTable, config: VictimConfig,
             query_limit: Optional[int]) -> VictimModel:
        absent = [dataset.class_names[c] for c, n in dataset.class_counts().items() if n == 0]
        if absent:
            raise DatasetError(f"Classes without samples: {', '.join(absent)}")
        if config.n_classes != dataset.n_classes:
            config = replace(config, n_classes=dataset.n_classes)

        use_length = kind == VictimKind.SENTENCE and config.length_feature
        index_lists: List[np.ndarray] = []
        labels: List[int] = []
        lengths: List[float] = []
        skipped = 0
        for text, label in dataset:
            indices = VictimService.token_indices(teacher, text)
            if indices.size == 0:
                skipped += 1
                continue
            index_lists.append(indices)
            labels.append(label)
            lengths.append(VictimService.normalized_length(text, config.length_cap))

        if skipped:
            logger.warning(
                f"Skipped {skipped} samples without in-vocabulary tokens",
                extra={'skipped': skipped, 'event_type': 'victim_samples_skipped'}
            )
        if not index_lists:
            raise VictimServiceError("No sample has in-vocabulary tokens")

        n, dim, n_classes = len(index_lists), teacher.dim, config.n_classes
        width = dim + (1 if use_length else 0)
        targets = np.eye(n_classes)[np.array(labels)]
        length_column = np.array(lengths)
        matrix = np.array(teacher.vectors)
        fine_tune = config.mode == VictimMode.FINE_TUNED and config.embedding_learning_rate > 0

        def batch_features(batch: np.ndarray) -> np.ndarray:
            features = np.zeros((len(batch), width))
            for row, i in enumerate(batch):
                features[row, :dim] = matrix[index_lists[i]].mean(axis=0)
            if use_length:
                features[:, dim] = length_column[batch]
            return features

        fixed_features = None if fine_tune else batch_features(np.arange(n))
        weights = np.zeros((n_classes, width))
        bias = np.zeros(n_classes)
        row_gradients = np.zeros_like(matrix) if fine_tune else None
        tuned = set()
        rng = np.random.default_rng(config.seed)
        keep = 1.0 - config.dropout_ratio

        for epoch in range(config.epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                batch = order[start:start + config.batch_size]
                features = fixed_features[batch] if fixed_features is not None else batch_features(batch)
                mask = None
                if config.dropout_ratio > 0:
                    # Inverted dropout on the feature vector, training only.
                    mask = (rng.random(features.shape) < keep) / keep
                    features = features * mask

                grads = VictimService.cross_entropy_gradients(weights, bias, features, targets[batch])

                if fine_tune:
                    feature_grads = grads.features[:, :dim]
                    if mask is not None:
                        feature_grads = feature_grads * mask[:, :dim]
                    touched = []
                    for row, i in enumerate(batch):
                        indices = index_lists[i]
                        np.add.at(row_gradients, indices, feature_grads[row] / indices.size)
                        touched.append(indices)
                    touched_rows = np.unique(np.concatenate(touched))
                    matrix[touched_rows] -= config.embedding_learning_rate * row_gradients[touched_rows]
                    row_gradients[touched_rows] = 0.0
                    tuned.update(touched_rows.tolist())

                weights -= config.learning_rate * grads.weights
                bias -= config.learning_rate * grads.bias

        if fine_tune:
            embedding = EmbeddingTable.from_rows(teacher.words, matrix)
            tuned_words = tuple(sorted(teacher.words[i] for i in tuned))
        else:
            embedding = teacher
            tuned_words = ()

        victim = VictimModel(
            kind=kind,
            teacher=teacher,
            embedding=embedding,
            head_weights=weights,
            head_bias=bias,
            config=config,
            class_names=dataset.class_names,
            budget=QueryBudget(limit=query_limit),
            tuned_words=tuned_words,
            training_data=dataset,
        )
        logger.info(
            f"Trained {kind} victim on {n} samples ({config.mode.label})",
            extra={'kind': kind, 'samples': n, 'mode': config.mode.value, 'epochs': config.epochs,
                   'dropout_ratio': config.dropout_ratio, 'tuned_rows': len(tuned_words),
                   'event_type': 'victim_trained'}
        )
        return victim

    @staticmethod
    def random_victim(teacher: EmbeddingTable, config: VictimConfig, class_names: Sequence[str],
                      kind: str = VictimKind.WORD, query_limit: Optional[int] = None) -> VictimModel:
        """Untrained student with a seeded random head (diagnostic baseline)."""
        config = replace(config, n_classes=len(class_names))
        use_length = kind == VictimKind.SENTENCE and config.length_feature
        width = teacher.dim + (1 if use_length else 0)
        rng = np.random.default_rng(config.seed)
        return VictimModel(
            kind=kind,
            teacher=teacher,
            embedding=teacher,
            head_weights=rng.normal(0.0, 1.0, size=(len(class_names), width)),
            head_bias=rng.normal(0.0, 1.0, size=len(class_names)),
            config=config,
            class_names=tuple(class_names),
            budget=QueryBudget(limit=query_limit),
        )

    @staticmethod
    def query(victim: VictimModel, text: str) -> ClassDistribution:
        """Black-box query: class probabilities, one budget unit."""
        victim.budget.charge(1)
        result = victim.predict_proba(text)
        if result.degenerate:
            logger.warning(
                "Query without in-vocabulary tokens answered with a uniform distribution",
                extra={'event_type': 'degenerate_query'}
            )
        return result

    @staticmethod
    def query_many(victim: VictimModel, texts: Sequence[str]) -> List[ClassDistribution]:
        """Batch of black-box queries, one budget unit each."""
        victim.budget.charge(len(texts))
        results = victim.predict_many(texts)
        degenerate = sum(1 for result in results if result.degenerate)
        if degenerate:
            logger.warning(
                f"{degenerate} queries without in-vocabulary tokens answered uniformly",
                extra={'degenerate': degenerate, 'event_type': 'degenerate_query'}
            )
        return results

    @staticmethod
    def accuracy(victim: VictimModel, dataset: LabeledDataset) -> float:
        """Owner-side accuracy; not charged to the query budget."""
        predictions = [result.argmax for result in victim.predict_many(dataset.texts)]
        return float(np.mean(np.array(predictions) == dataset.labels))

    @staticmethod
    def adversarial_retrain(victim: VictimModel,
                            adversarial: Union[LabeledDataset, Sequence[Tuple[str, int]], None],
                            original: Optional[LabeledDataset] = None,
                            epochs: Optional[int] = None,
                            embedding_learning_rate: Optional[float] = None) -> VictimModel:
        """
        Retrain from scratch on the original data plus adversarial texts.

        Adversarial labels must be the correct classes of the perturbed texts.
        The retrained student always fine-tunes its embeddings.
        """
        if adversarial is None:
            raise VictimServiceError("Adversarial set is empty")
        samples = adversarial.samples if isinstance(adversarial, LabeledDataset) else tuple(adversarial)
        if not samples:
            raise VictimServiceError("Adversarial set is empty")
        base = original or victim.training_data
        if base is None:
            raise VictimServiceError("Original training data is required for adversarial retraining")

        defaults = settings.ATTACK_TOOLKIT['VICTIM']
        config = replace(
            victim.config,
            mode=VictimMode.FINE_TUNED,
            embedding_learning_rate=(embedding_learning_rate
                                     or victim.config.embedding_learning_rate
                                     or defaults['EMBEDDING_LEARNING_RATE']),
            epochs=max(victim.config.epochs, epochs or defaults['ADVTRAIN_EPOCHS']),
        )
        merged = base.merged_with(LabeledDataset.from_pairs(samples, base.class_names))
        logger.info(
            f"Retraining victim with {len(samples)} adversarial samples",
            extra={'adversarial': len(samples), 'original': len(base), 'epochs': config.epochs,
                   'event_type': 'victim_adversarial_retrain'}
        )
        return VictimService._fit(victim.kind, merged, victim.teacher, config, victim.budget.limit)

    @staticmethod
    def save_victim(victim: VictimModel, path: Path) -> None:
        """Write a self-describing JSON model file."""
        tuned_rows = {word: victim.embedding.vector(word).tolist() for word in victim.tuned_words}
        payload = {
            'format': VICTIM_FORMAT,
            'version': VICTIM_FORMAT_VERSION,
            'kind': str(victim.kind),
            'config': victim.config.to_dict(),
            'class_names': list(victim.class_names),
            'teacher': {'dim': victim.teacher.dim, 'vocabulary': len(victim.teacher)},
            'head_weights': victim.head_weights.tolist(),
            'head_bias': victim.head_bias.tolist(),
            'tuned_rows': tuned_rows,
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload), encoding='utf-8')

    @staticmethod
    def load_victim(path: Path, teacher: EmbeddingTable, query_limit: Optional[int] = None) -> VictimModel:
        """Rebuild a victim saved by ``save_victim`` on top of ``teacher``."""
        path = Path(path)
        if not path.exists():
            raise VictimServiceError(f"Victim file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise VictimServiceError(f"Victim file {path} is not valid JSON: {e}")
        if not isinstance(payload, dict) or payload.get('format') != VICTIM_FORMAT:
            raise VictimServiceError(f"{path} is not a victim model file")
        if payload['teacher']['dim'] != teacher.dim:
            raise VictimServiceError(
                f"Victim expects {payload['teacher']['dim']}-dim embeddings, got {teacher.dim}"
            )

        tuned_rows = {word: np.array(row) for word, row in payload.get('tuned_rows', {}).items()}
        missing = [word for word in tuned_rows if word not in teacher.index]
        if missing:
            raise VictimServiceError(f"Fine-tuned rows for unknown words: {', '.join(missing[:5])}")
        embedding = teacher.with_rows(tuned_rows) if tuned_rows else teacher

        return VictimModel(
            kind=VictimKind(payload['kind']),
            teacher=teacher,
            embedding=embedding,
            head_weights=np.array(payload['head_weights'], dtype=np.float64),
            head_bias=np.array(payload['head_bias'], dtype=np.float64),
            config=VictimConfig(**payload['config']),
            class_names=tuple(payload['class_names']),
            budget=QueryBudget(limit=query_limit),
            tuned_words=tuple(sorted(tuned_rows)),
        )
