"""
Shadow service for the attack toolkit.
A small regressor learns the victim's word-score function from a limited
number of queries so attacks can run without touching the victim.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from django.conf import settings

from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.victims.services.victim_service import VictimModel
from apps.wordscore.models import ScoreSource
from apps.wordscore.services.score_service import ScoreTable, ScoreVector, WordScoreService

logger = logging.getLogger(__name__)

SHADOW_FORMAT = 'attack-toolkit/shadow'
SHADOW_FORMAT_VERSION = 1


class ShadowServiceError(Exception):
    """Base exception for shadow service errors."""
    pass


@dataclass(frozen=True)
class ScorePair:
    """A queried word and the score vector the victim produced for it."""
    word: str
    target: ScoreVector


@dataclass(frozen=True)
class ShadowModel:
    """One tanh hidden layer from teacher vectors to score vectors."""
    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    out_weights: np.ndarray
    out_bias: np.ndarray
    teacher: EmbeddingTable = field(repr=False, compare=False)
    trained_on: int
    cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)
    seed: int = 0

    @property
    def n_classes(self) -> int:
        return self.out_bias.shape[0]

    @property
    def hidden_units(self) -> int:
        return self.hidden_bias.shape[0]

    def raw_output(self, vectors: np.ndarray) -> np.ndarray:
        hidden = np.tanh(vectors @ self.hidden_weights.T + self.hidden_bias)
        return hidden @ self.out_weights.T + self.out_bias


class ShadowService:
    """Service class for shadow score models."""

    @staticmethod
    def select_query_words(dataset_vocabulary: Mapping[str, int], q: int) -> List[str]:
        """The q most frequent words; equal counts ordered lexicographically."""
        if q <= 0:
            raise ShadowServiceError("q must be a positive integer")
        ranked = sorted(dataset_vocabulary.items(), key=lambda item: (-item[1], item[0]))
        if q > len(ranked):
            logger.warning(
                f"Requested {q} query words but the vocabulary has {len(ranked)}",
                extra={'requested': q, 'vocabulary': len(ranked), 'event_type': 'shadow_q_truncated'}
            )
        return [word for word, _ in ranked[:q]]

    @staticmethod
    def collect_pairs(victim: VictimModel, words: Sequence[str]) -> List[ScorePair]:
        """Query the victim for ``words`` and wrap the scores as training pairs."""
        table = WordScoreService.build_score_table(victim, words)
        return [ScorePair(word=word, target=table.score(word)) for word in table.words]

    @staticmethod
    def train_shadow(pairs: Sequence[ScorePair], teacher: EmbeddingTable, seed: int,
                     hidden_units: Optional[int] = None, epochs: Optional[int] = None,
                     learning_rate: Optional[float] = None,
                     batch_size: Optional[int] = None) -> ShadowModel:
        """
        Fit the regressor with mini-batch gradient descent on squared error.

        The loss covers the full score vector, zero entries included.
        """
        defaults = settings.ATTACK_TOOLKIT['SHADOW']
        hidden_units = hidden_units or defaults['HIDDEN_UNITS']
        epochs = epochs or defaults['EPOCHS']
        learning_rate = learning_rate or defaults['LEARNING_RATE']
        batch_size = batch_size or defaults['BATCH_SIZE']

        if len(pairs) < 2:
            raise ShadowServiceError("At least two score pairs are required")

        usable = [pair for pair in pairs if pair.word in teacher.index]
        skipped = len(pairs) - len(usable)
        if skipped:
            logger.warning(
                f"Skipped {skipped} score pairs for words missing from the teacher",
                extra={'skipped': skipped, 'event_type': 'shadow_pairs_skipped'}
            )
        if not usable:
            raise ShadowServiceError("Every score pair was skipped")

        inputs = np.array([teacher.vector(pair.word) for pair in usable])
        targets = np.array([pair.target.scores for pair in usable])
        n, dim = inputs.shape
        n_classes = targets.shape[1]

        rng = np.random.default_rng(seed)
        hidden_weights = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hidden_units, dim))
        hidden_bias = np.zeros(hidden_units)
        out_weights = rng.normal(0.0, 1.0 / np.sqrt(hidden_units), size=(n_classes, hidden_units))
        out_bias = np.zeros(n_classes)

        for epoch in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                batch = order[start:start + batch_size]
                x, y = inputs[batch], targets[batch]
                hidden = np.tanh(x @ hidden_weights.T + hidden_bias)
                output = hidden @ out_weights.T + out_bias
                grad_output = 2.0 * (output - y) / len(batch)
                grad_hidden = (grad_output @ out_weights) * (1.0 - hidden ** 2)

                out_weights -= learning_rate * (grad_output.T @ hidden)
                out_bias -= learning_rate * grad_output.sum(axis=0)
                hidden_weights -= learning_rate * (grad_hidden.T @ x)
                hidden_bias -= learning_rate * grad_hidden.sum(axis=0)

        model = ShadowModel(
            hidden_weights=hidden_weights,
            hidden_bias=hidden_bias,
            out_weights=out_weights,
            out_bias=out_bias,
            teacher=teacher,
            trained_on=len(usable),
            cache={pair.word: np.array(pair.target.scores) for pair in usable},
            seed=seed,
        )
        final = model.raw_output(inputs) - targets
        logger.info(
            f"Trained shadow model on {len(usable)} pairs",
            extra={'pairs': len(usable), 'hidden_units': hidden_units, 'epochs': epochs,
                   'train_loss': float(np.mean(np.sum(final ** 2, axis=1))),
                   'event_type': 'shadow_trained'}
        )
        return model

    @staticmethod
    def to_score_vectors(raw: np.ndarray) -> np.ndarray:
        """Keep each row's maximum if it is positive (capped at 1), zero the rest."""
        raw = np.atleast_2d(raw)
        result = np.zeros_like(raw)
        best = np.argmax(raw, axis=1)
        rows = np.arange(raw.shape[0])
        peak = raw[rows, best]
        positive = peak > 0
        result[rows[positive], best[positive]] = np.minimum(peak[positive], 1.0)
        return result

    @staticmethod
    def shadow_score(model: ShadowModel, teacher: EmbeddingTable, word: str) -> ScoreVector:
        """Shadow estimate of the victim's score for ``word``; queried words are served exactly."""
        if word in model.cache:
            return ScoreVector(scores=np.array(model.cache[word]))
        if word not in teacher.index:
            return ScoreVector.zeros(model.n_classes)
        raw = model.raw_output(teacher.vector(word)[None, :])
        return ScoreVector(scores=ShadowService.to_score_vectors(raw)[0])

    @staticmethod
    def predict_table(model: ShadowModel, teacher: EmbeddingTable,
                      words: Optional[Iterable[str]] = None) -> ScoreTable:
        """Shadow-sourced ScoreTable over ``words`` (default: the whole teacher vocabulary)."""
        words = tuple(dict.fromkeys(words)) if words is not None else teacher.words
        scores = np.zeros((len(words), model.n_classes))
        known = [i for i, word in enumerate(words) if word in teacher.index]
        if known:
            vectors = teacher.vectors[[teacher.index[words[i]] for i in known]]
            scores[known] = ShadowService.to_score_vectors(model.raw_output(vectors))
        for i, word in enumerate(words):
            if word in model.cache:
                scores[i] = model.cache[word]
        return ScoreTable(words=words, scores=scores, source=ScoreSource.SHADOW)

    @staticmethod
    def shadow_agreement(model: ShadowModel, ground_truth: ScoreTable) -> float:
        """
        Argmax-class agreement with ``ground_truth`` on words the shadow was not trained on.

        All-zero vectors count as class 0 on both sides.
        """
        words = [word for word in ground_truth.words if word not in model.cache]
        if not words:
            raise ShadowServiceError("No evaluation word outside the training pairs")

        predicted = ShadowService.predict_table(model, model.teacher, words)
        truth = ground_truth.scores[[ground_truth.index[word] for word in words]]
        shadow_classes = np.maximum(predicted.argmax_classes(), 0)
        truth_classes = np.where(np.any(truth > 0, axis=1), np.argmax(truth, axis=1), 0)
        agreement = float(np.mean(shadow_classes == truth_classes))
        logger.info(
            f"Shadow agreement {agreement:.3f} over {len(words)} words",
            extra={'agreement': agreement, 'evaluated': len(words), 'trained_on': model.trained_on,
                   'event_type': 'shadow_agreement'}
        )
        return agreement

    @staticmethod
    def save_shadow(model: ShadowModel, path: Path) -> None:
        """One JSON file holding the parameters and the cached training pairs."""
        payload = {
            'format': SHADOW_FORMAT,
            'version': SHADOW_FORMAT_VERSION,
            'teacher': {'dim': model.teacher.dim, 'vocabulary': len(model.teacher)},
            'seed': model.seed,
            'trained_on': model.trained_on,
            'hidden_weights': model.hidden_weights.tolist(),
            'hidden_bias': model.hidden_bias.tolist(),
            'out_weights': model.out_weights.tolist(),
            'out_bias': model.out_bias.tolist(),
            'cache': {word: scores.tolist() for word, scores in model.cache.items()},
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload), encoding='utf-8')

    @staticmethod
    def load_shadow(path: Path, teacher: EmbeddingTable) -> ShadowModel:
        path = Path(path)
        if not path.exists():
            raise ShadowServiceError(f"Shadow file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise ShadowServiceError(f"Shadow file {path} is not valid JSON: {e}")
        if not isinstance(payload, dict) or payload.get('format') != SHADOW_FORMAT:
            raise ShadowServiceError(f"{path} is not a shadow model file")
        if payload['teacher']['dim'] != teacher.dim:
            raise ShadowServiceError(
                f"Shadow expects {payload['teacher']['dim']}-dim embeddings, got {teacher.dim}"
            )
        return ShadowModel(
            hidden_weights=np.array(payload['hidden_weights'], dtype=np.float64),
            hidden_bias=np.array(payload['hidden_bias'], dtype=np.float64),
            out_weights=np.array(payload['out_weights'], dtype=np.float64),
            out_bias=np.array(payload['out_bias'], dtype=np.float64),
            teacher=teacher,
            trained_on=payload['trained_on'],
            cache={word: np.array(scores, dtype=np.float64) for word, scores in payload['cache'].items()},
            seed=payload.get('seed', 0),
        )
