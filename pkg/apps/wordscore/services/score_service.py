"""
Word-score service for the attack toolkit.
Turns victim probabilities into per-word class scores and predicts the
victim's decision boundary from score sums.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from apps.textproc.services.text_service import TokenSeq
from apps.victims.services.victim_service import ClassDistribution, VictimModel, VictimService
from apps.wordscore.models import ScoreSource

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-6


class ScoreError(Exception):
    """Base exception for word-score errors."""
    pass


@dataclass(frozen=True)
class ScoreVector:
    """Per-class score of one word: at most one strictly positive entry."""
    scores: np.ndarray

    @classmethod
    def zeros(cls, n_classes: int) -> 'ScoreVector':
        return cls(scores=np.zeros(n_classes))

    def __len__(self) -> int:
        return len(self.scores)

    def __getitem__(self, class_index: int) -> float:
        return float(self.scores[class_index])

    @property
    def argmax_class(self) -> Optional[int]:
        """Class holding the positive entry, None for an all-zero vector."""
        if not np.any(self.scores > 0):
            return None
        return int(np.argmax(self.scores))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.scores)


@dataclass(frozen=True)
class ScoreTable:
    """Word -> ScoreVector rows stored as a (words x classes) matrix."""
    words: tuple
    scores: np.ndarray
    source: str = ScoreSource.VICTIM_QUERIES
    index: Dict[str, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] != len(self.words):
            raise ScoreError("Scores must be a (words x classes) matrix")
        object.__setattr__(self, 'scores', scores)
        object.__setattr__(self, 'index', {word: i for i, word in enumerate(self.words)})

    @classmethod
    def from_vectors(cls, entries: Dict[str, ScoreVector], n_classes: int,
                     source: str = ScoreSource.VICTIM_QUERIES) -> 'ScoreTable':
        words = tuple(entries)
        matrix = np.array([entries[word].scores for word in words]).reshape(len(words), n_classes)
        return cls(words=words, scores=matrix, source=source)

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def score(self, word: str) -> ScoreVector:
        """Score of ``word``; OOV words score zero."""
        position = self.index.get(word)
        if position is None:
            return ScoreVector.zeros(self.n_classes)
        return ScoreVector(scores=self.scores[position])

    def argmax_classes(self) -> np.ndarray:
        """Class of each row's positive entry, -1 for all-zero rows."""
        classes = np.argmax(self.scores, axis=1)
        return np.where(np.any(self.scores > 0, axis=1), classes, -1)

    def scaled(self, factor: float) -> 'ScoreTable':
        return ScoreTable(words=self.words, scores=self.scores * factor, source=self.source)


@dataclass(frozen=True)
class InputScore:
    """Per-class score sums over an input's tokens."""
    sums: np.ndarray

    def __add__(self, other: 'InputScore') -> 'InputScore':
        return InputScore(sums=self.sums + other.sums)


@dataclass(frozen=True)
class ClassWordRatios:
    """Share of scored words argmax-assigned to each class; r_w = t1 / t0 for binary tables."""
    t: np.ndarray
    r_w: Optional[float] = None


@dataclass(frozen=True)
class MulticlassThreshold:
    """Per-word scores strictly below ``cutoff`` are ignored in input sums."""
    percentile: float
    cutoff: float

    @classmethod
    def from_table(cls, table: ScoreTable, percentile: float) -> 'MulticlassThreshold':
        if not 0 <= percentile < 100:
            raise ScoreError("percentile must lie in [0, 100)")
        positives = table.scores[table.scores > 0]
        cutoff = float(np.percentile(positives, percentile)) if positives.size else 0.0
        return cls(percentile=percentile, cutoff=cutoff)


class WordScoreService:
    """Service class for word scores and boundary prediction."""

    @staticmethod
    def word_score(probs: Union[ClassDistribution, Sequence[float], np.ndarray]) -> ScoreVector:
        """
        Score vector of one class distribution.

        The argmax class o gets p_o - p_o' (binary) or p_o minus the mean of
        the other classes; every other entry is 0. An exact tie for the
        maximum gives an all-zero vector.
        """
        p = np.asarray(probs.probabilities if isinstance(probs, ClassDistribution) else probs,
                       dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ScoreError("A distribution needs at least two classes")
        if np.any(p < -SIMPLEX_TOLERANCE) or abs(p.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ScoreError("Input is not a probability distribution")

        n = p.size
        top = p.max()
        scores = np.zeros(n)
        if np.count_nonzero(p == top) > 1:
            return ScoreVector(scores=scores)

        o = int(np.argmax(p))
        others = np.delete(p, o).mean()
        scores[o] = min(top - others, 1.0)
        return ScoreVector(scores=scores)

    @staticmethod
    def build_score_table(victim: VictimModel, words: Iterable[str]) -> ScoreTable:
        """
        Query the victim once per distinct word (as a one-word input).

        A BudgetExceeded raised mid-way propagates and no table is returned.
        """
        unique = list(dict.fromkeys(words))
        used_before = victim.budget.used
        distributions = VictimService.query_many(victim, unique)
        matrix = np.array([WordScoreService.word_score(d).scores for d in distributions])
        table = ScoreTable(
            words=tuple(unique),
            scores=matrix.reshape(len(unique), victim.n_classes),
            source=ScoreSource.VICTIM_QUERIES,
        )
        logger.info(
            f"Built score table for {len(table)} words",
            extra={'words': len(table), 'queries': victim.budget.used - used_before,
                   'event_type': 'score_table_built'}
        )
        return table

    @staticmethod
    def input_score(tokens: Union[TokenSeq, Sequence[str]], table: ScoreTable,
                    threshold: Optional[MulticlassThreshold] = None) -> InputScore:
        """Sum of the tokens' score vectors (OOV tokens add 0)."""
        if table.n_classes > 2 and threshold is None:
            raise ScoreError("Multi-class tables need a threshold")

        positions = [table.index[token] for token in tokens if token in table.index]
        if not positions:
            return InputScore(sums=np.zeros(table.n_classes))
        rows = table.scores[positions]
        if threshold is not None:
            rows = np.where(rows < threshold.cutoff, 0.0, rows)
        return InputScore(sums=rows.sum(axis=0))

    @staticmethod
    def predict_class(k_i: InputScore, ratios: Optional[ClassWordRatios] = None,
                      skew_corrected: bool = True) -> int:
        """argmax_j K_I[j] / t_j (uncorrected argmax when a ratio is 0); ties go to the lower index."""
        sums = np.asarray(k_i.sums, dtype=np.float64)
        if skew_corrected and ratios is not None:
            if np.all(ratios.t > 0):
                return int(np.argmax(sums / ratios.t))
            logger.warning(
                "Class word ratio of 0, falling back to uncorrected prediction",
                extra={'ratios': ratios.t.tolist(), 'event_type': 'skew_correction_skipped'}
            )
        return int(np.argmax(sums))

    @staticmethod
    def class_word_ratios(table: ScoreTable) -> ClassWordRatios:
        """Fraction of nonzero-scored words whose positive entry is each class."""
        classes = table.argmax_classes()
        scored = classes[classes >= 0]
        if scored.size == 0:
            raise ScoreError("Score table has no nonzero word")
        t = np.bincount(scored, minlength=table.n_classes) / scored.size
        r_w = None
        if table.n_classes == 2:
            r_w = float(t[1] / t[0]) if t[0] > 0 else float('inf')
        return ClassWordRatios(t=t, r_w=r_w)

    @staticmethod
    def save_score_table(table: ScoreTable, path: Path) -> None:
        """CSV ``word,score_class0,...,score_classN-1``."""
        frame = pd.DataFrame(
            table.scores, columns=[f'score_class{j}' for j in range(table.n_classes)]
        )
        frame.insert(0, 'word', list(table.words))
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)

    @staticmethod
    def load_score_table(path: Path, source: str = ScoreSource.VICTIM_QUERIES) -> ScoreTable:
        path = Path(path)
        if not path.exists():
            raise ScoreError(f"Score table not found: {path}")
        frame = pd.read_csv(
            path,
            dtype={'word': str},
            keep_default_na=False,
            float_precision='round_trip',
        )
        columns = [c for c in frame.columns if c.startswith('score_class')]
        if 'word' not in frame.columns or len(columns) < 2:
            raise ScoreError(f"{path} is not a score table")
        columns.sort(key=lambda name: int(name[len('score_class'):]))
        return ScoreTable(
            words=tuple(frame['word']),
            scores=frame[columns].to_numpy(dtype=np.float64),
            source=source,
        )
