"""
Embedding service for the attack toolkit.
Loads public word-vector tables and answers exact nearest-neighbor queries.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingError(Exception):
    """Base exception for embedding service errors."""
    pass


class EmbeddingParseError(EmbeddingError):
    """Raised when an embedding file line cannot be parsed."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"Line {line_number}: {reason}")


class OutOfVocabularyError(EmbeddingError):
    """Raised when a word is absent from the table."""

    def __init__(self, word: str):
        self.word = word
        super().__init__(f"Word '{word}' is not in the embedding table")


@dataclass(frozen=True)
class EmbeddingTable:
    """
    Immutable word -> vector table (the public teacher).

    Vectors are stored row-wise in ``vectors``; ``norms`` caches the
    Euclidean norm of every row.
    """
    dim: int
    words: Tuple[str, ...]
    vectors: np.ndarray
    norms: np.ndarray
    index: Dict[str, int] = field(repr=False, compare=False)

    @classmethod
    def from_rows(cls, words: Sequence[str], vectors: np.ndarray) -> 'EmbeddingTable':
        """Build a table from parallel word/vector rows (words must already be unique)."""
        matrix = np.array(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise EmbeddingError("Vectors must be a (words x dim) matrix")
        if matrix.shape[0] == 0:
            raise EmbeddingError("Embedding table cannot be empty")
        if not np.all(np.isfinite(matrix)):
            raise EmbeddingError("Embedding vectors must be finite")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0):
            zero_word = words[int(np.argmin(norms))]
            raise EmbeddingError(f"Zero-norm vector for '{zero_word}'")
        matrix.setflags(write=False)
        norms.setflags(write=False)
        return cls(
            dim=int(matrix.shape[1]),
            words=tuple(words),
            vectors=matrix,
            norms=norms,
            index={word: i for i, word in enumerate(words)},
        )

    @classmethod
    def from_mapping(cls, entries: Mapping[str, Iterable[float]]) -> 'EmbeddingTable':
        """Build a table from a word -> vector mapping (words lowercased, first wins)."""
        words: List[str] = []
        rows: List[List[float]] = []
        seen = set()
        for word, vector in entries.items():
            key = word.lower()
            if key in seen:
                continue
            seen.add(key)
            words.append(key)
            rows.append([float(x) for x in vector])
        return cls.from_rows(words, np.array(rows, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return isinstance(word, str) and word.lower() in self.index

    def vector(self, word: str) -> np.ndarray:
        """Return the vector for ``word`` or raise OutOfVocabularyError."""
        try:
            return self.vectors[self.index[word.lower()]]
        except KeyError:
            raise OutOfVocabularyError(word)

    def norm(self, word: str) -> float:
        try:
            return float(self.norms[self.index[word.lower()]])
        except KeyError:
            raise OutOfVocabularyError(word)

    def with_rows(self, updates: Mapping[str, np.ndarray]) -> 'EmbeddingTable':
        """Return a copy whose rows for ``updates`` are replaced (private fine-tuned copy)."""
        matrix = np.array(self.vectors, dtype=np.float64)
        for word, row in updates.items():
            matrix[self.index[word]] = row
        return EmbeddingTable.from_rows(self.words, matrix)


@dataclass(frozen=True)
class NeighborList:
    """Ordered cosine neighbors of ``query`` (query excluded)."""
    query: str
    neighbors: Tuple[Tuple[str, float], ...]

    @property
    def words(self) -> List[str]:
        return [word for word, _ in self.neighbors]

    def __len__(self) -> int:
        return len(self.neighbors)


class EmbeddingService:
    """Service class for teacher embedding tables."""

    @staticmethod
    def load_embeddings(path: Path, expected_dim: Optional[int] = None) -> EmbeddingTable:
        """
        Load a whitespace-separated word-vector file.

        Args:
            path: UTF-8 text file, one ``word c1 ... cd`` entry per line
            expected_dim: Required dimensionality; inferred from the first line if absent

        Returns:
            Loaded EmbeddingTable
        """
        path = Path(path)
        if not path.exists():
            raise EmbeddingError(f"Embedding file not found: {path}")

        words: List[str] = []
        rows: List[List[float]] = []
        seen = set()
        dim = expected_dim
        duplicates = 0

        with path.open(encoding='utf-8') as handle:
            for line_number, line in enumerate(handle, 1):
                parts = line.split()
                if not parts:
                    continue
                word, components = parts[0].lower(), parts[1:]
                if dim is None:
                    dim = len(components)
                    if dim == 0:
                        raise EmbeddingParseError(line_number, "no vector components")
                if len(components) != dim:
                    raise EmbeddingParseError(
                        line_number,
                        f"expected {dim} components, found {len(components)}"
                    )
                try:
                    vector = [float(value) for value in components]
                except ValueError:
                    raise EmbeddingParseError(line_number, "non-numeric component")
                if not all(math.isfinite(value) for value in vector):
                    raise EmbeddingParseError(line_number, "non-finite component")
                if not any(value != 0.0 for value in vector):
                    raise EmbeddingParseError(line_number, f"zero-norm vector for '{word}'")
                if word in seen:
                    duplicates += 1
                    continue
                seen.add(word)
                words.append(word)
                rows.append(vector)

        if not words:
            raise EmbeddingError(f"Embedding file is empty: {path}")

        if duplicates:
            logger.warning(
                f"Skipped {duplicates} duplicate words while loading {path.name}",
                extra={'duplicates': duplicates, 'event_type': 'embedding_duplicates'}
            )

        table = EmbeddingTable.from_rows(words, np.array(rows, dtype=np.float64))
        logger.info(
            f"Loaded {len(table)} embeddings of dimension {table.dim}",
            extra={'path': str(path), 'vocabulary': len(table), 'dim': table.dim,
                   'event_type': 'embeddings_loaded'}
        )
        return table

    @staticmethod
    def dump_embeddings(table: EmbeddingTable, path: Path) -> None:
        """Write ``table`` in the standard text format with 6 significant digits."""
        with Path(path).open('w', encoding='utf-8') as handle:
            for word, row in zip(table.words, table.vectors):
                handle.write(word + ' ' + ' '.join(f"{value:.6g}" for value in row) + '\n')

    @staticmethod
    def cosine_similarity(table: EmbeddingTable, word_a: str, word_b: str) -> float:
        """Cosine similarity between two in-vocabulary words."""
        a, b = table.vector(word_a), table.vector(word_b)
        value = float(np.dot(a, b) / (table.norm(word_a) * table.norm(word_b)))
        return min(1.0, max(-1.0, value))

    @staticmethod
    def nearest_neighbors(table: EmbeddingTable, word: str, k: int) -> NeighborList:
        """
        Exact cosine nearest neighbors of ``word``.

        Ties are broken by lexicographic word order; the query is excluded and
        k at or above the vocabulary size returns every other word.
        """
        if k <= 0:
            raise EmbeddingError("k must be a positive integer")
        query = word.lower()
        if query not in table.index:
            raise OutOfVocabularyError(word)

        position = table.index[query]
        similarities = table.vectors @ table.vectors[position]
        similarities = np.clip(similarities / (table.norms * table.norms[position]), -1.0, 1.0)

        candidates = np.delete(np.arange(len(table)), position)
        words = np.asarray(table.words)[candidates]
        sims = similarities[candidates]
        # lexsort: last key is primary
        order = np.lexsort((words, -sims))[:k]

        return NeighborList(
            query=query,
            neighbors=tuple((words[i], float(sims[i])) for i in order),
        )
