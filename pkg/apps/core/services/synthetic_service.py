"""
Synthetic worlds for the attack toolkit.

Small, fully controlled teachers and corpora with known structure:
- a word world of same-tag synonym clusters whose members lean toward a class,
- a length world whose only label signal is the number of sentences,
- a linear score oracle for shadow-model checks.
"""
import logging
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from apps.embeddings.services.embedding_service import EmbeddingService, EmbeddingTable
from apps.shadow.services.shadow_service import ScorePair
from apps.textproc.models import PosTag
from apps.textproc.services.lexicon_service import LexiconService, PosLexicon
from apps.victims.services.dataset_service import DatasetService, LabeledDataset
from apps.wordscore.models import ScoreSource
from apps.wordscore.services.score_service import ScoreTable, ScoreVector

logger = logging.getLogger(__name__)

FUNCTION_WORDS = ('the', 'a', 'of', 'and', 'to', 'in', 'is', 'that', 'it', 'for', 'on', 'with')
CLUSTER_TAGS = (PosTag.NOUN, PosTag.VERB, PosTag.ADJECTIVE, PosTag.ADVERB)
TAG_PREFIX = {
    PosTag.NOUN: 'noun',
    PosTag.VERB: 'verb',
    PosTag.ADJECTIVE: 'adj',
    PosTag.ADVERB: 'adv',
}
MEMBER_LEANS = (0.3, 0.6)
MEMBER_CODES = 'pqrstuvwxy'
RARE_LEAN = ('z', 1.0)


def letter_code(index: int, width: int) -> str:
    """Fixed-width base-26 code of ``index`` using lowercase letters."""
    letters = []
    for _ in range(width):
        index, remainder = divmod(index, 26)
        letters.append(string.ascii_lowercase[remainder])
    return ''.join(reversed(letters))


@dataclass(frozen=True)
class SynonymCluster:
    """Words sharing one tag; ``members[c]`` lean toward class c, ``rare[c]`` never occurs in the corpus."""
    tag: PosTag
    members: Dict[int, Tuple[str, ...]]
    rare: Dict[int, str]

    @property
    def words(self) -> List[str]:
        words = [word for group in self.members.values() for word in group]
        return words + list(self.rare.values())


@dataclass(frozen=True)
class WordWorld:
    teacher: EmbeddingTable
    lexicon: PosLexicon
    dataset: LabeledDataset
    clusters: Tuple[SynonymCluster, ...]
    function_words: Tuple[str, ...] = FUNCTION_WORDS


@dataclass(frozen=True)
class LengthWorld:
    teacher: EmbeddingTable
    lexicon: PosLexicon
    dataset: LabeledDataset


@dataclass(frozen=True)
class LinearOracle:
    """Binary score oracle s(e) = clip(scale * a.e, -1, 1) over a random table."""
    teacher: EmbeddingTable
    direction: np.ndarray
    scale: float
    frequencies: Dict[str, int] = field(repr=False)

    def raw(self, word: str) -> float:
        value = self.scale * float(self.teacher.vector(word) @ self.direction)
        return float(np.clip(value, -1.0, 1.0))

    def score(self, word: str) -> ScoreVector:
        value = self.raw(word)
        return ScoreVector(scores=np.array([max(-value, 0.0), max(value, 0.0)]))

    def pairs(self, words: Sequence[str]) -> List[ScorePair]:
        return [ScorePair(word=word, target=self.score(word)) for word in words]

    def score_table(self) -> ScoreTable:
        values = np.clip(self.scale * (self.teacher.vectors @ self.direction), -1.0, 1.0)
        scores = np.stack([np.maximum(-values, 0.0), np.maximum(values, 0.0)], axis=1)
        return ScoreTable(words=self.teacher.words, scores=scores, source=ScoreSource.VICTIM_QUERIES)


class SyntheticService:
    """Service class for synthetic fixture worlds."""

    @staticmethod
    def default_class_names(n_classes: int) -> Tuple[str, ...]:
        if n_classes == 2:
            return ('real', 'fake')
        return tuple(f"topic{letter_code(c, 1)}" for c in range(n_classes))

    @staticmethod
    def build_word_world(n_classes: int = 2, seed: int = 13, n_clusters: int = 40,
                         n_samples: int = 2000, noise: float = 0.02,
                         function_ratio: float = 0.3,
                         tokens_per_text: Tuple[int, int] = (8, 16),
                         member_leans: Sequence[float] = MEMBER_LEANS) -> WordWorld:
        """
        Separable corpus over synonym clusters.

        Every cluster sits on its own axis and has one tag; a member leaning
        toward class c adds a multiple of the class axis c. Texts of class c
        draw content words from class-c members of Zipf-weighted clusters.
        Each class gets one member per entry of ``member_leans`` plus a rare
        word; with leans close together a member's same-class siblings are
        all nearer than any word of the other classes.
        """
        if not 0 < len(member_leans) <= len(MEMBER_CODES):
            raise ValueError(f"member_leans must hold 1 to {len(MEMBER_CODES)} values")
        leans = tuple(zip(MEMBER_CODES, member_leans)) + (RARE_LEAN,)
        rng = np.random.default_rng(seed)
        dim = n_classes + n_clusters + len(FUNCTION_WORDS)
        words: List[str] = []
        rows: List[np.ndarray] = []
        tags: Dict[str, str] = {}
        clusters: List[SynonymCluster] = []

        def add(word: str, vector: np.ndarray, tag: PosTag) -> None:
            words.append(word)
            rows.append(vector + rng.normal(0.0, noise, size=dim))
            tags[word] = tag.value

        for k in range(n_clusters):
            tag = CLUSTER_TAGS[k % len(CLUSTER_TAGS)]
            code = letter_code(k, 2)
            center = np.zeros(dim)
            center[n_classes + k] = 1.0
            members: Dict[int, Tuple[str, ...]] = {}
            rare: Dict[int, str] = {}
            for c in range(n_classes):
                class_code = letter_code(c, 1)
                group = []
                for member_code, lean in leans:
                    vector = center.copy()
                    vector[c] += lean
                    word = f"{TAG_PREFIX[tag]}{code}{class_code}{member_code}"
                    add(word, vector, tag)
                    if member_code == RARE_LEAN[0]:
                        rare[c] = word
                    else:
                        group.append(word)
                members[c] = tuple(group)
            clusters.append(SynonymCluster(tag=tag, members=members, rare=rare))

        for i, word in enumerate(FUNCTION_WORDS):
            vector = np.zeros(dim)
            vector[n_classes + n_clusters + i] = 1.0
            add(word, vector, PosTag.OTHER)

        teacher = EmbeddingTable.from_rows(words, np.array(rows))
        lexicon = PosLexicon.from_mapping(tags)

        ranks = rng.permutation(n_clusters)
        weights = 1.0 / (ranks + 1.0)
        weights /= weights.sum()

        class_names = SyntheticService.default_class_names(n_classes)
        samples = []
        for i in range(n_samples):
            label = i % n_classes
            length = int(rng.integers(tokens_per_text[0], tokens_per_text[1] + 1))
            tokens = []
            for _ in range(length):
                if rng.random() < function_ratio:
                    tokens.append(FUNCTION_WORDS[int(rng.integers(len(FUNCTION_WORDS)))])
                else:
                    cluster = clusters[int(rng.choice(n_clusters, p=weights))]
                    group = cluster.members[label]
                    tokens.append(group[int(rng.integers(len(group)))])
            samples.append((' '.join(tokens).capitalize() + '.', label))

        dataset = LabeledDataset.from_pairs(samples, class_names)
        logger.info(
            f"Built word world with {len(teacher)} words and {len(dataset)} samples",
            extra={'vocabulary': len(teacher), 'samples': len(dataset), 'classes': n_classes,
                   'seed': seed, 'event_type': 'word_world_built'}
        )
        return WordWorld(teacher=teacher, lexicon=lexicon, dataset=dataset, clusters=tuple(clusters))

    @staticmethod
    def build_length_world(seed: int = 13, n_samples: int = 2000, vocab_size: int = 200,
                           dim: int = 16, noise: float = 0.2,
                           fake_sentences: Tuple[int, int] = (1, 3),
                           real_sentences: Tuple[int, int] = (16, 30),
                           words_per_sentence: Tuple[int, int] = (4, 8)) -> LengthWorld:
        """
        Corpus whose words carry no label signal.

        Class 0 ("fake") samples have few sentences, class 1 ("real") many;
        both draw words uniformly from one shared vocabulary.
        """
        rng = np.random.default_rng(seed)
        words = [f"lex{letter_code(i, 3)}" for i in range(vocab_size)]
        vectors = rng.normal(0.0, noise, size=(vocab_size, dim))
        vectors[:, 0] = 1.0
        teacher = EmbeddingTable.from_rows(words, vectors)
        lexicon = PosLexicon.from_mapping(
            {word: CLUSTER_TAGS[i % len(CLUSTER_TAGS)].value for i, word in enumerate(words)}
        )

        samples = []
        for i in range(n_samples):
            label = i % 2
            low, high = real_sentences if label == 1 else fake_sentences
            sentences = []
            for _ in range(int(rng.integers(low, high + 1))):
                size = int(rng.integers(words_per_sentence[0], words_per_sentence[1] + 1))
                picked = [words[int(j)] for j in rng.integers(vocab_size, size=size)]
                sentences.append(' '.join(picked).capitalize() + '.')
            samples.append((' '.join(sentences), label))

        dataset = LabeledDataset.from_pairs(samples, ('fake', 'real'))
        logger.info(
            f"Built length world with {len(dataset)} samples",
            extra={'vocabulary': vocab_size, 'samples': len(dataset), 'seed': seed,
                   'event_type': 'length_world_built'}
        )
        return LengthWorld(teacher=teacher, lexicon=lexicon, dataset=dataset)

    @staticmethod
    def build_linear_oracle(seed: int = 13, n_words: int = 1500, dim: int = 16,
                            scale: float = 0.5) -> LinearOracle:
        """Random table, a unit direction, and Zipf-like word frequencies."""
        rng = np.random.default_rng(seed)
        words = [f"ora{letter_code(i, 3)}" for i in range(n_words)]
        teacher = EmbeddingTable.from_rows(words, rng.normal(0.0, 1.0, size=(n_words, dim)))
        direction = rng.normal(0.0, 1.0, size=dim)
        direction /= np.linalg.norm(direction)
        ranks = rng.permutation(n_words)
        frequencies = {word: int(round(10000.0 / (rank + 1))) + 1 for word, rank in zip(words, ranks)}
        return LinearOracle(teacher=teacher, direction=direction, scale=scale, frequencies=frequencies)

    @staticmethod
    def write_world(world, directory: Path, prefix: str) -> Dict[str, Path]:
        """Write ``<prefix>_embeddings.txt``, ``<prefix>_lexicon.tsv`` and ``<prefix>_dataset.csv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            'embeddings': directory / f"{prefix}_embeddings.txt",
            'lexicon': directory / f"{prefix}_lexicon.tsv",
            'dataset': directory / f"{prefix}_dataset.csv",
        }
        EmbeddingService.dump_embeddings(world.teacher, paths['embeddings'])
        LexiconService.dump_lexicon(world.lexicon, paths['lexicon'])
        DatasetService.save_dataset(world.dataset, paths['dataset'])
        return paths
