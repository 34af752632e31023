"""
Pytest configuration and fixtures for attack toolkit tests.
"""
from dataclasses import replace

import numpy as np
import pytest

from apps.core.services.synthetic_service import SyntheticService
from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.shadow.services.shadow_service import ShadowService
from apps.textproc.services.lexicon_service import PosLexicon
from apps.victims.models import VictimKind, VictimMode
from apps.victims.services.dataset_service import DatasetService
from apps.victims.services.victim_service import QueryBudget, VictimConfig, VictimService

SEED = 13


def with_budget(victim, limit=None):
    """Same victim behind a fresh query counter."""
    return replace(victim, budget=QueryBudget(limit=limit))


@pytest.fixture(scope='session')
def word_world():
    """Separable two-class world of synonym clusters."""
    return SyntheticService.build_word_world(n_classes=2, seed=SEED, n_samples=2000)


@pytest.fixture(scope='session')
def word_split(word_world):
    """Seeded (train, test) split of the word world."""
    return DatasetService.split_dataset(word_world.dataset, 0.2, SEED)


@pytest.fixture(scope='session')
def fe_victim(word_world, word_split):
    """Feature-extractor word victim trained on the word world."""
    train, _ = word_split
    config = VictimConfig(mode=VictimMode.FEATURE_EXTRACTOR, seed=SEED)
    return VictimService.train_word_victim(train, word_world.teacher, config)


@pytest.fixture(scope='session')
def ft_victim(word_world, word_split):
    """Fine-tuned word victim trained on the word world."""
    train, _ = word_split
    config = VictimConfig(mode=VictimMode.FINE_TUNED, embedding_learning_rate=0.05, seed=SEED)
    return VictimService.train_word_victim(train, word_world.teacher, config)


@pytest.fixture(scope='session')
def word_shadow(word_world, word_split, fe_victim):
    """Shadow model trained on every corpus word the teacher knows."""
    train, _ = word_split
    teacher = word_world.teacher
    vocabulary = {
        word: count for word, count in DatasetService.word_frequencies(train).items()
        if word in teacher.index
    }
    words = ShadowService.select_query_words(vocabulary, len(vocabulary))
    pairs = ShadowService.collect_pairs(with_budget(fe_victim), words)
    return ShadowService.train_shadow(pairs, teacher, SEED, hidden_units=64, epochs=200)


@pytest.fixture(scope='session')
def length_world():
    """Two-class world whose only signal is the number of sentences."""
    return SyntheticService.build_length_world(seed=SEED, n_samples=2000)


@pytest.fixture(scope='session')
def length_victim(length_world):
    """Sentence victim with the length feature, trained close to its margin."""
    config = VictimConfig(
        mode=VictimMode.FEATURE_EXTRACTOR,
        length_feature=True,
        learning_rate=0.5,
        epochs=60,
        seed=SEED,
    )
    return VictimService.train_sentence_victim(length_world.dataset, length_world.teacher, config)


@pytest.fixture(scope='session')
def linear_oracle():
    """Random table with a linear score oracle and Zipf frequencies."""
    return SyntheticService.build_linear_oracle(seed=SEED, n_words=1500, dim=16)


@pytest.fixture
def tiny_table():
    """Five 2-d words with known cosine geometry."""
    return EmbeddingTable.from_mapping({
        'north': [0.0, 1.0],
        'up': [0.0, 2.0],
        'east': [1.0, 0.0],
        'northeast': [1.0, 1.0],
        'south': [0.0, -1.0],
    })


@pytest.fixture
def tiny_lexicon():
    return PosLexicon.from_mapping({
        'north': 'Noun',
        'up': 'Noun',
        'east': 'Noun',
        'northeast': 'Adjective',
        'south': 'Noun',
    })


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def random_word_victim(word_world):
    """Untrained word victim with a seeded random head."""
    return VictimService.random_victim(
        word_world.teacher, VictimConfig(seed=SEED), word_world.dataset.class_names,
        kind=VictimKind.WORD,
    )
