"""
Dataset service for the attack toolkit.
Labeled text corpora: CSV loading, splitting and vocabulary counts.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from apps.textproc.services.text_service import TextService

logger = logging.getLogger(__name__)


class DatasetError(Exception):
    """Raised for malformed or unusable datasets."""
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Non-empty list of (text, label index) pairs with ordered class names."""
    samples: Tuple[Tuple[str, int], ...]
    class_names: Tuple[str, ...]

    def __post_init__(self):
        if not self.samples:
            raise DatasetError("Dataset is empty")
        if len(self.class_names) < 2:
            raise DatasetError("A dataset needs at least two classes")
        for text, label in self.samples:
            if not 0 <= label < len(self.class_names):
                raise DatasetError(f"Label {label} outside {len(self.class_names)} classes")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, int]], class_names: Sequence[str]) -> 'LabeledDataset':
        return cls(
            samples=tuple((str(text), int(label)) for text, label in pairs),
            class_names=tuple(class_names),
        )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def texts(self) -> List[str]:
        return [text for text, _ in self.samples]

    @property
    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.samples], dtype=np.int64)

    def class_counts(self) -> Dict[int, int]:
        counts = Counter(label for _, label in self.samples)
        return {c: counts.get(c, 0) for c in range(self.n_classes)}

    def subset(self, indices: Iterable[int]) -> 'LabeledDataset':
        return LabeledDataset(
            samples=tuple(self.samples[i] for i in indices),
            class_names=self.class_names,
        )

    def of_class(self, label: int) -> 'LabeledDataset':
        """Samples labeled ``label`` only."""
        return self.subset(i for i, (_, y) in enumerate(self.samples) if y == label)

    def merged_with(self, other: 'LabeledDataset') -> 'LabeledDataset':
        if other.class_names != self.class_names:
            raise DatasetError("Cannot merge datasets with different class names")
        return LabeledDataset(samples=self.samples + other.samples, class_names=self.class_names)


class DatasetService:
    """Service class for labeled corpora."""

    @staticmethod
    def load_dataset(path: Path, class_names: Optional[Sequence[str]] = None) -> LabeledDataset:
        """
        Load a CSV with header ``text,label``.

        Labels are class names; they are mapped to indices in the order of
        ``class_names`` or, when absent, in order of first appearance.
        """
        path = Path(path)
        if not path.exists():
            raise DatasetError(f"Dataset file not found: {path}")

        try:
            frame = pd.read_csv(path, dtype={'text': str, 'label': str}, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DatasetError(f"Cannot parse dataset {path}: {e}")

        missing = {'text', 'label'} - set(frame.columns)
        if missing:
            raise DatasetError(f"Dataset {path} lacks columns: {', '.join(sorted(missing))}")
        if frame.empty:
            raise DatasetError(f"Dataset is empty: {path}")

        names = list(class_names) if class_names else list(dict.fromkeys(frame['label']))
        index = {name: i for i, name in enumerate(names)}
        unknown = sorted(set(frame['label']) - set(index))
        if unknown:
            raise DatasetError(f"Labels not in class names: {', '.join(unknown)}")

        dataset = LabeledDataset.from_pairs(
            zip(frame['text'], (index[label] for label in frame['label'])),
            names,
        )
        logger.info(
            f"Loaded {len(dataset)} samples over {dataset.n_classes} classes",
            extra={'path': str(path), 'samples': len(dataset), 'classes': names,
                   'event_type': 'dataset_loaded'}
        )
        return dataset

    @staticmethod
    def save_dataset(dataset: LabeledDataset, path: Path) -> None:
        frame = pd.DataFrame({
            'text': dataset.texts,
            'label': [dataset.class_names[label] for label in dataset.labels],
        })
        frame.to_csv(path, index=False)

    @staticmethod
    def split_dataset(dataset: LabeledDataset, test_fraction: float, seed: int
                      ) -> Tuple[LabeledDataset, LabeledDataset]:
        """Seeded per-class split into (train, test)."""
        if not 0 < test_fraction < 1:
            raise DatasetError("test_fraction must lie in (0, 1)")

        rng = np.random.default_rng(seed)
        labels = dataset.labels
        train_idx: List[int] = []
        test_idx: List[int] = []
        for label in range(dataset.n_classes):
            members = np.flatnonzero(labels == label)
            if len(members) == 0:
                continue
            members = rng.permutation(members)
            n_test = int(round(len(members) * test_fraction))
            n_test = min(max(n_test, 1), len(members) - 1) if len(members) > 1 else 0
            test_idx.extend(members[:n_test].tolist())
            train_idx.extend(members[n_test:].tolist())

        if not test_idx:
            raise DatasetError("Dataset too small to split")
        return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))

    @staticmethod
    def word_frequencies(dataset: LabeledDataset) -> Counter:
        """Token frequency map over every sample."""
        counts: Counter = Counter()
        for text in dataset.texts:
            counts.update(TextService.tokenize(text).tokens)
        return counts

    @staticmethod
    def signed_labels(dataset: LabeledDataset) -> np.ndarray:
        """Binary labels mapped to -1 (class 0) and +1 (class 1)."""
        if dataset.n_classes != 2:
            raise DatasetError("Signed labels need a binary dataset")
        return np.where(dataset.labels == 1, 1.0, -1.0)
