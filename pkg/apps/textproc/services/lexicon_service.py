"""
Lexicon service for the attack toolkit.
Single-tag part-of-speech lookup backed by a word<TAB>tag file.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Tuple

import pandas as pd

from apps.textproc.models import PosTag
from apps.textproc.services.text_service import TextProcessingError

logger = logging.getLogger(__name__)

DEFAULT_LEXICON_PATH = Path(__file__).resolve().parent.parent / 'data' / 'lexicon.tsv'

SOURCE_FORMATS = ('brill', 'tagged')
LEXICON_WORD = r"[a-z][a-z']*"


def penn_to_tag(penn: str) -> PosTag:
    """Collapse a Penn Treebank tag onto the lexicon tag set."""
    penn = penn.upper()
    if penn.startswith('NN'):
        return PosTag.NOUN
    if penn.startswith('VB'):
        return PosTag.VERB
    if penn.startswith('JJ'):
        return PosTag.ADJECTIVE
    if penn in ('RB', 'RBR', 'RBS'):
        return PosTag.ADVERB
    return PosTag.OTHER


@dataclass(frozen=True)
class PosLexicon:
    """Word -> tag map; every word has exactly one tag."""
    entries: Mapping[str, PosTag] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, entries: Mapping[str, str]) -> 'PosLexicon':
        tagged: Dict[str, PosTag] = {}
        for word, tag in entries.items():
            key = word.lower()
            if key in tagged:
                continue
            try:
                value = PosTag(tag)
            except ValueError:
                raise TextProcessingError(f"Unknown tag '{tag}' for '{word}'")
            if value == PosTag.UNKNOWN:
                raise TextProcessingError(f"Tag 'Unknown' cannot be stored for '{word}'")
            tagged[key] = value
        return cls(entries=tagged)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: object) -> bool:
        return isinstance(word, str) and word.lower() in self.entries


class LexiconService:
    """Service class for part-of-speech lookup."""

    @staticmethod
    def pos_tag(lexicon: PosLexicon, word: str) -> PosTag:
        """Lexicon tag of ``word``, or Unknown when absent."""
        return lexicon.entries.get(word.lower(), PosTag.UNKNOWN)

    @staticmethod
    def load_lexicon(path: Path) -> PosLexicon:
        """
        Load a ``word<TAB>tag`` file.

        Blank lines are ignored; the first tag of a repeated word wins.
        """
        path = Path(path)
        if not path.exists():
            raise TextProcessingError(f"Lexicon file not found: {path}")

        entries: Dict[str, PosTag] = {}
        repeated = 0
        with path.open(encoding='utf-8') as handle:
            for line_number, line in enumerate(handle, 1):
                line = line.rstrip('\n')
                if not line.strip():
                    continue
                parts = line.split('\t')
                if len(parts) != 2:
                    raise TextProcessingError(f"Line {line_number}: expected 'word<TAB>tag'")
                word, raw_tag = parts[0].strip().lower(), parts[1].strip()
                if raw_tag not in PosTag.lexicon_tags():
                    raise TextProcessingError(f"Line {line_number}: unknown tag '{raw_tag}'")
                if word in entries:
                    repeated += 1
                    continue
                entries[word] = PosTag(raw_tag)

        if repeated:
            logger.warning(
                f"Ignored {repeated} repeated lexicon entries in {path.name}",
                extra={'repeated': repeated, 'event_type': 'lexicon_duplicates'}
            )
        logger.debug(
            f"Loaded lexicon with {len(entries)} entries",
            extra={'path': str(path), 'entries': len(entries), 'event_type': 'lexicon_loaded'}
        )
        return PosLexicon(entries=entries)

    @staticmethod
    def dump_lexicon(lexicon: PosLexicon, path: Path) -> None:
        with Path(path).open('w', encoding='utf-8') as handle:
            for word, tag in lexicon.entries.items():
                handle.write(f"{word}\t{tag.value}\n")

    @staticmethod
    @lru_cache(maxsize=1)
    def default_lexicon() -> PosLexicon:
        """The bundled English lexicon (most frequent tag per word)."""
        return LexiconService.load_lexicon(DEFAULT_LEXICON_PATH)

    @staticmethod
    def derive_lexicon(path: Path, source_format: str = 'brill', min_count: int = 1) -> PosLexicon:
        """
        Reduce a Penn Treebank tagged resource to one tag per word.

        ``brill`` reads a lexicon with ``word TAG [TAG ...]`` lines, most
        likely tag first, as shipped with the Brill tagger and its
        descendants; a lower-case entry wins over capitalized variants.
        ``tagged`` reads running text of ``word/TAG`` tokens and keeps the
        most frequent collapsed tag of every word seen ``min_count`` times,
        ties going to the tag seen first.
        """
        path = Path(path)
        if not path.exists():
            raise TextProcessingError(f"Tagged source not found: {path}")
        if source_format not in SOURCE_FORMATS:
            raise TextProcessingError(
                f"Unknown source format '{source_format}'; expected one of {', '.join(SOURCE_FORMATS)}"
            )
        if min_count < 1:
            raise TextProcessingError("min_count must be at least 1")

        if source_format == 'brill':
            rows, skipped = LexiconService._read_brill(path)
        else:
            rows, skipped = LexiconService._read_tagged(path)

        frame = pd.DataFrame(rows, columns=['surface', 'penn'])
        if frame.empty:
            raise TextProcessingError(f"No tagged words in {path}")
        frame['word'] = frame['surface'].str.lower()
        frame['tag'] = frame['penn'].map(penn_to_tag)
        frame = frame[frame['word'].str.fullmatch(LEXICON_WORD)]

        if source_format == 'brill':
            frame = frame.assign(exact=frame['surface'] == frame['word'])
            frame = frame.sort_values('exact', ascending=False, kind='stable')
            chosen = frame.drop_duplicates('word')
        else:
            counts = frame.groupby(['word', 'tag'], sort=False).size().reset_index(name='count')
            totals = counts.groupby('word', sort=False)['count'].transform('sum')
            counts = counts[totals >= min_count]
            chosen = counts.sort_values('count', ascending=False, kind='stable').drop_duplicates('word')

        chosen = chosen.sort_values('word')
        lexicon = PosLexicon(entries=dict(zip(chosen['word'], chosen['tag'])))
        if not len(lexicon):
            raise TextProcessingError(f"No words of {path} passed the filters")

        logger.info(
            f"Derived lexicon with {len(lexicon)} entries from {path.name}",
            extra={'path': str(path), 'format': source_format, 'entries': len(lexicon),
                   'skipped': skipped, 'event_type': 'lexicon_derived'}
        )
        return lexicon

    @staticmethod
    def _read_brill(path: Path) -> Tuple[List[Tuple[str, str]], int]:
        rows, skipped = [], 0
        with path.open(encoding='utf-8') as handle:
            for line in handle:
                if not line.strip() or line.startswith(';;;'):
                    continue
                parts = line.split()
                if len(parts) < 2:
                    skipped += 1
                    continue
                rows.append((parts[0], parts[1]))
        return rows, skipped

    @staticmethod
    def _read_tagged(path: Path) -> Tuple[List[Tuple[str, str]], int]:
        rows, skipped = [], 0
        with path.open(encoding='utf-8') as handle:
            for line in handle:
                for token in line.split():
                    surface, slash, penn = token.rpartition('/')
                    if not slash or not surface or not penn:
                        skipped += 1
                        continue
                    rows.append((surface, penn))
        return rows, skipped
