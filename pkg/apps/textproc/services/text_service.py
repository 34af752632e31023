"""
Text service for the attack toolkit.
Tokenization, sentence splitting and span-preserving token replacement.
"""
import re
from dataclasses import dataclass
from typing import List, Mapping, Tuple

TOKEN_PATTERN = re.compile(r"(?:[^\W\d_]|')+")
SENTENCE_BOUNDARY = re.compile(r'(?<=[.!?])\s+')


class TextProcessingError(Exception):
    """Base exception for text processing errors."""
    pass


@dataclass(frozen=True)
class TokenSeq:
    """Lowercased tokens with their (start, end) offsets in the source text."""
    tokens: Tuple[str, ...]
    spans: Tuple[Tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, position: int) -> str:
        return self.tokens[position]

    def positions_of(self, word: str) -> List[int]:
        """All positions holding ``word``."""
        return [i for i, token in enumerate(self.tokens) if token == word]

    def first_positions(self) -> dict:
        """Word type -> position of its first occurrence, in document order."""
        first: dict = {}
        for i, token in enumerate(self.tokens):
            first.setdefault(token, i)
        return first


class TextService:
    """Service class for tokenization and sentence handling."""

    @staticmethod
    def tokenize(text: str) -> TokenSeq:
        """
        Split ``text`` into maximal runs of letters and apostrophes.

        Everything else is a separator; tokens are lowercased.
        """
        matches = list(TOKEN_PATTERN.finditer(text or ''))
        return TokenSeq(
            tokens=tuple(match.group(0).lower() for match in matches),
            spans=tuple(match.span() for match in matches),
        )

    @staticmethod
    def split_sentences(text: str) -> List[str]:
        """Split after '.', '!' or '?' followed by whitespace or end of text."""
        fragments = SENTENCE_BOUNDARY.split(text or '')
        return [fragment.strip() for fragment in fragments if fragment.strip()]

    @staticmethod
    def join_sentences(sentences: List[str]) -> str:
        return ' '.join(sentences)

    @staticmethod
    def sentence_count(text: str) -> int:
        return len(TextService.split_sentences(text))

    @staticmethod
    def replace_tokens(text: str, seq: TokenSeq, replacements: Mapping[int, str]) -> str:
        """
        Rebuild ``text`` with the tokens at the given positions substituted.

        Characters outside the replaced spans are preserved verbatim.
        """
        if not replacements:
            return text
        for position in replacements:
            if position < 0 or position >= len(seq):
                raise TextProcessingError(f"Token position {position} out of range")

        pieces: List[str] = []
        cursor = 0
        for position in sorted(replacements):
            start, end = seq.spans[position]
            pieces.append(text[cursor:start])
            pieces.append(replacements[position])
            cursor = end
        pieces.append(text[cursor:])
        return ''.join(pieces)
