"""
Independent checker for word-substitution results.
Recomputes every constraint from the public table and lexicon instead of
trusting the generator's bookkeeping.
"""
from typing import List

from apps.attacks.services.word_attack_service import AdvResult, AttackConfig, WordAttackService
from apps.embeddings.services.embedding_service import EmbeddingService, EmbeddingTable
from apps.textproc.services.lexicon_service import PosLexicon
from apps.textproc.services.text_service import TextService


class ValidationService:
    """Service class for adversarial result validation."""

    @staticmethod
    def validate_result(result: AdvResult, cfg: AttackConfig, teacher: EmbeddingTable,
                        lexicon: PosLexicon) -> List[str]:
        """Violations found in ``result``; an empty list means it is sound."""
        violations: List[str] = []
        original = TextService.tokenize(result.original).tokens
        n_tokens = len(original)

        positions = [position for position, _, _ in result.replacements]
        if len(set(positions)) != len(positions):
            violations.append("a token position was replaced more than once")

        expected_t = len(result.replacements) / n_tokens if n_tokens else 0.0
        if abs(result.t - expected_t) > 1e-12:
            violations.append(f"t={result.t} does not match {len(result.replacements)}/{n_tokens}")
        if expected_t > cfg.th + 1e-9:
            violations.append(f"t={expected_t:.4f} exceeds th={cfg.th}")

        rebuilt = list(original)
        for position, old, new in result.replacements:
            if not 0 <= position < n_tokens:
                violations.append(f"position {position} outside the original text")
                continue
            if original[position] != old:
                violations.append(f"position {position} holds '{original[position]}', not '{old}'")
            if not WordAttackService.check_constraints(lexicon, old, new):
                violations.append(f"'{old}' -> '{new}' breaks the part-of-speech constraint")
            if old not in teacher.index:
                violations.append(f"'{old}' is not in the embedding table")
            elif new not in EmbeddingService.nearest_neighbors(teacher, old, cfg.g_w).words:
                violations.append(f"'{new}' is not among the {cfg.g_w} nearest neighbors of '{old}'")
            rebuilt[position] = new

        if list(TextService.tokenize(result.perturbed).tokens) != rebuilt:
            violations.append("perturbed text does not match the listed replacements")
        return violations

    @staticmethod
    def is_valid(result: AdvResult, cfg: AttackConfig, teacher: EmbeddingTable,
                 lexicon: PosLexicon) -> bool:
        return not ValidationService.validate_result(result, cfg, teacher, lexicon)
