"""
Unit tests for the word-substitution attack, its validator and the sentence attacks.
"""
import numpy as np
import pytest

from apps.attacks.services.sentence_attack_service import SentenceAnchor, SentenceAttackService
from apps.attacks.services.validation_service import ValidationService
from apps.attacks.services.word_attack_service import (
    AdvResult,
    AttackConfig,
    AttackError,
    WordAttackService,
)
from apps.embeddings.services.embedding_service import EmbeddingTable
from apps.shadow.services.shadow_service import ShadowModel
from apps.textproc.services.lexicon_service import PosLexicon
from apps.textproc.services.text_service import TextService
from apps.victims.services.victim_service import BudgetExceeded
from tests.conftest import with_budget

pytestmark = [pytest.mark.unit, pytest.mark.attacks]

HIDDEN = 4


@pytest.fixture
def story_table():
    """Words of a 'lie' family, a 'cat' family and one function word."""
    return EmbeddingTable.from_mapping({
        'lie': [1.0, 0.0, 0.0, 0.0],
        'lying': [1.0, 0.0, 0.0, 0.05],
        'truth': [1.0, 0.0, 0.0, 0.2],
        'fib': [1.0, 0.0, 0.0, 0.3],
        'cat': [0.0, 1.0, 0.0, 0.0],
        'kitty': [0.0, 1.0, 0.0, 0.1],
        'the': [0.0, 0.2, 1.0, 0.0],
    })


@pytest.fixture
def story_lexicon():
    return PosLexicon.from_mapping({
        'lie': 'Noun', 'lying': 'Verb', 'truth': 'Noun', 'fib': 'Noun',
        'cat': 'Noun', 'kitty': 'Noun', 'the': 'Other',
    })


def cached_shadow(table, scores):
    """Shadow whose network outputs zero, so only cached words carry scores."""
    return ShadowModel(
        hidden_weights=np.zeros((HIDDEN, table.dim)),
        hidden_bias=np.zeros(HIDDEN),
        out_weights=np.zeros((2, HIDDEN)),
        out_bias=np.zeros(2),
        teacher=table,
        trained_on=len(scores),
        cache={word: np.array(value, dtype=np.float64) for word, value in scores.items()},
    )


@pytest.fixture
def story_shadow(story_table):
    return cached_shadow(story_table, {
        'lie': [0.0, 0.9],
        'the': [0.0, 0.5],
        'cat': [0.0, 0.2],
        'truth': [0.8, 0.0],
        'fib': [0.6, 0.0],
        'kitty': [0.1, 0.0],
    })


def config(g_w=2, th=1.0):
    return AttackConfig(g_w=g_w, th=th, target_class=0, source_class=1)


class TestAttackConfig:
    """Test AttackConfig validation."""

    @pytest.mark.parametrize('values', [
        {'g_w': 0, 'th': 0.5, 'target_class': 0, 'source_class': 1},
        {'g_w': 5, 'th': 1.5, 'target_class': 0, 'source_class': 1},
        {'g_w': 5, 'th': -0.1, 'target_class': 0, 'source_class': 1},
        {'g_w': 5, 'th': 0.5, 'target_class': 1, 'source_class': 1},
    ])
    def test_invalid(self, values):
        """Test out-of-range knobs and equal classes."""
        with pytest.raises(AttackError):
            AttackConfig(**values)


class TestReplacementWord:
    """Test constraint checks and candidate selection."""

    def test_constraints(self, story_lexicon):
        """Test that only same-tag open-class pairs pass."""
        assert WordAttackService.check_constraints(story_lexicon, 'lie', 'truth')
        assert not WordAttackService.check_constraints(story_lexicon, 'lie', 'lying')
        assert not WordAttackService.check_constraints(story_lexicon, 'the', 'the')
        assert not WordAttackService.check_constraints(story_lexicon, 'unknown', 'unknown')

    def test_best_target_scored_neighbor(self, story_table, story_lexicon, story_shadow):
        """Test that the highest target-scored same-tag neighbor wins."""
        assert WordAttackService.get_replacement_word(
            'lie', config(g_w=3), story_shadow, story_table, story_lexicon
        ) == 'truth'

    def test_pool_limited_to_g_w(self, story_table, story_lexicon, story_shadow):
        """Test that only the g_w nearest neighbors are considered."""
        assert WordAttackService.get_replacement_word(
            'lie', config(g_w=1), story_shadow, story_table, story_lexicon
        ) is None

    def test_out_of_vocabulary_word(self, story_table, story_lexicon, story_shadow):
        """Test that words outside the table have no replacement."""
        assert WordAttackService.get_replacement_word(
            'about', config(), story_shadow, story_table, story_lexicon
        ) is None

    def test_no_gain_no_replacement(self, story_table, story_lexicon):
        """Test that a word already scoring higher for the target is kept."""
        shadow = cached_shadow(story_table, {'cat': [0.3, 0.0], 'kitty': [0.1, 0.0]})

        assert WordAttackService.get_replacement_word(
            'cat', config(g_w=1), shadow, story_table, story_lexicon
        ) is None


class TestGenerateAdvExample:
    """Test WordAttackService.generate_adv_example."""

    TEXT = 'The lie about the cat.'

    def test_full_budget(self, story_table, story_lexicon, story_shadow):
        """Test that every replaceable type changes with th=1."""
        result = WordAttackService.generate_adv_example(
            self.TEXT, config(), story_shadow, story_table, story_lexicon
        )

        assert result.perturbed == 'The truth about the kitty.'
        assert result.replacements == [(1, 'lie', 'truth'), (4, 'cat', 'kitty')]
        assert result.t == pytest.approx(0.4)

    def test_budget_stops_after_highest_source_word(self, story_table, story_lexicon, story_shadow):
        """Test that th caps the replaced fraction, highest source score first."""
        result = WordAttackService.generate_adv_example(
            self.TEXT, config(th=0.2), story_shadow, story_table, story_lexicon
        )

        assert result.perturbed == 'The truth about the cat.'
        assert result.t == pytest.approx(0.2)

    def test_zero_budget(self, story_table, story_lexicon, story_shadow):
        """Test that th=0 leaves the text untouched."""
        result = WordAttackService.generate_adv_example(
            self.TEXT, config(th=0.0), story_shadow, story_table, story_lexicon
        )

        assert result.perturbed == self.TEXT
        assert result.replacements == []
        assert result.t == 0.0

    def test_repeated_word_changes_everywhere(self, story_table, story_lexicon, story_shadow):
        """Test that a replaced type changes at all of its positions."""
        text = 'The lie and the lie.'

        result = WordAttackService.generate_adv_example(
            text, config(th=0.4), story_shadow, story_table, story_lexicon
        )

        assert result.perturbed == 'The truth and the truth.'
        assert result.t == pytest.approx(0.4)

    def test_type_skipped_when_it_would_exceed_budget(self, story_table, story_lexicon, story_shadow):
        """Test that a type whose positions do not fit is skipped, not split."""
        text = 'The lie and the lie.'

        result = WordAttackService.generate_adv_example(
            text, config(th=0.2), story_shadow, story_table, story_lexicon
        )

        assert result.perturbed == text

    def test_empty_text(self, story_table, story_lexicon, story_shadow):
        """Test that a text without tokens comes back unchanged."""
        result = WordAttackService.generate_adv_example(
            '...', config(), story_shadow, story_table, story_lexicon
        )

        assert result.perturbed == '...'
        assert result.t == 0.0

    def test_to_dict(self, story_table, story_lexicon, story_shadow):
        """Test the JSON-ready record layout."""
        result = WordAttackService.generate_adv_example(
            self.TEXT, config(), story_shadow, story_table, story_lexicon
        )
        result.extra['violations'] = []

        record = result.to_dict()

        assert record['replacements'][0] == {'position': 1, 'old': 'lie', 'new': 'truth'}
        assert record['victim_flip'] is None
        assert record['violations'] == []

    def test_generation_never_queries_the_victim(self, word_world, word_shadow, fe_victim):
        """Test that generation leaves a zero-limit victim untouched."""
        victim = with_budget(fe_victim, limit=0)
        cfg = AttackConfig(g_w=10, th=0.5, target_class=0, source_class=1)

        for text in word_world.dataset.of_class(1).texts[:10]:
            WordAttackService.generate_adv_example(
                text, cfg, word_shadow, word_world.teacher, word_world.lexicon
            )

        assert victim.budget.used == 0
        with pytest.raises(BudgetExceeded):
            victim.budget.charge(1)


class TestValidation:
    """Test the independent result checker."""

    def test_generated_results_are_valid(self, story_table, story_lexicon, story_shadow):
        """Test that a generated result has no violation."""
        cfg = config()
        result = WordAttackService.generate_adv_example(
            'The lie about the cat.', cfg, story_shadow, story_table, story_lexicon
        )

        assert ValidationService.validate_result(result, cfg, story_table, story_lexicon) == []

    def test_word_world_results_are_valid(self, word_world, word_shadow):
        """Test soundness over many generated word-world results."""
        cfg = AttackConfig(g_w=10, th=0.5, target_class=0, source_class=1)

        for text in word_world.dataset.of_class(1).texts[:100]:
            result = WordAttackService.generate_adv_example(
                text, cfg, word_shadow, word_world.teacher, word_world.lexicon
            )
            assert ValidationService.is_valid(result, cfg, word_world.teacher, word_world.lexicon)
            assert result.t <= cfg.th

    def make(self, replacements, perturbed, t):
        return AdvResult(original='The lie about the cat.', perturbed=perturbed,
                         replacements=replacements, t=t, source_class=1, target_class=0)

    def test_detects_non_neighbor(self, story_table, story_lexicon):
        """Test that a replacement outside the g_w pool is flagged."""
        result = self.make([(1, 'lie', 'fib')], 'The fib about the cat.', 0.2)

        violations = ValidationService.validate_result(result, config(g_w=2), story_table, story_lexicon)

        assert any('nearest neighbors' in violation for violation in violations)

    def test_detects_tag_mismatch(self, story_table, story_lexicon):
        """Test that a cross-tag replacement is flagged."""
        result = self.make([(1, 'lie', 'lying')], 'The lying about the cat.', 0.2)

        violations = ValidationService.validate_result(result, config(), story_table, story_lexicon)

        assert any('part-of-speech' in violation for violation in violations)

    def test_detects_budget_and_t_mismatch(self, story_table, story_lexicon):
        """Test that t must match the replacements and stay within th."""
        result = self.make(
            [(1, 'lie', 'truth'), (4, 'cat', 'kitty')], 'The truth about the kitty.', 0.1
        )

        violations = ValidationService.validate_result(result, config(th=0.2), story_table, story_lexicon)

        assert any('does not match' in violation for violation in violations)
        assert any('exceeds' in violation for violation in violations)

    def test_detects_text_mismatch(self, story_table, story_lexicon):
        """Test that the perturbed text must follow the listed replacements."""
        result = self.make([(1, 'lie', 'truth')], 'The fib about the cat.', 0.2)

        assert not ValidationService.is_valid(result, config(), story_table, story_lexicon)

    def test_detects_duplicates_and_bad_positions(self, story_table, story_lexicon):
        """Test repeated and out-of-range positions."""
        result = self.make(
            [(1, 'lie', 'truth'), (1, 'lie', 'truth'), (9, 'cat', 'kitty')],
            'The truth about the cat.', 0.6,
        )

        violations = ValidationService.validate_result(result, config(), story_table, story_lexicon)

        assert any('more than once' in violation for violation in violations)
        assert any('outside' in violation for violation in violations)


class TestLengthAttack:
    """Test SentenceAttackService.length_attack."""

    def test_keeps_leading_sentences(self):
        """Test truncation to the first sentences."""
        text = 'One. Two! Three? Four.'

        assert SentenceAttackService.length_attack(text, 2) == 'One. Two!'

    def test_short_text_unchanged(self):
        """Test that texts within the limit are returned as-is."""
        assert SentenceAttackService.length_attack('Only  one.', 1) == 'Only  one.'

    def test_invalid_keep(self):
        """Test that keep_sentences must be positive."""
        with pytest.raises(AttackError):
            SentenceAttackService.length_attack('One. Two.', 0)


class TestSentenceAppend:
    """Test anchor selection and sentence appending."""

    def test_append_k_sentences(self, tiny_table):
        """Test appending with one dot product per sentence."""
        anchor = SentenceAnchor.from_text(tiny_table, 'North up. East. South.', 0, cap=8)

        text, products = SentenceAttackService.sentence_append_attack(
            'North.', anchor, 2, tiny_table, cap=8, length_cap=8
        )

        assert text == 'North. North up. East.'
        assert len(products) == 2
        assert TextService.sentence_count(text) == 3

    def test_k_zero_is_identity(self, tiny_table):
        """Test that k=0 changes nothing."""
        anchor = SentenceAnchor.from_text(tiny_table, 'North.', 0)

        assert SentenceAttackService.sentence_append_attack('East.', anchor, 0, tiny_table) == ('East.', [])

    def test_cap_limits_appending(self, tiny_table):
        """Test that the combined text never exceeds the sentence cap."""
        anchor = SentenceAnchor.from_text(tiny_table, 'North. Up. East. South.', 0, cap=3)

        text, products = SentenceAttackService.sentence_append_attack(
            'North. East.', anchor, 4, tiny_table, cap=3
        )

        assert TextService.sentence_count(text) == 3
        assert len(products) == 1

    def test_unterminated_text_is_closed_before_appending(self, tiny_table):
        """Test that an appended sentence never merges with an open last sentence."""
        anchor = SentenceAnchor.from_text(tiny_table, 'Up. East.', 0)

        text, products = SentenceAttackService.sentence_append_attack('North south', anchor, 2, tiny_table)

        assert text == 'North south. Up. East.'
        assert TextService.sentence_count(text) == 3
        assert len(products) == 2

    def test_append_cap_is_separate_from_length_cap(self, tiny_table):
        """Test that the sentence cap does not change the length normalization."""
        anchor = SentenceAnchor.from_text(tiny_table, 'North. Up. East.', 0, cap=32)

        capped, capped_products = SentenceAttackService.sentence_append_attack(
            'East.', anchor, 3, tiny_table, cap=2, length_cap=32
        )
        free, free_products = SentenceAttackService.sentence_append_attack(
            'East.', anchor, 3, tiny_table, cap=32, length_cap=32
        )

        assert TextService.sentence_count(capped) == 2
        assert TextService.sentence_count(free) == 4
        assert capped_products == free_products[:1]

    def test_invalid_arguments(self, tiny_table):
        """Test a negative k and an anchor without sentences."""
        anchor = SentenceAnchor.from_text(tiny_table, 'North.', 0)
        empty = SentenceAnchor(anchor_text='', anchor_embedding=np.zeros(3), anchor_class=0)

        with pytest.raises(AttackError):
            SentenceAttackService.sentence_append_attack('East.', anchor, -1, tiny_table)
        with pytest.raises(AttackError):
            SentenceAttackService.sentence_append_attack('East.', empty, 2, tiny_table)
        with pytest.raises(AttackError):
            SentenceAttackService.sentence_append_attack('East.', anchor, 1, tiny_table, cap=0)

    def test_select_anchor_prefers_confident_correct_sample(self, length_victim, length_world):
        """Test anchor choice and its query cost."""
        pool = length_world.dataset.subset(range(40))
        victim = with_budget(length_victim)

        anchor = SentenceAttackService.select_anchor(victim, pool, 1, length_world.teacher)

        assert victim.budget.used == 20
        assert anchor.anchor_class == 1
        assert anchor.anchor_text in pool.of_class(1).texts
        assert anchor.anchor_embedding.shape == (length_world.teacher.dim + 1,)
        confidences = [p.probabilities[1] for p in length_victim.predict_many(pool.of_class(1).texts)]
        assert length_victim.predict_proba(anchor.anchor_text).probabilities[1] == pytest.approx(
            max(confidences)
        )
