"""
Unit tests for word scores, input score sums and boundary prediction.
"""
import numpy as np
import pytest

from apps.victims.services.victim_service import BudgetExceeded, ClassDistribution
from apps.wordscore.models import ScoreSource
from apps.wordscore.services.score_service import (
    ClassWordRatios,
    InputScore,
    MulticlassThreshold,
    ScoreError,
    ScoreTable,
    WordScoreService,
)
from tests.conftest import with_budget

pytestmark = [pytest.mark.unit, pytest.mark.wordscore]


def table_of(rows, source=ScoreSource.VICTIM_QUERIES):
    return ScoreTable(words=tuple(rows), scores=np.array(list(rows.values())), source=source)


class TestWordScore:
    """Test WordScoreService.word_score."""

    def test_binary_score(self):
        """Test that the argmax class gets p_o - p_o'."""
        score = WordScoreService.word_score([0.2, 0.8])

        np.testing.assert_allclose(score.scores, [0.0, 0.6])
        assert score.argmax_class == 1

    def test_multiclass_score_uses_mean_of_others(self):
        """Test the multi-class rule p_o minus the mean of the other classes."""
        score = WordScoreService.word_score([0.5, 0.3, 0.2])

        np.testing.assert_allclose(score.scores, [0.25, 0.0, 0.0])

    def test_accepts_class_distribution(self):
        """Test scoring a ClassDistribution directly."""
        score = WordScoreService.word_score(ClassDistribution(probabilities=np.array([0.9, 0.1])))

        assert score[0] == pytest.approx(0.8)

    @pytest.mark.parametrize('probs', [[0.5, 0.5], [0.4, 0.4, 0.2], [0.25, 0.25, 0.25, 0.25]])
    def test_tie_gives_zero_vector(self, probs):
        """Test that a tied maximum scores all zeros."""
        score = WordScoreService.word_score(probs)

        assert score.is_zero
        assert score.argmax_class is None

    @pytest.mark.parametrize('probs', [[0.7, 0.7], [1.2, -0.2], [1.0], [[0.5, 0.5]]])
    def test_rejects_non_distributions(self, probs):
        """Test that invalid inputs are refused."""
        with pytest.raises(ScoreError):
            WordScoreService.word_score(probs)

    def test_invariants_over_random_inputs(self, rng):
        """Test sparsity, bounds and the tie rule on 10,000 random distributions."""
        for i in range(10_000):
            n_classes = int(rng.integers(2, 6))
            p = rng.dirichlet(np.ones(n_classes))
            tied = i % 10 == 0
            if tied:
                top = int(np.argmax(p))
                other = (top + 1) % n_classes
                p[other] = p[top]
                p = p / p.sum()

            scores = WordScoreService.word_score(p).scores

            if tied:
                assert not np.any(scores)
                continue
            assert np.count_nonzero(scores) == 1
            assert int(np.argmax(scores)) == int(np.argmax(p))
            assert 0.0 < scores.max() <= 1.0
            if n_classes == 2:
                assert scores.sum() == pytest.approx(abs(p[1] - p[0]))


class TestInputScore:
    """Test input score sums and class prediction."""

    def test_sum_skips_unknown_tokens(self):
        """Test that OOV tokens add nothing."""
        table = table_of({'good': [0.0, 0.5], 'bad': [0.3, 0.0]})

        k_i = WordScoreService.input_score(['good', 'bad', 'good', 'other'], table)

        np.testing.assert_allclose(k_i.sums, [0.3, 1.0])

    def test_empty_input(self):
        """Test that an input without scored tokens sums to zero."""
        table = table_of({'good': [0.0, 0.5], 'bad': [0.3, 0.0]})

        k_i = WordScoreService.input_score([], table)

        np.testing.assert_array_equal(k_i.sums, [0.0, 0.0])
        assert WordScoreService.predict_class(k_i) == 0

    def test_additive_over_concatenation(self, rng):
        """Test that the sum of a concatenation is the sum of the parts."""
        words = [f"w{i}" for i in range(30)]
        table = ScoreTable(words=tuple(words), scores=rng.random((30, 2)))

        for _ in range(1000):
            first = list(rng.choice(words, size=int(rng.integers(0, 15))))
            second = list(rng.choice(words, size=int(rng.integers(0, 15))))

            whole = WordScoreService.input_score(first + second, table)
            parts = WordScoreService.input_score(first, table) + WordScoreService.input_score(second, table)

            np.testing.assert_allclose(whole.sums, parts.sums, rtol=1e-12, atol=1e-12)

    def test_prediction_invariant_to_scale(self, rng):
        """Test that scaling every score leaves the predicted class unchanged."""
        words = [f"w{i}" for i in range(50)]
        scores = np.zeros((50, 2))
        scores[np.arange(50), rng.integers(2, size=50)] = rng.random(50)
        table = ScoreTable(words=tuple(words), scores=scores)
        ratios = WordScoreService.class_word_ratios(table)

        for _ in range(1000):
            tokens = list(rng.choice(words, size=10))
            expected = WordScoreService.predict_class(WordScoreService.input_score(tokens, table), ratios)
            for factor in (0.01, 3.0, 250.0):
                scaled = table.scaled(factor)
                assert WordScoreService.predict_class(
                    WordScoreService.input_score(tokens, scaled),
                    WordScoreService.class_word_ratios(scaled),
                ) == expected

    def test_tie_goes_to_lower_index(self):
        """Test that equal sums predict the lower class."""
        assert WordScoreService.predict_class(InputScore(sums=np.array([0.4, 0.4]))) == 0

    def test_skew_correction_changes_decision(self):
        """Test that dividing by class word ratios can flip the prediction."""
        k_i = InputScore(sums=np.array([0.6, 0.4]))
        ratios = ClassWordRatios(t=np.array([0.8, 0.2]), r_w=0.25)

        assert WordScoreService.predict_class(k_i, ratios, skew_corrected=True) == 1
        assert WordScoreService.predict_class(k_i, ratios, skew_corrected=False) == 0

    def test_zero_ratio_falls_back(self):
        """Test that a zero class ratio disables the correction."""
        k_i = InputScore(sums=np.array([0.6, 0.4]))
        ratios = ClassWordRatios(t=np.array([1.0, 0.0]), r_w=0.0)

        assert WordScoreService.predict_class(k_i, ratios) == 0

    def test_multiclass_needs_threshold(self):
        """Test that a three-class table refuses unthresholded sums."""
        table = table_of({'a': [0.5, 0.0, 0.0], 'b': [0.0, 0.1, 0.0], 'c': [0.0, 0.0, 0.9]})

        with pytest.raises(ScoreError):
            WordScoreService.input_score(['a'], table)

    def test_multiclass_threshold_drops_small_scores(self):
        """Test that scores below the percentile cutoff are ignored."""
        table = table_of({'a': [0.5, 0.0, 0.0], 'b': [0.0, 0.1, 0.0], 'c': [0.0, 0.0, 0.9]})
        threshold = MulticlassThreshold.from_table(table, 50)

        k_i = WordScoreService.input_score(['a', 'b', 'c'], table, threshold)

        assert threshold.cutoff == pytest.approx(0.5)
        np.testing.assert_allclose(k_i.sums, [0.5, 0.0, 0.9])

    def test_threshold_percentile_range(self):
        """Test that the percentile must lie in [0, 100)."""
        table = table_of({'a': [0.5, 0.0, 0.0]})

        with pytest.raises(ScoreError):
            MulticlassThreshold.from_table(table, 100)


class TestClassWordRatios:
    """Test class word ratios."""

    def test_binary_ratios(self):
        """Test t_j and r_w on a binary table, zero rows excluded."""
        table = table_of({
            'a': [0.2, 0.0], 'b': [0.1, 0.0], 'c': [0.3, 0.0],
            'd': [0.0, 0.4], 'e': [0.0, 0.0],
        })

        ratios = WordScoreService.class_word_ratios(table)

        np.testing.assert_allclose(ratios.t, [0.75, 0.25])
        assert ratios.r_w == pytest.approx(1 / 3)

    def test_all_zero_table(self):
        """Test that a table without scored words is refused."""
        with pytest.raises(ScoreError):
            WordScoreService.class_word_ratios(table_of({'a': [0.0, 0.0]}))


class TestScoreTable:
    """Test score table construction and persistence."""

    def test_build_charges_one_query_per_distinct_word(self, fe_victim, word_world):
        """Test one query per distinct word."""
        victim = with_budget(fe_victim)
        words = list(word_world.teacher.words[:10])

        table = WordScoreService.build_score_table(victim, words + words[:3])

        assert len(table) == 10
        assert victim.budget.used == 10
        assert table.source == ScoreSource.VICTIM_QUERIES

    def test_build_respects_budget(self, fe_victim, word_world):
        """Test that an insufficient budget aborts the table."""
        victim = with_budget(fe_victim, limit=5)

        with pytest.raises(BudgetExceeded):
            WordScoreService.build_score_table(victim, list(word_world.teacher.words[:10]))

    def test_class_leaning_words_score_their_class(self, fe_victim, word_world):
        """Test that the trained victim scores strongly leaning words toward their class."""
        victim = with_budget(fe_victim)
        cluster = word_world.clusters[0]
        words = [cluster.members[0][-1], cluster.members[1][-1]]

        table = WordScoreService.build_score_table(victim, words)

        assert table.score(words[0]).argmax_class == 0
        assert table.score(words[1]).argmax_class == 1

    def test_oov_word_scores_zero(self):
        """Test that unknown words have a zero score."""
        table = table_of({'a': [0.2, 0.0]})

        assert table.score('missing').is_zero

    def test_save_then_load_is_exact(self, rng, tmp_path):
        """Test that CSV persistence keeps every float exactly."""
        words = tuple(f"w{i}" for i in range(25))
        table = ScoreTable(words=words, scores=rng.random((25, 3)))
        path = tmp_path / 'out' / 'scores.csv'

        WordScoreService.save_score_table(table, path)
        loaded = WordScoreService.load_score_table(path)

        assert loaded.words == words
        np.testing.assert_array_equal(loaded.scores, table.scores)
        assert path.read_text().splitlines()[0] == 'word,score_class0,score_class1,score_class2'

    def test_load_rejects_other_csv(self, tmp_path):
        """Test that a CSV without score columns is refused."""
        path = tmp_path / 'data.csv'
        path.write_text('text,label\na,b\n', encoding='utf-8')

        with pytest.raises(ScoreError):
            WordScoreService.load_score_table(path)
        with pytest.raises(ScoreError):
            WordScoreService.load_score_table(tmp_path / 'absent.csv')
