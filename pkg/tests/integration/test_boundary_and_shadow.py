"""
Integration tests: word scores predict the victim boundary, and shadow
models approach that prediction as the query budget grows.
"""
import pytest

from apps.core.services.synthetic_service import SyntheticService
from apps.evaluation.services.metrics_service import EvaluationService
from apps.shadow.services.shadow_service import ShadowService
from apps.victims.services.dataset_service import DatasetService
from apps.victims.services.victim_service import VictimConfig, VictimService
from apps.wordscore.services.score_service import MulticlassThreshold, WordScoreService
from tests.conftest import SEED, with_budget

pytestmark = [pytest.mark.integration]


@pytest.mark.wordscore
class TestBoundaryAgreement:
    """Exhaustive score tables against trained victims."""

    @pytest.mark.parametrize('victim_fixture', ['fe_victim', 'ft_victim'])
    def test_exhaustive_table_predicts_victim(self, request, victim_fixture, word_world, word_split):
        """Test avg_acc on held-out texts for frozen and fine-tuned victims."""
        victim = with_budget(request.getfixturevalue(victim_fixture))
        _, test = word_split
        table = WordScoreService.build_score_table(victim, word_world.teacher.words)

        report = EvaluationService.boundary_agreement(table, victim, test)

        assert report.avg_acc >= 0.8
        assert victim.budget.used == len(word_world.teacher) + len(test)

    def test_uncorrected_prediction_also_agrees(self, fe_victim, word_world, word_split):
        """Test that a balanced world needs no skew correction."""
        victim = with_budget(fe_victim)
        _, test = word_split
        table = WordScoreService.build_score_table(victim, word_world.teacher.words)

        report = EvaluationService.boundary_agreement(table, victim, test, skew_corrected=False)

        assert report.avg_acc >= 0.8

    def test_score_sum_crosses_with_victim(self, fe_victim, word_world, word_split):
        """Test that score-sum and victim curves cross zero within 3 steps of each other."""
        victim = with_budget(fe_victim)
        _, test = word_split
        table = WordScoreService.build_score_table(victim, word_world.teacher.words)
        texts = [
            text for text, label in test
            if label == 0 and fe_victim.predict_proba(text).argmax == 0
        ][:30]

        gaps = []
        for text in texts:
            curve = EvaluationService.flip_curve(text, victim, table, max_steps=20)
            victim_step = EvaluationService.crossing_step([point.log_prob_diff for point in curve])
            score_step = EvaluationService.crossing_step([point.score_diff for point in curve])
            if victim_step is not None and score_step is not None:
                gaps.append(abs(victim_step - score_step))

        assert len(gaps) >= 20
        assert max(gaps) <= 3

    def test_random_victim_is_a_weaker_baseline(self, random_word_victim, word_world, word_split):
        """Test that agreement is still computable for an untrained victim."""
        victim = with_budget(random_word_victim)
        _, test = word_split
        table = WordScoreService.build_score_table(victim, word_world.teacher.words)

        report = EvaluationService.boundary_agreement(table, victim, test)

        assert report.total == len(test)
        assert 0.0 <= report.avg_acc <= 1.0

    @pytest.mark.slow
    def test_multiclass_per_class_agreement(self):
        """Test thresholded per-class agreement on a three-class world."""
        world = SyntheticService.build_word_world(n_classes=3, seed=SEED, n_samples=900)
        train, test = DatasetService.split_dataset(world.dataset, 0.2, SEED)
        victim = VictimService.train_word_victim(train, world.teacher, VictimConfig(seed=SEED))
        table = WordScoreService.build_score_table(victim, world.teacher.words)
        threshold = MulticlassThreshold.from_table(table, 60)

        for class_index in range(3):
            sample = EvaluationService.per_class_sample(test, class_index, 30, 30, SEED)
            report = EvaluationService.boundary_agreement(
                table, victim, sample, threshold=threshold, positive_class=class_index
            )
            assert report.total == 60
            assert report.avg_acc >= 0.6


@pytest.mark.shadow
class TestShadowQueryBudget:
    """Shadow agreement as a function of the number of queries."""

    def test_agreement_grows_with_q(self, linear_oracle):
        """Test held-out agreement for q in 10, 100 and 1000."""
        truth = linear_oracle.score_table()
        agreements = {}
        for q in (10, 100, 1000):
            words = ShadowService.select_query_words(linear_oracle.frequencies, q)
            model = ShadowService.train_shadow(linear_oracle.pairs(words), linear_oracle.teacher, SEED)
            agreements[q] = ShadowService.shadow_agreement(model, truth)

        assert agreements[1000] >= 0.85
        assert agreements[1000] >= agreements[10] - 0.02
        assert agreements[100] >= agreements[10] - 0.05

    def test_victim_shadow_boundary(self, word_shadow, fe_victim, word_split):
        """Test that the shadow predicts the victim nearly as well as its own scores."""
        _, test = word_split

        report = EvaluationService.boundary_agreement(word_shadow, with_budget(fe_victim), test)

        assert report.avg_acc >= 0.8
