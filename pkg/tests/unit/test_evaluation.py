"""
Unit tests for evaluation metrics, sweeps and report writers.
"""
import io
import json

import numpy as np
import pytest

from apps.attacks.services.sentence_attack_service import SentenceAnchor
from apps.attacks.services.word_attack_service import AdvResult
from apps.core.services.synthetic_service import SyntheticService
from apps.evaluation.services.metrics_service import (
    AgreementReport,
    EvaluationError,
    EvaluationService,
)
from apps.evaluation.services.report_service import ReportService
from apps.evaluation.services.sweep_service import SWEEP_COLUMNS, SweepService
from apps.evaluation.tasks import dispatch_sweep_grid, run_sweep_cell
from apps.shadow.services.shadow_service import ShadowService
from apps.textproc.services.text_service import TextService
from apps.victims.services.dataset_service import DatasetError, DatasetService, LabeledDataset
from apps.victims.services.victim_service import VictimConfig, VictimService
from apps.wordscore.services.score_service import MulticlassThreshold, WordScoreService
from tests.conftest import SEED, with_budget

pytestmark = [pytest.mark.unit, pytest.mark.evaluation]


@pytest.fixture(scope='module')
def exhaustive_table(fe_victim, word_world):
    """Victim score table over the whole teacher vocabulary."""
    return WordScoreService.build_score_table(with_budget(fe_victim), word_world.teacher.words)


class TestAgreementReport:
    """Test AgreementReport arithmetic."""

    def test_avg_acc(self):
        """Test accuracy from confusion counts."""
        report = AgreementReport(tp=3, tn=5, fp=1, fn=1)

        assert report.total == 10
        assert report.avg_acc == pytest.approx(0.8)
        assert report.to_dict()['avg_acc'] == pytest.approx(0.8)

    def test_empty_report(self):
        """Test that an empty report has zero accuracy."""
        assert AgreementReport(tp=0, tn=0, fp=0, fn=0).avg_acc == 0.0


class TestBoundaryAgreement:
    """Test EvaluationService.boundary_agreement."""

    def test_exhaustive_table_follows_victim(self, exhaustive_table, fe_victim, word_split):
        """Test that score sums over an exhaustive table match the victim."""
        _, test = word_split
        victim = with_budget(fe_victim)

        report = EvaluationService.boundary_agreement(exhaustive_table, victim, test)

        assert report.total == len(test)
        assert victim.budget.used == len(test)
        assert report.avg_acc >= 0.8

    def test_positive_class_moves_counts(self, exhaustive_table, fe_victim, word_split):
        """Test that swapping the positive class swaps tp/tn and fp/fn."""
        _, test = word_split

        first = EvaluationService.boundary_agreement(exhaustive_table, with_budget(fe_victim), test)
        second = EvaluationService.boundary_agreement(
            exhaustive_table, with_budget(fe_victim), test, positive_class=0
        )

        assert (first.tp, first.tn, first.fp, first.fn) == (second.tn, second.tp, second.fn, second.fp)

    def test_shadow_predictor(self, word_shadow, fe_victim, word_split):
        """Test that a shadow model can stand in for the score table."""
        _, test = word_split

        report = EvaluationService.boundary_agreement(word_shadow, with_budget(fe_victim), test)

        assert report.avg_acc >= 0.8

    def test_percentile_sets_multiclass_threshold(self):
        """Test that an explicit percentile replaces the configured default."""
        world = SyntheticService.build_word_world(n_classes=3, n_clusters=8, n_samples=90, seed=SEED)
        victim = VictimService.train_word_victim(world.dataset, world.teacher, VictimConfig(seed=SEED))
        table = WordScoreService.build_score_table(with_budget(victim), world.teacher.words)

        by_percentile = EvaluationService.boundary_agreement(
            table, with_budget(victim), world.dataset, percentile=20.0
        )
        by_threshold = EvaluationService.boundary_agreement(
            table, with_budget(victim), world.dataset, threshold=MulticlassThreshold.from_table(table, 20.0)
        )

        assert by_percentile == by_threshold


class TestAttackAccuracy:
    """Test EvaluationService.attack_accuracy."""

    @staticmethod
    def result(perturbed, t):
        return AdvResult(original='x', perturbed=perturbed, replacements=[], t=t,
                         source_class=1, target_class=0)

    def test_fills_victim_flip(self, fe_victim, word_world):
        """Test flip verification and both avg_t conventions."""
        real_text = word_world.dataset.of_class(0).texts[0]
        fake_text = word_world.dataset.of_class(1).texts[0]
        victim = with_budget(fe_victim)
        results = [self.result(real_text, 0.5), self.result(fake_text, 0.2)]

        report = EvaluationService.attack_accuracy(results, victim)
        over_all = EvaluationService.attack_accuracy(results, victim, average_over='all')

        assert [r.victim_flip for r in results] == [True, False]
        assert report.attempted == 2
        assert report.accuracy == pytest.approx(0.5)
        assert report.avg_t == pytest.approx(0.5)
        assert over_all.avg_t == pytest.approx(0.35)
        assert victim.budget.used == 4

    def test_no_flip_gives_zero_avg_t(self, fe_victim, word_world):
        """Test avg_t when nothing flipped."""
        fake_text = word_world.dataset.of_class(1).texts[0]

        report = EvaluationService.attack_accuracy([self.result(fake_text, 0.3)], with_budget(fe_victim))

        assert report.flipped == 0
        assert report.avg_t == 0.0

    def test_invalid_arguments(self, fe_victim):
        """Test empty result lists and unknown averaging."""
        with pytest.raises(EvaluationError):
            EvaluationService.attack_accuracy([], fe_victim)
        with pytest.raises(EvaluationError):
            EvaluationService.attack_accuracy([self.result('the', 0.1)], fe_victim, average_over='some')


class TestUsefulness:
    """Test EvaluationService.estimate_usefulness."""

    DATASET = LabeledDataset.from_pairs(
        [('A. B. C.', 1), ('A.', 0), ('A. B.', 1), ('A. B.', 0)], ('fake', 'real')
    )

    def test_signed_mean(self):
        """Test rho_hat = mean of y * f(x)."""
        estimate = EvaluationService.estimate_usefulness(TextService.sentence_count, self.DATASET)

        assert estimate.rho_hat == pytest.approx((3 - 1 + 2 - 2) / 4)
        assert estimate.n == 4

    def test_linear_in_feature(self):
        """Test that rho_hat is linear in the feature."""
        f = lambda text: len(text)
        g = lambda text: text.count('.')

        def rho(feature):
            return EvaluationService.estimate_usefulness(feature, self.DATASET).rho_hat

        assert rho(lambda text: 2 * f(text) + g(text)) == pytest.approx(2 * rho(f) + rho(g))

    def test_binary_only(self):
        """Test that multi-class datasets are refused."""
        dataset = LabeledDataset.from_pairs([('a', 0), ('b', 1), ('c', 2)], ('x', 'y', 'z'))

        with pytest.raises(DatasetError):
            EvaluationService.estimate_usefulness(len, dataset)


class TestFlipCurve:
    """Test EvaluationService.flip_curve and crossing_step."""

    def test_score_difference_decreases(self, fe_victim, exhaustive_table, word_world):
        """Test one point per step with a shrinking score difference."""
        text = word_world.dataset.of_class(1).texts[0]
        victim = with_budget(fe_victim)

        curve = EvaluationService.flip_curve(text, victim, exhaustive_table, max_steps=5)

        assert curve[0].step == 0
        assert 1 <= len(curve) <= 6
        assert victim.budget.used == len(curve)
        diffs = [point.score_diff for point in curve]
        assert all(later < earlier for earlier, later in zip(diffs, diffs[1:]))

    def test_negative_steps(self, fe_victim, exhaustive_table):
        """Test that max_steps cannot be negative."""
        with pytest.raises(EvaluationError):
            EvaluationService.flip_curve('the', fe_victim, exhaustive_table, max_steps=-1)

    @pytest.mark.parametrize('values, expected', [
        ([3.0, 1.0, 0.0, -1.0], 2),
        ([2.0, -0.5], 1),
        ([1.0, 0.5], None),
    ])
    def test_crossing_step(self, values, expected):
        """Test the first non-positive index."""
        assert EvaluationService.crossing_step(values) == expected


class TestDatasetDiagnostics:
    """Test anchor closeness, length profile and per-class sampling."""

    def test_anchor_closeness(self, tiny_table):
        """Test strict own-anchor closeness per class."""
        dataset = LabeledDataset.from_pairs(
            [('Up.', 0), ('Northeast.', 1), ('East east.', 1)], ('a', 'b')
        )
        anchors = {
            0: SentenceAnchor.from_text(tiny_table, 'North.', 0),
            1: SentenceAnchor.from_text(tiny_table, 'East.', 1),
        }

        closeness = EvaluationService.anchor_closeness(dataset, anchors, tiny_table)

        assert closeness == {'a': 1.0, 'b': 0.5}

    def test_anchor_closeness_needs_two_anchors(self, tiny_table):
        """Test that one anchor is not enough."""
        dataset = LabeledDataset.from_pairs([('Up.', 0), ('East.', 1)], ('a', 'b'))

        with pytest.raises(EvaluationError):
            EvaluationService.anchor_closeness(
                dataset, {0: SentenceAnchor.from_text(tiny_table, 'North.', 0)}, tiny_table
            )

    def test_length_profile(self):
        """Test the share of short samples per class."""
        dataset = LabeledDataset.from_pairs(
            [('A.', 0), ('A. B. C.', 0), ('A. B. C.', 1), ('A. B. C. D.', 1)], ('fake', 'real')
        )

        assert EvaluationService.length_profile(dataset, 3) == {'fake': 0.5, 'real': 0.0}

    def test_per_class_sample(self, word_world):
        """Test sizes, class make-up and seeding."""
        dataset = word_world.dataset

        sample = EvaluationService.per_class_sample(dataset, 1, 30, 20, SEED)
        again = EvaluationService.per_class_sample(dataset, 1, 30, 20, SEED)

        assert sample.class_counts() == {0: 20, 1: 30}
        assert sample.samples == again.samples

    def test_per_class_sample_short_pool(self):
        """Test that a small pool returns what it has."""
        dataset = LabeledDataset.from_pairs([('a', 0), ('b', 1), ('c', 1)], ('x', 'y'))

        sample = EvaluationService.per_class_sample(dataset, 0, 5, 1, SEED)

        assert sample.class_counts() == {0: 1, 1: 1}


class TestSweep:
    """Test SweepService and the sweep task."""

    def test_sample_texts(self):
        """Test seeded sampling that keeps the original order."""
        texts = [f"t{i:02d}" for i in range(30)]

        sample = SweepService.sample_texts(texts, 10, SEED)

        assert len(sample) == 10
        assert sample == sorted(sample)
        assert sample == SweepService.sample_texts(texts, 10, SEED)
        assert SweepService.sample_texts(texts, None, SEED) == texts
        assert SweepService.sample_texts(texts, 100, SEED) == texts

    def test_grid_rows(self, word_world, word_shadow, fe_victim):
        """Test one row per cell with the seed and query count embedded."""
        victim = with_budget(fe_victim)
        texts = word_world.dataset.of_class(1).texts

        cells = SweepService.sweep_attack_grid(
            texts, 1, 0, word_shadow, word_world.teacher, word_world.lexicon, victim,
            g_ws=[5, 10], ths=[0.2, 0.5], seed=SEED, sample_size=15,
        )

        assert [(cell['g_w'], cell['th']) for cell in cells] == [(5, 0.2), (5, 0.5), (10, 0.2), (10, 0.5)]
        assert all(set(SWEEP_COLUMNS) == set(cell) for cell in cells)
        assert all(cell['queries'] == cell['attempted'] == 15 for cell in cells)
        assert all(cell['seed'] == SEED for cell in cells)
        assert victim.budget.used == 60

    def test_task_reports_failure(self, tmp_path):
        """Test that a cell with missing artifacts returns a failed status."""
        outcome = run_sweep_cell.apply(kwargs={
            'artifacts': {
                'embeddings': str(tmp_path / 'absent.txt'),
                'victim': str(tmp_path / 'victim.json'),
                'shadow': str(tmp_path / 'shadow.json'),
                'dataset': str(tmp_path / 'data.csv'),
            },
            'g_w': 5, 'th': 0.5, 'source_class': 1, 'target_class': 0, 'seed': SEED,
        }).get()

        assert outcome['status'] == 'failed'
        assert 'not found' in outcome['error']

    @pytest.fixture
    def artifacts(self, word_world, fe_victim, word_shadow, tmp_path):
        paths = SyntheticService.write_world(word_world, tmp_path, 'word')
        VictimService.save_victim(fe_victim, tmp_path / 'victim.json')
        ShadowService.save_shadow(word_shadow, tmp_path / 'shadow.json')
        return {
            'embeddings': str(paths['embeddings']),
            'lexicon': str(paths['lexicon']),
            'dataset': str(paths['dataset']),
            'class_names': list(word_world.dataset.class_names),
            'victim': str(tmp_path / 'victim.json'),
            'shadow': str(tmp_path / 'shadow.json'),
        }

    def test_grid_shares_the_query_limit(self, artifacts):
        """Test that the cells of one grid never spend more than the limit together."""
        outcomes = dispatch_sweep_grid(
            artifacts, [5, 10], [0.2, 0.5], source_class=0, target_class=1, seed=SEED,
            sample_size=10, query_limit=25,
        )

        assert [outcome['status'] for outcome in outcomes] == ['success', 'success', 'failed', 'skipped']
        assert [outcome['queries'] for outcome in outcomes] == [10, 10, 5, 0]
        assert sum(outcome['queries'] for outcome in outcomes) <= 25

    def test_grid_without_limit_runs_every_cell(self, artifacts):
        """Test g_w-major order and per-cell spend on the test split."""
        outcomes = dispatch_sweep_grid(
            artifacts, [5, 10], [0.2, 0.5], source_class=0, target_class=1, seed=SEED, sample_size=10,
        )

        assert all(outcome['status'] == 'success' for outcome in outcomes)
        cells = [(outcome['cell']['g_w'], outcome['cell']['th']) for outcome in outcomes]
        assert cells == [(5, 0.2), (5, 0.5), (10, 0.2), (10, 0.5)]
        assert all(outcome['queries'] == 10 for outcome in outcomes)

    def test_cell_texts_come_from_the_test_split(self, artifacts, word_world):
        """Test that a cell without a sample size attacks the held-out source texts only."""
        _, test = DatasetService.split_dataset(word_world.dataset, 0.2, SEED)

        outcome = run_sweep_cell.apply(kwargs={
            'artifacts': artifacts, 'g_w': 5, 'th': 0.2, 'source_class': 0, 'target_class': 1,
            'seed': SEED, 'test_fraction': 0.2,
        }).get()

        assert outcome['status'] == 'success'
        assert outcome['cell']['attempted'] == len(test.of_class(0))


class TestReports:
    """Test ReportService writers."""

    def test_json_line_handles_numpy(self):
        """Test that numpy scalars and arrays serialize."""
        line = ReportService.to_json_line({'b': np.float64(0.5), 'a': np.arange(2), 'c': np.int64(3)})

        assert json.loads(line) == {'a': [0, 1], 'b': 0.5, 'c': 3}
        assert line.startswith('{"a"')

    def test_jsonl_to_file_and_stream(self, tmp_path):
        """Test writing to a path and to an open stream."""
        records = [{'x': 1}, {'x': 2}]
        path = tmp_path / 'out' / 'report.jsonl'
        stream = io.StringIO()

        assert ReportService.write_jsonl(records, path) == 2
        assert ReportService.write_jsonl(records, stream) == 2
        assert ReportService.read_jsonl(path) == records
        assert stream.getvalue().count('\n') == 2

    def test_csv_columns(self, tmp_path):
        """Test CSV column order."""
        path = tmp_path / 'grid.csv'

        ReportService.write_csv([{'th': 0.5, 'g_w': 10}], path, ['g_w', 'th'])

        assert path.read_text().splitlines() == ['g_w,th', '10,0.5']

    def test_format_table(self):
        """Test plain-text tables and the empty case."""
        table = ReportService.format_table([{'metric': 'victim_accuracy', 'value': 0.98765}])

        assert 'victim_accuracy' in table
        assert '0.988' in table
        assert ReportService.format_table([]) == '(no rows)'
