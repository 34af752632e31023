"""
Django management command to evaluate a victim against the attack suite.
"""
from apps.core.management.toolkit_command import ToolkitCommand
from apps.core.services.run_config import RunConfigService
from apps.evaluation.models import DefenseKind
from apps.evaluation.services.defense_service import DefenseService
from apps.evaluation.services.metrics_service import EvaluationService
from apps.evaluation.services.report_service import ReportService
from apps.evaluation.services.sweep_service import SweepService
from apps.victims.services.dataset_service import DatasetService
from apps.victims.services.victim_service import VictimService
from apps.wordscore.services.score_service import MulticlassThreshold, WordScoreService


class Command(ToolkitCommand):
    help = 'Report victim accuracy, boundary agreement, attack accuracy and dataset diagnostics'

    def add_command_arguments(self, parser):
        parser.add_argument('--scores', help='Score table CSV (default: <artifact-dir>/scores.csv)')
        parser.add_argument('--g-w', type=int, dest='g_w')
        parser.add_argument('--th', type=float)
        parser.add_argument('--source-class', type=int, dest='source_class')
        parser.add_argument('--target-class', type=int, dest='target_class')
        parser.add_argument('--sample-size', type=int, dest='sample_size')
        parser.add_argument('-q', '--queries', type=int, dest='q',
                            help='Shadow queries per defense round')
        parser.add_argument('--defense', choices=DefenseKind.values,
                            help='Re-run the word attack against a defended victim variant')
        parser.add_argument('--average-over', choices=['flipped', 'all'], default='flipped',
                            dest='average_over', help='Results averaged into avg_t')
        parser.add_argument('--length-cutoff', type=int, default=10, dest='length_cutoff',
                            help='Sentence count below which a sample counts as short')
        parser.add_argument('--per-class', type=int, dest='per_class',
                            help='Multi-class protocol: N samples of each class plus N others')
        self.flag(parser, '--skew-corrected', dest='skew_corrected',
                  help='Divide score sums by class word ratios')
        parser.add_argument('--output', help='JSON-lines report file')

    def run(self, config, options):
        teacher = RunConfigService.load_teacher(config)
        dataset = RunConfigService.load_dataset(config)
        victim = RunConfigService.load_victim(config, teacher)
        train, test = DatasetService.split_dataset(dataset, config.test_fraction, config.seed)
        rows = [{'metric': 'victim_accuracy', 'value': VictimService.accuracy(victim, test)}]

        scores_path = config.artifact('scores', 'scores.csv')
        if scores_path.exists():
            table = WordScoreService.load_score_table(scores_path)
            report = EvaluationService.boundary_agreement(
                table, victim, test, skew_corrected=config.skew_corrected,
                percentile=config.multiclass_percentile,
            )
            rows.append({'metric': 'boundary_agreement', 'source': str(table.source), **report.to_dict()})
            if options.get('per_class'):
                rows.extend(self.per_class_agreement(config, options['per_class'], table, victim, test))

        shadow_path = config.artifact('shadow', 'shadow.json')
        texts = SweepService.sample_texts(
            test.of_class(config.source_class).texts, config.sample_size, config.seed
        )
        if shadow_path.exists():
            shadow = RunConfigService.load_shadow(config, teacher)
            lexicon = RunConfigService.load_lexicon(config)
            report = EvaluationService.boundary_agreement(
                shadow, victim, test, skew_corrected=config.skew_corrected,
                percentile=config.multiclass_percentile,
            )
            rows.append({'metric': 'boundary_agreement', 'source': 'shadow', **report.to_dict()})
            cell = SweepService.run_cell(texts, config.g_w, config.th, config.source_class,
                                         config.target_class, shadow, teacher, lexicon, victim, config.seed,
                                         average_over=options['average_over'])
            rows.append({'metric': 'attack_accuracy', **cell})

        if dataset.n_classes == 2:
            estimate = EvaluationService.estimate_usefulness(
                lambda text: VictimService.normalized_length(text, config.length_cap), test
            )
            rows.append({'metric': 'length_usefulness', 'value': estimate.rho_hat, 'n': estimate.n})
        for name, share in EvaluationService.length_profile(test, options['length_cutoff']).items():
            rows.append({'metric': 'short_share', 'class': name, 'value': share})

        if options.get('defense'):
            row = DefenseService.evaluate_defense(
                options['defense'], victim, train, texts,
                RunConfigService.attack_config(config), RunConfigService.load_lexicon(config),
                config.q, config.seed, dropout_ratio=config.defense_dropout_ratio, held_out=test,
            )
            rows.append({'metric': 'defense', **row})

        self.stdout.write(ReportService.format_table(rows))
        self.stdout.write(f"queries used: {victim.budget.used}")
        if config.output:
            ReportService.write_jsonl(rows, config.output)
        self.audit('evaluation', config.output or 'stdout', 'evaluated',
                   {'rows': len(rows), 'defense': options.get('defense'), 'queries': victim.budget.used})

    @staticmethod
    def per_class_agreement(config, n, table, victim, test):
        threshold = None
        if table.n_classes > 2:
            threshold = MulticlassThreshold.from_table(table, config.multiclass_percentile)
        rows = []
        for class_index, name in enumerate(test.class_names):
            sample = EvaluationService.per_class_sample(test, class_index, n, n, config.seed)
            report = EvaluationService.boundary_agreement(
                table, victim, sample, threshold=threshold,
                skew_corrected=config.skew_corrected, positive_class=class_index,
            )
            rows.append({'metric': 'class_agreement', 'class': name, **report.to_dict()})
        return rows
