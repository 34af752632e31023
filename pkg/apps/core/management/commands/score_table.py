"""
Django management command to query the victim for per-word scores.
"""
from apps.core.management.toolkit_command import ToolkitCommand
from apps.core.services.run_config import RunConfigService
from apps.victims.services.dataset_service import DatasetService
from apps.wordscore.services.score_service import WordScoreService


class Command(ToolkitCommand):
    help = 'Build a word-score table from one victim query per word'

    def add_command_arguments(self, parser):
        parser.add_argument('--scores', help='Output CSV (default: <artifact-dir>/scores.csv)')
        parser.add_argument(
            '--all-vocabulary',
            action='store_true',
            dest='all_vocabulary',
            help='Score every teacher word instead of the dataset vocabulary',
        )

    def run(self, config, options):
        teacher = RunConfigService.load_teacher(config)
        victim = RunConfigService.load_victim(config, teacher)

        if options.get('all_vocabulary'):
            words = list(teacher.words)
        else:
            frequencies = DatasetService.word_frequencies(RunConfigService.load_dataset(config))
            words = sorted(word for word in frequencies if word in teacher.index)

        table = WordScoreService.build_score_table(victim, words)
        path = config.artifact('scores', 'scores.csv')
        WordScoreService.save_score_table(table, path)

        self.stdout.write(f"queries used: {victim.budget.used}")
        self.stdout.write(self.style.SUCCESS(f"Score table with {len(table)} words saved to {path}"))
        self.audit('score_table', path, 'built', {'words': len(table), 'queries': victim.budget.used})
