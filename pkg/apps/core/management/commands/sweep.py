"""
Django management command to sweep the word attack over a g_w x th grid.
Each cell runs as a Celery task (eager in development and tests) on the
test split, and the cells share one victim query limit.
"""
from apps.core.management.toolkit_command import ToolkitCommand
from apps.core.services.run_config import RunConfigService
from apps.evaluation.services.metrics_service import EvaluationError
from apps.evaluation.services.report_service import ReportService
from apps.evaluation.services.sweep_service import SWEEP_COLUMNS
from apps.evaluation.tasks import dispatch_sweep_grid


def int_list(value):
    return [int(item) for item in value.split(',') if item.strip()]


def float_list(value):
    return [float(item) for item in value.split(',') if item.strip()]


class Command(ToolkitCommand):
    help = 'Run the word attack for every (g_w, th) cell and report attack accuracy'

    def add_command_arguments(self, parser):
        parser.add_argument('--g-w-values', type=int_list, dest='sweep_neighbors',
                            help='Comma-separated neighbor pool sizes, e.g. 5,10')
        parser.add_argument('--th-values', type=float_list, dest='sweep_fractions',
                            help='Comma-separated replacement fractions, e.g. 0.2,0.5')
        parser.add_argument('--source-class', type=int, dest='source_class')
        parser.add_argument('--target-class', type=int, dest='target_class')
        parser.add_argument('--sample-size', type=int, dest='sample_size')
        parser.add_argument('--csv', help='Write the grid as CSV')
        parser.add_argument('--output', help='Write the grid as JSON lines')

    def run(self, config, options):
        RunConfigService.require(config, ['embeddings', 'dataset'])
        artifacts = {
            'embeddings': str(config.path('embeddings')),
            'dataset': str(config.path('dataset')),
            'victim': str(config.artifact('victim', 'victim.json')),
            'shadow': str(config.artifact('shadow', 'shadow.json')),
            'lexicon': config.lexicon,
            'class_names': config.class_names,
        }

        outcomes = dispatch_sweep_grid(
            artifacts, config.sweep_neighbors, config.sweep_fractions,
            config.source_class, config.target_class, config.seed,
            sample_size=config.sample_size, query_limit=config.query_limit,
            test_fraction=config.test_fraction,
        )
        failed = [outcome for outcome in outcomes if outcome['status'] != 'success']
        if failed:
            self.audit('sweep', 'stdout', 'failed', {
                'cells': len(outcomes) - len(failed),
                'queries': sum(outcome['queries'] for outcome in outcomes),
                'seed': config.seed,
            })
            raise EvaluationError(f"{len(failed)} sweep cells failed: {failed[0]['error']}")

        cells = [outcome['cell'] for outcome in outcomes]
        self.stdout.write(ReportService.format_table(cells, SWEEP_COLUMNS))
        if options.get('csv'):
            ReportService.write_csv(cells, options['csv'], SWEEP_COLUMNS)
            self.stdout.write(self.style.SUCCESS(f"Sweep grid written to {options['csv']}"))
        if config.output:
            ReportService.write_jsonl(cells, config.output)

        self.audit('sweep', options.get('csv') or config.output or 'stdout', 'swept', {
            'cells': len(cells),
            'queries': sum(cell['queries'] for cell in cells),
            'seed': config.seed,
        })
