"""
Django management command to write the synthetic fixture worlds to disk.
"""
from pathlib import Path

from django.core.management.base import BaseCommand

from apps.audit.services.audit_service import AuditService
from apps.core.services.synthetic_service import SyntheticService


class Command(BaseCommand):
    help = 'Write the separable word world and the length-biased world as fixture files'

    def add_arguments(self, parser):
        parser.add_argument('directory', help='Target directory')
        parser.add_argument('--seed', type=int, default=13)
        parser.add_argument('--samples', type=int, default=2000, help='Samples per world')
        parser.add_argument('--classes', type=int, default=2, help='Classes of the word world')
        parser.add_argument(
            '--word-only',
            action='store_true',
            help='Skip the length-biased world',
        )

    def handle(self, *args, **options):
        directory = Path(options['directory'])
        seed = options['seed']

        worlds = {
            'word': SyntheticService.build_word_world(
                n_classes=options['classes'], seed=seed, n_samples=options['samples']
            ),
        }
        if not options['word_only']:
            worlds['length'] = SyntheticService.build_length_world(seed=seed, n_samples=options['samples'])

        for prefix, world in worlds.items():
            paths = SyntheticService.write_world(world, directory, prefix)
            for name, path in paths.items():
                self.stdout.write(f"{prefix} {name}: {path}")
            AuditService.log_event(
                actor='manage.py seed_fixtures',
                entity_type='fixture',
                entity_id=str(paths['dataset']),
                action='seeded',
                after_data={'seed': seed, 'samples': len(world.dataset),
                            'vocabulary': len(world.teacher), 'queries': 0},
            )

        self.stdout.write(self.style.SUCCESS(f"Fixtures written to {directory}"))
