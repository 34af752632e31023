"""
Django management command to train a shadow score model from q victim queries.
"""
from apps.core.management.toolkit_command import ToolkitCommand
from apps.core.services.run_config import RunConfigService
from apps.shadow.services.shadow_service import ShadowService
from apps.victims.services.dataset_service import DatasetService
from apps.victims.services.victim_service import VictimService
from apps.wordscore.models import ScoreSource
from apps.wordscore.services.score_service import ScoreTable, WordScoreService


class Command(ToolkitCommand):
    help = 'Train a shadow model on the q most frequent dataset words'

    def add_command_arguments(self, parser):
        parser.add_argument('-q', '--queries', type=int, dest='q', help='Number of victim queries')
        parser.add_argument('--hidden-units', type=int, dest='hidden_units')
        parser.add_argument('--shadow-epochs', type=int, dest='shadow_epochs')
        parser.add_argument(
            '--ground-truth',
            action='store_true',
            dest='ground_truth',
            help='Report argmax agreement with the victim on the remaining dataset words',
        )
        parser.add_argument(
            '--random-victim',
            action='store_true',
            dest='random_victim',
            help='Query an untrained victim with a random head (baseline)',
        )

    def run(self, config, options):
        teacher = RunConfigService.load_teacher(config)
        dataset = RunConfigService.load_dataset(config)
        if options.get('random_victim'):
            victim = VictimService.random_victim(
                teacher, RunConfigService.victim_config(config), dataset.class_names,
                kind=config.kind, query_limit=config.query_limit,
            )
        else:
            victim = RunConfigService.load_victim(config, teacher)

        frequencies = DatasetService.word_frequencies(dataset)
        vocabulary = {word: count for word, count in frequencies.items() if word in teacher.index}
        words = ShadowService.select_query_words(vocabulary, config.q)
        pairs = ShadowService.collect_pairs(victim, words)
        model = ShadowService.train_shadow(
            pairs, teacher, config.seed,
            hidden_units=config.hidden_units,
            epochs=config.shadow_epochs,
            learning_rate=config.shadow_learning_rate,
        )

        path = config.artifact('shadow', 'shadow.json')
        ShadowService.save_shadow(model, path)
        self.stdout.write(f"queries used: {victim.budget.used}")

        after = {'q': config.q, 'trained_on': model.trained_on, 'queries': victim.budget.used,
                 'random_victim': bool(options.get('random_victim'))}
        if options.get('ground_truth'):
            # Owner-side oracle: these predictions are not charged to the attacker.
            held_out = sorted(word for word in vocabulary if word not in model.cache)
            if held_out:
                distributions = victim.predict_many(held_out)
                truth = ScoreTable.from_vectors(
                    {word: WordScoreService.word_score(d) for word, d in zip(held_out, distributions)},
                    victim.n_classes,
                    source=ScoreSource.VICTIM_QUERIES,
                )
                agreement = ShadowService.shadow_agreement(model, truth)
                self.stdout.write(f"shadow agreement: {agreement * 100:.2f}%")
                after['agreement'] = agreement
            else:
                self.stdout.write(self.style.WARNING('No held-out word left for the agreement check'))

        self.stdout.write(self.style.SUCCESS(f"Shadow model saved to {path}"))
        self.audit('shadow', path, 'trained', after)
