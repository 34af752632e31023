"""
Django management command to train a student classifier on a teacher table.
"""
from apps.core.management.toolkit_command import ToolkitCommand
from apps.core.services.run_config import RunConfigService
from apps.victims.models import VictimKind, VictimMode
from apps.victims.services.dataset_service import DatasetService
from apps.victims.services.victim_service import VictimService


class Command(ToolkitCommand):
    help = 'Train a victim classifier and report train/test accuracy'

    def add_command_arguments(self, parser):
        parser.add_argument('--kind', choices=VictimKind.values, help='Word or sentence victim')
        parser.add_argument('--mode', choices=VictimMode.values,
                            help='FE keeps the teacher frozen, FT fine-tunes it')
        parser.add_argument('--dropout-ratio', type=float, dest='dropout_ratio')
        parser.add_argument('--learning-rate', type=float, dest='learning_rate')
        parser.add_argument('--embedding-learning-rate', type=float, dest='embedding_learning_rate')
        parser.add_argument('--epochs', type=int)
        parser.add_argument('--batch-size', type=int, dest='batch_size')
        parser.add_argument('--length-cap', type=int, dest='length_cap')
        parser.add_argument('--test-fraction', type=float, dest='test_fraction')
        self.flag(parser, '--length-feature', dest='length_feature',
                  help='Append the normalized sentence count to sentence features')

    def run(self, config, options):
        teacher = RunConfigService.load_teacher(config)
        dataset = RunConfigService.load_dataset(config)
        train, test = DatasetService.split_dataset(dataset, config.test_fraction, config.seed)

        victim_config = RunConfigService.victim_config(config)
        if config.kind == VictimKind.SENTENCE:
            victim = VictimService.train_sentence_victim(train, teacher, victim_config)
        else:
            victim = VictimService.train_word_victim(train, teacher, victim_config)

        train_accuracy = VictimService.accuracy(victim, train)
        test_accuracy = VictimService.accuracy(victim, test)
        path = config.artifact('victim', 'victim.json')
        VictimService.save_victim(victim, path)

        self.stdout.write(f"train accuracy: {train_accuracy:.4f} test accuracy: {test_accuracy:.4f}")
        self.stdout.write(self.style.SUCCESS(f"Victim saved to {path}"))

        self.audit('victim', path, 'trained', {
            'kind': str(victim.kind),
            'mode': str(victim.config.mode),
            'train_samples': len(train),
            'test_samples': len(test),
            'train_accuracy': train_accuracy,
            'test_accuracy': test_accuracy,
            'queries': 0,
        })
