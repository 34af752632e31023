"""
Django management command to generate adversarial texts.

word:     shadow-guided synonym substitution (no victim query while generating)
length:   truncation to the first sentences
sentence: anchor-sentence appending toward the target class
"""
from apps.attacks.services.sentence_attack_service import SentenceAttackService
from apps.attacks.services.validation_service import ValidationService
from apps.attacks.services.word_attack_service import AttackError, WordAttackService
from apps.core.management.toolkit_command import ToolkitCommand
from apps.core.services.run_config import RunConfigService
from apps.evaluation.services.metrics_service import EvaluationService
from apps.evaluation.services.report_service import ReportService
from apps.evaluation.services.sweep_service import SweepService
from apps.victims.services.victim_service import VictimService


class Command(ToolkitCommand):
    help = 'Run the word, length or sentence attack and emit JSON lines'

    def add_command_arguments(self, parser):
        parser.add_argument('attack_kind', choices=['word', 'length', 'sentence'])
        parser.add_argument('--g-w', type=int, dest='g_w', help='Neighbor pool size')
        parser.add_argument('--th', type=float, help='Maximum fraction of replaced tokens')
        parser.add_argument('--source-class', type=int, dest='source_class')
        parser.add_argument('--target-class', type=int, dest='target_class')
        parser.add_argument('--keep', type=int, dest='keep_sentences', help='Sentences kept by the length attack')
        parser.add_argument('-k', '--append', type=int, dest='append_sentences',
                            help='Anchor sentences appended by the sentence attack')
        parser.add_argument('--sample-size', type=int, dest='sample_size',
                            help='Seeded number of source-class texts to attack')
        parser.add_argument('--output', help='JSON-lines file (default: standard output)')
        parser.add_argument('--validate', action='store_true',
                            help='Check every word-attack result with the independent validator')
        parser.add_argument('--verify', action='store_true',
                            help='Query the victim on every perturbed text')

    def run(self, config, options):
        teacher = RunConfigService.load_teacher(config)
        dataset = RunConfigService.load_dataset(config)
        texts = SweepService.sample_texts(
            dataset.of_class(config.source_class).texts, config.sample_size, config.seed
        )
        kind = options['attack_kind']
        needs_victim = options.get('verify') or kind == 'sentence'
        victim = RunConfigService.load_victim(config, teacher) if needs_victim else None

        if kind == 'word':
            records, summary = self.word_attack(config, options, teacher, texts, victim)
        else:
            if kind == 'length':
                records = self.length_attack(config, texts)
            else:
                records = self.sentence_attack(config, teacher, dataset, texts, victim)
            summary = self.verify_records(records, victim if options.get('verify') else None)

        output = config.output
        ReportService.write_jsonl(records, output or self.stdout)
        for key, value in summary.items():
            self.stdout.write(f"{key}: {value}")

        if victim is not None:
            summary['queries'] = victim.budget.used
        self.audit('attack', output or 'stdout', f'{kind}_attack', {'results': len(records), **summary})

    def word_attack(self, config, options, teacher, texts, victim):
        lexicon = RunConfigService.load_lexicon(config)
        shadow = RunConfigService.load_shadow(config, teacher)
        cfg = RunConfigService.attack_config(config)
        results = [
            WordAttackService.generate_adv_example(text, cfg, shadow, teacher, lexicon)
            for text in texts
        ]

        summary = {}
        invalid = 0
        if options.get('validate'):
            for result in results:
                violations = ValidationService.validate_result(result, cfg, teacher, lexicon)
                result.extra['violations'] = violations
                invalid += bool(violations)
            summary['validated'] = f"{len(results) - invalid}/{len(results)}"
        if victim is not None:
            report = EvaluationService.attack_accuracy(results, victim)
            summary['attack accuracy'] = f"{report.accuracy:.4f}"
            summary['avg t'] = f"{report.avg_t:.4f}"

        records = [result.to_dict() for result in results]
        if invalid:
            ReportService.write_jsonl(records, config.output or self.stdout)
            raise AttackError(f"{invalid} of {len(results)} results failed validation")
        return records, summary

    def length_attack(self, config, texts):
        records = [
            {
                'original': text,
                'perturbed': SentenceAttackService.length_attack(text, config.keep_sentences),
                'keep_sentences': config.keep_sentences,
                'source_class': config.source_class,
                'target_class': config.target_class,
            }
            for text in texts
        ]
        return records

    def sentence_attack(self, config, teacher, dataset, texts, victim):
        anchor = SentenceAttackService.select_anchor(victim, dataset, config.target_class, teacher)
        records = []
        for text in texts:
            perturbed, products = SentenceAttackService.sentence_append_attack(
                text, anchor, config.append_sentences, teacher,
                victim.uses_length, config.append_cap, victim.config.length_cap,
            )
            records.append({
                'original': text,
                'perturbed': perturbed,
                'appended': len(products),
                'dot_products': products,
                'anchor_class': anchor.anchor_class,
                'source_class': config.source_class,
                'target_class': config.target_class,
            })
        return records

    @staticmethod
    def verify_records(records, victim):
        if victim is None or not records:
            return {}
        distributions = VictimService.query_many(victim, [record['perturbed'] for record in records])
        for record, distribution in zip(records, distributions):
            record['victim_class'] = distribution.argmax
            record['victim_flip'] = distribution.argmax == record['target_class']
        flipped = sum(record['victim_flip'] for record in records)
        return {'attack accuracy': f"{flipped / len(records):.4f}"}
