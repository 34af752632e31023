"""
Django management command to derive a part-of-speech lexicon from a Penn Treebank tagged resource.
"""
from collections import Counter
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.audit.services.audit_service import AuditService
from apps.textproc.services.lexicon_service import SOURCE_FORMATS, LexiconService
from apps.textproc.services.text_service import TextProcessingError


class Command(BaseCommand):
    help = 'Write a word<TAB>tag lexicon with the most frequent tag of every word in a tagged resource'

    def add_arguments(self, parser):
        parser.add_argument('source', help='Brill-style lexicon or word/TAG tagged text')
        parser.add_argument('output', help='Lexicon TSV to write')
        parser.add_argument('--format', dest='source_format', choices=SOURCE_FORMATS, default='brill')
        parser.add_argument('--min-count', type=int, dest='min_count', default=1,
                            help='Occurrences a word needs in tagged text')

    def handle(self, *args, **options):
        try:
            lexicon = LexiconService.derive_lexicon(
                options['source'], options['source_format'], options['min_count']
            )
        except TextProcessingError as e:
            raise CommandError(str(e))

        output = Path(options['output'])
        output.parent.mkdir(parents=True, exist_ok=True)
        LexiconService.dump_lexicon(lexicon, output)

        tags = Counter(tag.value for tag in lexicon.entries.values())
        for tag, count in sorted(tags.items()):
            self.stdout.write(f"{tag}: {count}")
        AuditService.log_event(
            actor='manage.py build_lexicon',
            entity_type='lexicon',
            entity_id=str(output),
            action='derived',
            after_data={'source': str(options['source']), 'format': options['source_format'],
                        'entries': len(lexicon), 'tags': dict(tags), 'queries': 0},
        )
        self.stdout.write(self.style.SUCCESS(f"Lexicon with {len(lexicon)} words written to {output}"))
