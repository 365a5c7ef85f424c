from django.core.management.base import BaseCommand

from pipeline.constants import DEMO_PER_CLASS
from pipeline.synthetic import generate_demo_corpus


class Command(BaseCommand):
    help = 'Write the synthetic benign-like / malware-like PE32 corpus and a config to run it'

    def add_arguments(self, parser):
        parser.add_argument('--dest', default='demo', help='Directory to create the corpus in')
        parser.add_argument('--per-class', type=int, default=DEMO_PER_CLASS)
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        config = generate_demo_corpus(options['dest'], per_class=options['per_class'], seed=options['seed'])
        self.stdout.write(self.style.SUCCESS(f"Demo corpus written; run it with `manage.py run --config {config}`"))
