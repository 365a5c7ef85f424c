from pipeline.constants import AUDIT_DIR
from pipeline.services import AuditService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Histogram the compile timestamps of every class and list the forged ones'

    def run(self, config, writer, options):
        for name, audit in AuditService(config, writer).execute().items():
            self.stdout.write(f"== {name}")
            self.stdout.write(audit.render())
            if audit.tampered:
                self.stdout.write(self.style.WARNING(f"{len(audit.tampered)} samples with a forged compile time"))
        self.stdout.write(self.style.SUCCESS(f"Audit written to {writer.path(AUDIT_DIR)}"))
