from django.core.management.base import CommandError

from pipeline.constants import SELECTION_DIR, ExitCode
from pipeline.services import SelectService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Apply the configured feature selection modes to every task'

    def run(self, config, writer, options):
        service = SelectService(config, writer)
        for (mode, task), result in service.execute().items():
            if result is None:
                self.stdout.write(self.style.WARNING(f"{task} / {mode}: selection failed"))
            else:
                self.stdout.write(f"{task} / {mode}: {len(result.subset.names)} attributes kept")
        if service.failed:
            raise CommandError(
                f"{len(service.failed)} selections failed: {', '.join(service.failed)}",
                returncode=ExitCode.PARTIAL_FAILURE,
            )
        self.stdout.write(self.style.SUCCESS(f"Subsets written to {writer.path(SELECTION_DIR)}"))
