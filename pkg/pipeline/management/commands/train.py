from django.core.management.base import CommandError

from pipeline.constants import MODEL_DIR, ExitCode
from pipeline.services import TrainService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Train every configured method on every task and save the models'

    def run(self, config, writer, options):
        failed = TrainService(config, writer).execute()
        if failed:
            raise CommandError(f"{len(failed)} models failed to train: {', '.join(failed)}", returncode=ExitCode.PARTIAL_FAILURE)
        self.stdout.write(self.style.SUCCESS(f"Models written to {writer.path(MODEL_DIR)}"))
