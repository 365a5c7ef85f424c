"""Options and error handling shared by the pipeline commands."""
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import APIException

from pipeline.config import PipelineConfig, load_config
from pipeline.constants import DEFAULT_CONFIG_FILE, ExitCode
from pipeline.services import RunResult, error_text
from pipeline.writer import ArtifactWriter


class PipelineCommand(BaseCommand):
    """Loads the config, binds the output writer and maps errors to exit codes."""

    def add_arguments(self, parser):
        parser.add_argument('--config', default=DEFAULT_CONFIG_FILE, help='Pipeline config file (key = value lines)')
        parser.add_argument('--seed', type=int, help='Overrides the `seed` key')
        parser.add_argument('--jobs', type=int, help='Overrides the `jobs` key')
        parser.add_argument('--out', help='Overrides the `out` key')

    def overrides(self, options) -> dict:
        return {
            'seed': options.get('seed'),
            'jobs': options.get('jobs'),
            'out': str(Path(options['out']).resolve()) if options.get('out') else None,
        }

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], overrides=self.overrides(options))
            self.run(config, ArtifactWriter(config.out), options)
        except APIException as exc:
            raise CommandError(error_text(exc), returncode=ExitCode.CONFIG_ERROR) from exc

    def run(self, config: PipelineConfig, writer: ArtifactWriter, options):
        raise NotImplementedError

    def report_grid(self, result: RunResult, writer: ArtifactWriter):
        self.stdout.write(result.grid.to_markdown())
        if result.failed_cells:
            for cell in result.failed_cells:
                self.stdout.write(self.style.WARNING(f"failed: {cell}"))
            raise CommandError(
                f"{len(result.failed_cells)} grid cells failed.", returncode=ExitCode.PARTIAL_FAILURE
            )
        self.stdout.write(self.style.SUCCESS(f"Results written to {writer.root}"))
