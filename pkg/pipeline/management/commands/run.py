from pipeline.services import RunService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Run the whole pipeline: ingest and extract when needed, then select, evaluate and save the best models'

    def run(self, config, writer, options):
        self.report_grid(RunService(config, writer).execute(), writer)
