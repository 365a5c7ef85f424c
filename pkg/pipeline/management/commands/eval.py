from pipeline.services import EvalService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Cross-validate every (selection, task, method) cell and write the result grid'

    def run(self, config, writer, options):
        self.report_grid(EvalService(config, writer).execute(), writer)
