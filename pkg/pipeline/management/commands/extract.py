from pipeline.constants import FEATURE_DIR, FeatureFamily
from pipeline.services import ExtractService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Build the feature CSV of every task from the ingested corpus'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--family', choices=FeatureFamily.values, help='Overrides the `family` key')

    def overrides(self, options):
        return {**super().overrides(options), 'family': options.get('family')}

    def run(self, config, writer, options):
        extraction = ExtractService(config, writer).execute()
        for failure in extraction.failures:
            self.stdout.write(self.style.WARNING(f"excluded {failure.class_name}/{failure.path}: {failure.reason}"))
        ds = extraction.dataset
        self.stdout.write(self.style.SUCCESS(
            f"{config.family_tag}: {len(ds)} samples x {ds.n_attributes} features "
            f"written to {writer.path(FEATURE_DIR)}"
        ))
