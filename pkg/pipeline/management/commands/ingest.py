from pipeline.constants import MANIFEST_DIR
from pipeline.services import IngestService

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Deduplicate every class corpus and record its PE32 files in a manifest'

    def run(self, config, writer, options):
        manifests = IngestService(config, writer).execute()
        self.stdout.write(f"{'class':<20} {'files':>7} {'size (bytes)':>14} {'excluded':>9}")
        for name, manifest in manifests.items():
            self.stdout.write(
                f"{name:<20} {len(manifest.accepted):>7} {manifest.total_size:>14} {len(manifest.exclusions):>9}"
            )
        self.stdout.write(self.style.SUCCESS(f"Manifests written to {writer.path(MANIFEST_DIR)}"))
