import logging
import threading
from pathlib import Path

from rest_framework.exceptions import ValidationError

logger = logging.getLogger(__name__)


class ArtifactWriter:
    """The only thing that writes files; every target must lie below `root`."""

    def __init__(self, root):
        self.root = Path(root).resolve()
        self.written: list[Path] = []
        self._lock = threading.Lock()

    def path(self, *parts) -> Path:
        target = self.root.joinpath(*parts).resolve()
        if not target.is_relative_to(self.root):
            raise ValidationError(f"Refusing to write outside {self.root}: {target}")
        return target

    def exists(self, *parts) -> bool:
        return self.path(*parts).is_file()

    def read_text(self, *parts) -> str:
        target = self.path(*parts)
        if not target.is_file():
            raise ValidationError(f"Missing artifact {target.relative_to(self.root)}.")
        return target.read_text(encoding='utf-8')

    def write_text(self, *parts, text: str) -> Path:
        return self._write(self.path(*parts), text.encode('utf-8'))

    def write_bytes(self, *parts, data: bytes) -> Path:
        return self._write(self.path(*parts), data)

    def _write(self, target: Path, data: bytes) -> Path:
        with self._lock:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
            self.written.append(target)
        logger.debug("wrote %s (%d bytes)", target, len(data))
        return target
