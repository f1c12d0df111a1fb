import hashlib
import logging
from abc import ABC, abstractmethod

from strata.renderers.csv_renderer import render_csv
from strata.renderers.json_renderer import render_json

log = logging.getLogger(__name__)


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class RunStore(ABC):
    """Keyed storage for the files of one run; keys are relative POSIX paths."""

    @abstractmethod
    def read_bytes(self, key: str) -> bytes:
        pass

    @abstractmethod
    def write_bytes(self, key: str, data: bytes):
        pass

    @abstractmethod
    def exists(self, key: str) -> bool:
        pass

    @abstractmethod
    def keys(self, prefix: str, suffix: str) -> list[str]:
        pass

    def write_text(self, key: str, text: str) -> str:
        """Writes text and returns its sha256 digest."""
        data = text.encode()
        self.write_bytes(key, data)
        log.debug(f"Wrote {key} ({len(data)} bytes)")
        return sha256(data)

    def write_csv(self, key: str, rows: list[dict]) -> str:
        return self.write_text(key, render_csv(rows).getvalue())

    def write_json(self, key: str, obj) -> str:
        return self.write_text(key, render_json(obj))

    def digest(self, key: str) -> str:
        return sha256(self.read_bytes(key))
