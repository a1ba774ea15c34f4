"""File-backed series store: one TSB1 blob per series name under a root directory.

The directory itself is the index, which keeps the store inspectable with
plain shell tools.  Writes go to a temporary file in the same directory and
are moved into place with an atomic replace, so concurrent writers of the
same name leave exactly one intact blob behind (last write wins).
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

from vmsim.model import TimeSeries
from vmsim.times.codec import decode_series, encode_series

NAME_PATTERN = re.compile(r"[A-Za-z0-9_.\-]+\Z")


class StoreError(Exception):
    pass


class InvalidName(StoreError):
    """Series name outside the allowed pattern (or a path-traversal attempt)."""


class NotFound(StoreError):
    pass


class StorageFailure(StoreError):
    pass


def valid_name(name: str) -> bool:
    # "." and ".." match the character class but would escape the root.
    return bool(NAME_PATTERN.match(name)) and name not in (".", "..")


class SeriesStore:
    def __init__(self, root, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        if not self.root.is_dir():
            raise StorageFailure(f"store root {self.root} is not a directory")

    def _path(self, name: str) -> Path:
        if not valid_name(name):
            raise InvalidName(f"series name {name!r} does not match [A-Za-z0-9_.-]+")
        return self.root / name

    @property
    def index(self) -> dict[str, Path]:
        """Snapshot of series name -> file path, rebuilt from the directory."""
        return {p.name: p for p in sorted(self.root.iterdir())
                if p.is_file() and valid_name(p.name)}

    def put(self, name: str, series: TimeSeries) -> None:
        self.put_bytes(name, encode_series(series))

    def put_bytes(self, name: str, blob: bytes) -> None:
        """Store an already-encoded blob verbatim; it must decode cleanly."""
        decode_series(blob)
        path = self._path(name)
        try:
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.root)
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(blob)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            except BaseException:
                try:
                    os.unlink(tmp)
                except OSError:
                    pass
                raise
        except OSError as exc:
            raise StorageFailure(f"cannot store series {name!r}: {exc}") from exc

    def get(self, name: str) -> TimeSeries:
        return decode_series(self.get_bytes(name))

    def get_bytes(self, name: str) -> bytes:
        path = self._path(name)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no series named {name!r}") from None
        except OSError as exc:
            raise StorageFailure(f"cannot read series {name!r}: {exc}") from exc

    def list(self, prefix: str = "") -> list[str]:
        return sorted(n for n in self.index if n.startswith(prefix))
