"""Series providers: where a simulation fetches its workload traces from.

The engine only needs ``get(name)`` and ``list(prefix)``.  Sources are either
a local store directory or a live network service; tests mostly use the
in-memory provider.
"""

from __future__ import annotations

import os

from vmsim.model import TimeSeries
from vmsim.times.net import TimesClient, parse_address
from vmsim.times.store import NotFound, SeriesStore, StoreError


class WorkloadMissing(Exception):
    """A referenced series cannot be resolved by the provider."""


class MemoryWorkloads:
    def __init__(self, series_by_name: dict[str, TimeSeries] | None = None):
        self._series = dict(series_by_name or {})

    def add(self, series: TimeSeries) -> None:
        self._series[series.name] = series

    def get(self, name: str) -> TimeSeries:
        try:
            return self._series[name]
        except KeyError:
            raise WorkloadMissing(f"no series named {name!r}") from None

    def list(self, prefix: str = "") -> list[str]:
        return sorted(n for n in self._series if n.startswith(prefix))


class DirectoryWorkloads:
    def __init__(self, root):
        self._store = SeriesStore(root, create=False)

    def get(self, name: str) -> TimeSeries:
        try:
            return self._store.get(name)
        except (NotFound, StoreError) as exc:
            raise WorkloadMissing(str(exc)) from exc

    def list(self, prefix: str = "") -> list[str]:
        return self._store.list(prefix)


class NetworkWorkloads:
    """Fetches series over the wire, one connection per provider instance."""

    def __init__(self, host: str, port: int):
        self._host = host
        self._port = port
        self._client = None

    def _connected(self) -> TimesClient:
        if self._client is None:
            try:
                self._client = TimesClient(self._host, self._port)
            except OSError as exc:
                raise WorkloadMissing(
                    f"cannot reach series store at {self._host}:{self._port}: {exc}"
                ) from exc
        return self._client

    def get(self, name: str) -> TimeSeries:
        try:
            return self._connected().get(name)
        except (NotFound, StoreError) as exc:
            raise WorkloadMissing(str(exc)) from exc

    def list(self, prefix: str = "") -> list[str]:
        try:
            return self._connected().list(prefix)
        except StoreError as exc:
            raise WorkloadMissing(str(exc)) from exc

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None


def open_workloads(source: str):
    """Open a workload source: an existing directory, else a HOST:PORT address.

    Each call returns a fresh provider, so parallel workers never share a
    connection.
    """
    if os.path.isdir(source):
        return DirectoryWorkloads(source)
    try:
        host, port = parse_address(source)
    except ValueError:
        raise WorkloadMissing(
            f"workload source {source!r} is neither a directory nor HOST:PORT"
        ) from None
    return NetworkWorkloads(host, port)
