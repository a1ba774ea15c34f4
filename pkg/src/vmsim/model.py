"""Domain types and pure functions shared by every other module.

Capacities, workload sampling, per-server load computation and demand
estimation live here.  All types are immutable after construction and all
operations are pure, so values can be shared freely between threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

ESTIMATOR_KINDS = ("max", "mean", "p95", "p99")

# Probabilities of a size catalog must sum to 1 within this tolerance.
CATALOG_PROB_TOL = 1e-9


class TimeBeforeSeriesStart(Exception):
    """Sample requested for a time before the series begins."""


class EmptySeries(Exception):
    """Operation needs at least one sample."""


@dataclass(frozen=True)
class TimeSeries:
    """A named CPU-utilization trace sampled at a fixed interval.

    Samples are percent of the owning VM's CPU capacity, each in [0, 100].
    Out-of-range or non-finite samples are rejected at construction, not
    clamped, so corrupt workload data surfaces immediately.
    """

    name: str
    start_s: int
    interval_s: int
    samples: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if self.interval_s < 1:
            raise ValueError(f"interval_s must be >= 1, got {self.interval_s}")
        for i, s in enumerate(self.samples):
            if not math.isfinite(s) or not 0.0 <= s <= 100.0:
                raise ValueError(f"samples[{i}]={s!r} outside [0, 100]")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class DomainSize:
    """A VM flavor: CPU units, memory, and how often it occurs in a catalog."""

    cpu_units: int
    memory_mb: int
    probability: float = 1.0

    def __post_init__(self):
        if self.cpu_units <= 0:
            raise ValueError(f"cpu_units must be positive, got {self.cpu_units}")
        if self.memory_mb <= 0:
            raise ValueError(f"memory_mb must be positive, got {self.memory_mb}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")


def validate_size_catalog(sizes) -> None:
    """Check that catalog probabilities sum to 1 within tolerance."""
    if not sizes:
        raise ValueError("size catalog is empty")
    total = sum(s.probability for s in sizes)
    if abs(total - 1.0) > CATALOG_PROB_TOL:
        raise ValueError(f"size catalog probabilities sum to {total!r}, expected 1.0")


@dataclass(frozen=True)
class ServerSpec:
    """A physical server: total CPU units, memory, and its own base demand."""

    id: str
    cpu_units: int
    memory_mb: int
    base_cpu_units: int = 0

    def __post_init__(self):
        if self.cpu_units <= 0:
            raise ValueError(f"cpu_units must be positive, got {self.cpu_units}")
        if self.memory_mb <= 0:
            raise ValueError(f"memory_mb must be positive, got {self.memory_mb}")
        if self.base_cpu_units < 0:
            raise ValueError("base_cpu_units must be non-negative")
        if self.base_cpu_units >= self.cpu_units:
            raise ValueError(
                f"base_cpu_units {self.base_cpu_units} leaves no placement capacity "
                f"on a {self.cpu_units}-unit server"
            )

    @property
    def placement_cpu_units(self) -> int:
        """CPU units available to VMs after the server's own base demand."""
        return self.cpu_units - self.base_cpu_units


@dataclass(frozen=True)
class VmSpec:
    """A concrete VM instance bound to a flavor and a workload trace."""

    id: str
    size: DomainSize
    series_name: str


# A VM allocation maps each VM id to the id of the server hosting it.
Allocation = dict[str, str]


def nearest_rank(sorted_samples: tuple[float, ...], p: float) -> float:
    """Nearest-rank quantile: the value at 1-based index ceil(p * n)."""
    n = len(sorted_samples)
    if n == 0:
        raise EmptySeries("quantile of empty sample list")
    rank = math.ceil(p * n)
    rank = min(max(rank, 1), n)
    return sorted_samples[rank - 1]


def series_statistic(samples: tuple[float, ...], kind: str) -> float:
    if not samples:
        raise EmptySeries(f"cannot compute {kind!r} of an empty series")
    if kind == "max":
        return max(samples)
    if kind == "mean":
        return sum(samples) / len(samples)
    if kind == "p95":
        return nearest_rank(tuple(sorted(samples)), 0.95)
    if kind == "p99":
        return nearest_rank(tuple(sorted(samples)), 0.99)
    raise ValueError(f"unknown estimator kind {kind!r}, expected one of {ESTIMATOR_KINDS}")


def sample_at(series: TimeSeries, t_s: int) -> float:
    """Utilization percent at virtual time ``t_s``.

    Piecewise constant per sampling interval; past the last sample the series
    holds its final value so schedules may outlive short traces.
    """
    if t_s < series.start_s:
        raise TimeBeforeSeriesStart(
            f"t={t_s}s is before series {series.name!r} start {series.start_s}s"
        )
    if not series.samples:
        raise EmptySeries(f"series {series.name!r} has no samples")
    index = (t_s - series.start_s) // series.interval_s
    if index >= len(series.samples):
        return series.samples[-1]
    return series.samples[index]


def estimate_demand(series: TimeSeries, estimator: str, vm_cpu_units: int) -> float:
    """Reserved CPU demand of a VM in cpu-units under the given estimator."""
    return series_statistic(series.samples, estimator) / 100.0 * vm_cpu_units


def server_utilization(spec: ServerSpec, resident_loads, migration_overheads=()) -> float:
    """Server CPU utilization percent for one simulation loop.

    Sum of resident VM loads plus migration overheads plus the server's base
    demand, relative to total capacity.  Deliberately not clamped: values
    above 100 signal overload.
    """
    total = spec.base_cpu_units + sum(resident_loads) + sum(migration_overheads)
    return total / spec.cpu_units * 100.0


def load_series_csv(name: str, path) -> TimeSeries:
    """Import a workload trace from CSV with header ``t_s,util_pct``.

    The sampling interval is inferred from the first two rows and must stay
    constant; at least two rows are therefore required.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "util_pct"]:
            raise ValueError(f"expected header 't_s,util_pct', got {header!r}")
        rows = [(int(t), float(u)) for t, u in reader]
    if len(rows) < 2:
        raise ValueError("need at least two rows to infer the sampling interval")
    start_s = rows[0][0]
    interval_s = rows[1][0] - rows[0][0]
    if interval_s < 1:
        raise ValueError(f"non-increasing timestamps: inferred interval {interval_s}")
    for i, (t, _) in enumerate(rows):
        if t != start_s + i * interval_s:
            raise ValueError(f"row {i}: t_s={t}, interval is not constant")
    return TimeSeries(name=name, start_s=start_s, interval_s=interval_s,
                      samples=tuple(u for _, u in rows))


def dump_series_csv(series: TimeSeries, fh) -> None:
    """Write a trace in the same CSV format accepted by load_series_csv."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t_s", "util_pct"])
    for i, s in enumerate(series.samples):
        writer.writerow([series.start_s + i * series.interval_s, repr(s)])
