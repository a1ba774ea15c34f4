"""VM arrival-departure schedules: document format, validation and builder.

A schedule binds every VM to a flavor from its size catalog and to a named
workload trace.  Schedules are stored as JSON documents; the builder
generates them procedurally from a Poisson arrival process with exponential
(or fixed) lifetimes, fully deterministic for a given seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from vmsim.model import DomainSize, VmSpec, validate_size_catalog


class ScheduleError(Exception):
    pass


class ParseError(ScheduleError):
    pass


class SchemaError(ScheduleError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class InvalidParams(ScheduleError):
    pass


@dataclass(frozen=True)
class ScheduleEntry:
    vm: str
    arrival_s: int
    departure_s: int
    size_index: int
    series: str


@dataclass(frozen=True)
class Schedule:
    """Entries must be sorted by (arrival_s, vm) with unique VM ids; use
    validate_schedule to check data assembled outside the loader/builder."""

    id: str
    horizon_s: int
    sizes: tuple[DomainSize, ...]
    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.horizon_s < 0:
            raise ValueError("horizon_s must be non-negative")

    def vm_specs(self) -> list[VmSpec]:
        return [VmSpec(id=e.vm, size=self.sizes[e.size_index], series_name=e.series)
                for e in self.entries]


@dataclass(frozen=True)
class BuilderParams:
    arrival_rate_per_s: float
    mean_lifetime_s: float
    horizon_s: int
    sizes: tuple[DomainSize, ...]
    series_pool: tuple[str, ...]
    seed: int
    lifetime_dist: str = "exponential"
    schedule_id: str = "generated"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        object.__setattr__(self, "series_pool", tuple(self.series_pool))
        if self.arrival_rate_per_s <= 0:
            raise InvalidParams("arrival_rate_per_s must be positive")
        if self.mean_lifetime_s <= 0:
            raise InvalidParams("mean_lifetime_s must be positive")
        if self.horizon_s < 0:
            raise InvalidParams("horizon_s must be non-negative")
        if self.lifetime_dist not in ("exponential", "fixed"):
            raise InvalidParams(f"unknown lifetime_dist {self.lifetime_dist!r}")
        if not self.series_pool:
            raise InvalidParams("series_pool must not be empty")
        try:
            validate_size_catalog(self.sizes)
        except ValueError as exc:
            raise InvalidParams(str(exc)) from None


def _draw_size_index(sizes, u: float) -> int:
    cumulative = 0.0
    for i, size in enumerate(sizes):
        cumulative += size.probability
        if u < cumulative:
            return i
    return len(sizes) - 1


def build_schedule(params: BuilderParams) -> Schedule:
    """Generate a schedule; identical params and seed give identical output.

    Arrivals follow exponential inter-arrival times with the configured rate;
    lifetimes are truncated at the horizon so every VM departs before the
    schedule ends.  Series are assigned round-robin over a seeded shuffle of
    the pool; VM ids are zero-padded so lexicographic order equals arrival
    order.
    """
    rng = random.Random(params.seed)
    pool = list(params.series_pool)
    rng.shuffle(pool)
    entries = []
    t = 0.0
    k = 0
    while True:
        t += rng.expovariate(params.arrival_rate_per_s)
        if t >= params.horizon_s:
            break
        arrival = int(t)
        if params.lifetime_dist == "exponential":
            lifetime = rng.expovariate(1.0 / params.mean_lifetime_s)
        else:
            lifetime = params.mean_lifetime_s
        departure = min(params.horizon_s, arrival + max(1, math.ceil(lifetime)))
        size_index = _draw_size_index(params.sizes, rng.random())
        entries.append(ScheduleEntry(
            vm=f"vm{k:05d}",
            arrival_s=arrival,
            departure_s=departure,
            size_index=size_index,
            series=pool[k % len(pool)],
        ))
        k += 1
    return Schedule(id=params.schedule_id, horizon_s=params.horizon_s,
                    sizes=params.sizes, entries=tuple(entries))


_TOP_FIELDS = {"id", "horizon_s", "sizes", "entries"}
_SIZE_FIELDS = {"cpu_units", "memory_mb", "probability"}
_ENTRY_FIELDS = {"vm", "arrival_s", "departure_s", "size", "series"}


def _expect(value, kind, path):
    # bool is an int subclass; schedules never carry booleans.
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(path, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _check_fields(obj, allowed, path):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    missing = allowed - set(obj)
    if missing:
        raise SchemaError(f"{path}.{sorted(missing)[0]}", "missing field")


def load_schedule(document: dict) -> Schedule:
    """Parse and validate a schedule document; unknown fields are rejected."""
    _check_fields(document, _TOP_FIELDS, "schedule")
    sid = _expect(document["id"], str, "schedule.id")
    horizon = _expect(document["horizon_s"], int, "schedule.horizon_s")
    sizes_doc = _expect(document["sizes"], list, "schedule.sizes")
    sizes = []
    for i, sd in enumerate(sizes_doc):
        path = f"sizes[{i}]"
        _check_fields(sd, _SIZE_FIELDS, path)
        try:
            sizes.append(DomainSize(
                cpu_units=_expect(sd["cpu_units"], int, f"{path}.cpu_units"),
                memory_mb=_expect(sd["memory_mb"], int, f"{path}.memory_mb"),
                probability=float(_expect(sd["probability"], (int, float),
                                          f"{path}.probability")),
            ))
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None
    entries_doc = _expect(document["entries"], list, "schedule.entries")
    entries = []
    seen = set()
    previous = None
    for i, ed in enumerate(entries_doc):
        path = f"entries[{i}]"
        _check_fields(ed, _ENTRY_FIELDS, path)
        vm = _expect(ed["vm"], str, f"{path}.vm")
        arrival = _expect(ed["arrival_s"], int, f"{path}.arrival_s")
        departure = _expect(ed["departure_s"], int, f"{path}.departure_s")
        if arrival < 0:
            raise SchemaError(f"{path}.arrival_s", "must be non-negative")
        if departure <= arrival:
            raise SchemaError(f"{path}.departure_s",
                              f"departure {departure} not after arrival {arrival}")
        if departure > horizon:
            raise SchemaError(f"{path}.departure_s",
                              f"departure {departure} beyond horizon {horizon}")
        size_index = _expect(ed["size"], int, f"{path}.size")
        if not 0 <= size_index < len(sizes):
            raise SchemaError(f"{path}.size", f"index {size_index} out of range")
        if vm in seen:
            raise SchemaError(f"{path}.vm", f"duplicate VM id {vm!r}")
        seen.add(vm)
        if previous is not None and (arrival, vm) < previous:
            raise SchemaError(f"{path}.arrival_s",
                              "entries are not sorted by (arrival_s, vm)")
        previous = (arrival, vm)
        entries.append(ScheduleEntry(
            vm=vm,
            arrival_s=arrival,
            departure_s=departure,
            size_index=size_index,
            series=_expect(ed["series"], str, f"{path}.series"),
        ))
    try:
        return Schedule(id=sid, horizon_s=horizon, sizes=tuple(sizes),
                        entries=tuple(entries))
    except ValueError as exc:
        raise SchemaError("schedule", str(exc)) from None


def save_schedule(schedule: Schedule) -> dict:
    """Inverse of load_schedule: load(save(s)) == s."""
    return {
        "id": schedule.id,
        "horizon_s": schedule.horizon_s,
        "sizes": [
            {"cpu_units": s.cpu_units, "memory_mb": s.memory_mb,
             "probability": s.probability}
            for s in schedule.sizes
        ],
        "entries": [
            {"vm": e.vm, "arrival_s": e.arrival_s, "departure_s": e.departure_s,
             "size": e.size_index, "series": e.series}
            for e in schedule.entries
        ],
    }


def read_schedule(path) -> Schedule:
    try:
        with open(path) as fh:
            document = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read schedule {path}: {exc}") from exc
    return load_schedule(document)


def write_schedule(schedule: Schedule, path) -> None:
    with open(path, "w") as fh:
        json.dump(save_schedule(schedule), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str

    def __str__(self):
        return f"{self.kind}({self.subject})"


def validate_schedule(schedule: Schedule, available_series) -> list[Violation]:
    """Data-level check; violations are returned, never raised.

    Empty result means every schedule invariant holds and every referenced
    series exists in the given catalog.
    """
    violations = []
    available = set(available_series)
    seen = set()
    previous = None
    for i, e in enumerate(schedule.entries):
        if e.vm in seen:
            violations.append(Violation("DuplicateVm", e.vm))
        seen.add(e.vm)
        if not 0 <= e.arrival_s < e.departure_s <= schedule.horizon_s:
            violations.append(Violation("BadBounds", e.vm))
        if not 0 <= e.size_index < len(schedule.sizes):
            violations.append(Violation("BadSizeIndex", e.vm))
        key = (e.arrival_s, e.vm)
        if previous is not None and key < previous:
            violations.append(Violation("UnsortedEntries", f"entries[{i}]"))
        previous = key
        if e.series not in available:
            violations.append(Violation("MissingSeries", e.series))
    return violations
