"""Shared builders for tests."""

from __future__ import annotations

from vmsim.config import SimulationConfig
from vmsim.model import DomainSize, ServerSpec, TimeSeries, VmSpec
from vmsim.schedule import Schedule, ScheduleEntry
from vmsim.workloads import MemoryWorkloads


def constant_series(name: str, pct: float, n: int = 8, interval_s: int = 3) -> TimeSeries:
    return TimeSeries(name=name, start_s=0, interval_s=interval_s, samples=(pct,) * n)


def servers(count: int, cpu: int = 100, mem: int = 8192, base: int = 0):
    return tuple(ServerSpec(id=f"s{i + 1}", cpu_units=cpu, memory_mb=mem,
                            base_cpu_units=base) for i in range(count))


def size(cpu: int, mem: int = 512) -> DomainSize:
    return DomainSize(cpu_units=cpu, memory_mb=mem, probability=1.0)


def vm(vm_id: str, cpu: int, series: str, mem: int = 512) -> VmSpec:
    return VmSpec(id=vm_id, size=size(cpu, mem), series_name=series)


def schedule_of(entries, sizes, horizon_s: int, schedule_id: str = "test") -> Schedule:
    """entries: (vm, arrival_s, departure_s, size_index, series)."""
    return Schedule(
        id=schedule_id,
        horizon_s=horizon_s,
        sizes=tuple(sizes),
        entries=tuple(ScheduleEntry(*e) for e in entries),
    )


def config_of(**overrides) -> SimulationConfig:
    base = dict(
        initial_placement="firstfit",
        estimator="max",
        duration_s=30,
        servers=servers(1),
    )
    base.update(overrides)
    return SimulationConfig(**base)


def workloads_of(*series: TimeSeries) -> MemoryWorkloads:
    return MemoryWorkloads({s.name: s for s in series})
