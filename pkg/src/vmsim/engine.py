"""Deterministic discrete-event simulation core.

One simulation instance is strictly single-threaded: a virtual clock in
integer milliseconds, a message pump ordered by (time, insertion sequence),
the VM lifecycle driven by a schedule, live migrations with CPU overhead on
both endpoints, and metric accumulation.  Two runs with identical inputs and
seed produce identical results and identical event traces.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
import time
from dataclasses import dataclass
from enum import Enum

from vmsim.config import ConfigInvalid, SimulationConfig
from vmsim.controllers import ClusterView, ControllerError, resolve
from vmsim.model import (
    EmptySeries,
    TimeBeforeSeriesStart,
    estimate_demand,
    sample_at,
    server_utilization,
)
from vmsim.schedule import Schedule
from vmsim.workloads import WorkloadMissing


class EngineError(Exception):
    pass


class EventInPast(EngineError):
    pass


class AlreadyMigrating(EngineError):
    pass


class TargetMemoryExhausted(EngineError):
    pass


class EventKind(Enum):
    LOOP_TICK = "LoopTick"
    REALLOCATION_TICK = "ReallocationTick"
    ARRIVAL = "Arrival"
    DEPARTURE = "Departure"
    MIGRATION_DONE = "MigrationDone"


@dataclass(frozen=True)
class Event:
    time_ms: int
    seq: int
    kind: EventKind
    ref: str | int | None = None


class EventQueue:
    """The global message pump: total order by (time_ms, seq), seq by push order."""

    def __init__(self):
        self._heap = []
        self._next_seq = 0
        self.clock_ms = 0

    def __len__(self):
        return len(self._heap)

    def push(self, time_ms: int, kind: EventKind, ref=None) -> Event:
        if time_ms < self.clock_ms:
            raise EventInPast(f"event at {time_ms}ms pushed when clock is {self.clock_ms}ms")
        event = Event(time_ms, self._next_seq, kind, ref)
        self._next_seq += 1
        heapq.heappush(self._heap, (event.time_ms, event.seq, event))
        return event

    def peek_time(self) -> int:
        return self._heap[0][0]

    def pop(self) -> Event:
        _, _, event = heapq.heappop(self._heap)
        return event


@dataclass(frozen=True)
class Migration:
    id: int
    vm: str
    source: str
    target: str
    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError(f"migration of {self.vm!r} onto its own server")
        if self.end_ms < self.start_ms:
            raise ValueError("migration ends before it starts")


def migration_duration_ms(memory_mb: int, rate_mb_per_s: float) -> int:
    """Transfer time for a VM memory image; 0 MB completes instantly."""
    return math.ceil(memory_mb / rate_mb_per_s * 1000.0)


@dataclass
class MetricsAccumulator:
    loop_count: int = 0
    active_server_loop_sum: int = 0
    util_sample_sum: float = 0.0
    util_sample_count: int = 0
    overload_samples: int = 0
    active_samples: int = 0
    migrations_total: int = 0


@dataclass(frozen=True)
class SimulationResult:
    """One result row; ``message`` travels to the batch ERR file and is not
    part of the CSV column set."""

    sim_id: str
    initial_placement: str
    reallocation: str
    placement: str
    estimator: str
    seed: int
    schedule_id: str
    duration_s: int
    avg_active_servers: float
    avg_cpu_util_pct: float
    sla_violation_rate: float
    migration_count: int
    vm_count: int
    status: str
    wall_ms: int
    message: str = ""


def finalize_metrics(acc: MetricsAccumulator, **meta) -> SimulationResult:
    """Close out an accumulator; every ratio is 0.0 when its denominator is 0."""
    loops = acc.loop_count
    return SimulationResult(
        avg_active_servers=acc.active_server_loop_sum / loops if loops else 0.0,
        avg_cpu_util_pct=(acc.util_sample_sum / acc.util_sample_count
                          if acc.util_sample_count else 0.0),
        sla_violation_rate=(acc.overload_samples / acc.active_samples
                            if acc.active_samples else 0.0),
        migration_count=acc.migrations_total,
        **meta,
    )


def format_result_line(result: SimulationResult) -> str:
    return (f"RESULT avg_active_servers={result.avg_active_servers!r} "
            f"avg_cpu_util_pct={result.avg_cpu_util_pct!r} "
            f"sla_violation_rate={result.sla_violation_rate!r} "
            f"migrations={result.migration_count}")


class Simulation:
    """A single simulation run.

    ``initial_allocation`` overrides the initial placement controller with a
    fixed VM-to-server mapping for the VMs arriving at t=0; capacity checks by
    estimate are bypassed (the engine still enforces memory), which allows
    replaying a known allocation or constructing deliberately overloaded
    states.
    """

    def __init__(self, config: SimulationConfig, schedule: Schedule, workloads,
                 *, sim_id: str = "0", initial_allocation=None):
        self.config = config
        self.schedule = schedule
        self.workloads = workloads
        self.sim_id = sim_id
        self._preset = dict(initial_allocation) if initial_allocation is not None else None

        self.clock_ms = 0
        self.queue = EventQueue()
        self.live_vms = {}
        self.allocation = {}
        self.in_flight = []
        self.reserved_mb = {}
        self.acc = MetricsAccumulator()
        self.rng = random.Random(config.seed)
        self._trace = hashlib.sha256()
        self._series = {}
        self._specs = {}
        self._demands = {}
        self._next_migration_id = 1

    @property
    def trace_hash(self) -> str:
        return self._trace.hexdigest()

    # -- lifecycle ---------------------------------------------------------

    def run(self) -> SimulationResult:
        started = time.monotonic()
        status, message = "ok", ""
        try:
            self._setup()
            self._main_loop()
        except (ConfigInvalid, ControllerError, EngineError, WorkloadMissing,
                TimeBeforeSeriesStart, EmptySeries, ValueError) as exc:
            status = "failed"
            message = f"{type(exc).__name__}: {exc}"
        wall_ms = int((time.monotonic() - started) * 1000)
        return finalize_metrics(
            self.acc,
            sim_id=self.sim_id,
            initial_placement=self.config.initial_placement,
            reallocation=self.config.reallocation,
            placement=self.config.placement,
            estimator=self.config.estimator,
            seed=self.config.seed,
            schedule_id=self.schedule.id,
            duration_s=self.config.duration_s,
            vm_count=len(self.schedule.entries),
            status=status,
            wall_ms=wall_ms,
            message=message,
        )

    def _setup(self):
        config = self.config
        config.validate()
        self._servers = config.servers
        self._by_id = {s.id: s for s in self._servers}
        self.reserved_mb = {s.id: 0 for s in self._servers}

        self._initial = resolve(config.initial_placement, "initial")
        self._placement = resolve(config.placement, "placement")
        self._reallocation = resolve(config.reallocation, "reallocation",
                                     budget=config.exact_budget)

        for spec in self.schedule.vm_specs():
            self._specs[spec.id] = spec
            if spec.series_name not in self._series:
                self._series[spec.series_name] = self.workloads.get(spec.series_name)
        for vm_id, spec in self._specs.items():
            series = self._series[spec.series_name]
            self._demands[vm_id] = (
                estimate_demand(series, config.estimator, spec.size.cpu_units),
                spec.size.memory_mb,
            )

        initial_vms = [self._specs[e.vm] for e in self.schedule.entries if e.arrival_s == 0]
        if self._preset is not None:
            self._apply_preset(initial_vms)
        elif initial_vms:
            allocation = self._initial.place(initial_vms, self._servers,
                                             self._demands, self.rng)
            for spec in initial_vms:
                self._admit(spec, allocation[spec.id])

        duration_ms = config.duration_s * 1000
        for entry in sorted(self.schedule.entries, key=lambda e: (e.departure_s, e.vm)):
            self.queue.push(entry.departure_s * 1000, EventKind.DEPARTURE, entry.vm)
        for entry in self.schedule.entries:
            if entry.arrival_s > 0:
                self.queue.push(entry.arrival_s * 1000, EventKind.ARRIVAL, entry.vm)
        if self._reallocation is not None:
            interval_ms = config.reallocation_interval_s * 1000
            if interval_ms < duration_ms:
                self.queue.push(interval_ms, EventKind.REALLOCATION_TICK)
        if duration_ms > 0:
            self.queue.push(0, EventKind.LOOP_TICK)

    def _apply_preset(self, initial_vms):
        expected = {spec.id for spec in initial_vms}
        if set(self._preset) != expected:
            raise EngineError("initial_allocation must cover exactly the VMs arriving at t=0")
        for spec in initial_vms:
            target = self._preset[spec.id]
            if target not in self._by_id:
                raise EngineError(f"initial_allocation names unknown server {target!r}")
            self._admit(spec, target)

    def _admit(self, spec, server_id):
        self.live_vms[spec.id] = spec
        self.allocation[spec.id] = server_id

    def _main_loop(self):
        loop_ms = self.config.loop_interval_s * 1000
        duration_ms = self.config.duration_s * 1000
        while self.clock_ms < duration_ms:
            self._drain()
            self._sample_loop()
            self.clock_ms += loop_ms
            self.queue.clock_ms = self.clock_ms

    def _drain(self):
        """Process every pending event with time <= clock, in (time, seq) order."""
        while len(self.queue) and self.queue.peek_time() <= self.clock_ms:
            event = self.queue.pop()
            self._trace.update(
                f"{event.time_ms}|{event.kind.value}|{event.ref}\n".encode())
            self._handle(event)

    def _handle(self, event: Event):
        kind = event.kind
        if kind is EventKind.LOOP_TICK:
            next_ms = event.time_ms + self.config.loop_interval_s * 1000
            if next_ms < self.config.duration_s * 1000:
                self.queue.push(next_ms, EventKind.LOOP_TICK)
        elif kind is EventKind.ARRIVAL:
            self._handle_arrival(event.ref)
        elif kind is EventKind.DEPARTURE:
            self._handle_departure(event.ref)
        elif kind is EventKind.REALLOCATION_TICK:
            next_ms = event.time_ms + self.config.reallocation_interval_s * 1000
            if next_ms < self.config.duration_s * 1000:
                self.queue.push(next_ms, EventKind.REALLOCATION_TICK)
            self._handle_reallocation()
        elif kind is EventKind.MIGRATION_DONE:
            self._handle_migration_done(event.ref)

    def _handle_arrival(self, vm_id):
        spec = self._specs[vm_id]
        if self._placement is None:
            raise ControllerError(
                f"VM {vm_id!r} arrives mid-run but the placement controller is 'none'")
        cpu, mem = self._demands[vm_id]
        target = self._placement.place(vm_id, cpu, mem, self._view(), self.rng)
        self._admit(spec, target)

    def _handle_departure(self, vm_id):
        if vm_id not in self.live_vms:
            return
        for migration in list(self.in_flight):
            if migration.vm == vm_id:
                self.reserved_mb[migration.target] -= self.live_vms[vm_id].size.memory_mb
                self.in_flight.remove(migration)
        del self.live_vms[vm_id]
        del self.allocation[vm_id]

    def _handle_reallocation(self):
        if self._reallocation is None:
            return
        if self.in_flight:
            return  # planning against moving targets is skipped, not queued
        plan = self._reallocation.plan(self._view())
        for vm_id, target in plan.migrations:
            self.start_migration(vm_id, target)

    def _handle_migration_done(self, migration_id):
        migration = next((m for m in self.in_flight if m.id == migration_id), None)
        if migration is None:
            return  # cancelled by a departure
        self.allocation[migration.vm] = migration.target
        self.reserved_mb[migration.target] -= self.live_vms[migration.vm].size.memory_mb
        self.in_flight.remove(migration)

    # -- migrations --------------------------------------------------------

    def start_migration(self, vm_id: str, target_id: str) -> Migration:
        if vm_id not in self.live_vms:
            raise EngineError(f"VM {vm_id!r} is not live")
        if any(m.vm == vm_id for m in self.in_flight):
            raise AlreadyMigrating(f"VM {vm_id!r} is already migrating")
        if target_id not in self._by_id:
            raise EngineError(f"unknown migration target {target_id!r}")
        source_id = self.allocation[vm_id]
        if target_id == source_id:
            raise EngineError(f"VM {vm_id!r} is already resident on {target_id!r}")
        spec = self.live_vms[vm_id]
        target = self._by_id[target_id]
        mem_in_use = self._resident_memory(target_id) + self.reserved_mb[target_id]
        if mem_in_use + spec.size.memory_mb > target.memory_mb:
            raise TargetMemoryExhausted(
                f"{target_id!r} holds {mem_in_use} MB of {target.memory_mb} MB; "
                f"no room for {spec.size.memory_mb} MB")
        duration = migration_duration_ms(spec.size.memory_mb,
                                         self.config.migration_rate_mb_per_s)
        migration = Migration(
            id=self._next_migration_id,
            vm=vm_id,
            source=source_id,
            target=target_id,
            start_ms=self.clock_ms,
            end_ms=self.clock_ms + duration,
        )
        self._next_migration_id += 1
        self.reserved_mb[target_id] += spec.size.memory_mb
        self.in_flight.append(migration)
        self.acc.migrations_total += 1
        self.queue.push(migration.end_ms, EventKind.MIGRATION_DONE, migration.id)
        return migration

    # -- sampling ----------------------------------------------------------

    def _current_load(self, vm_id: str) -> float:
        spec = self.live_vms[vm_id]
        series = self._series[spec.series_name]
        t_s = self.clock_ms // 1000
        return sample_at(series, t_s) / 100.0 * spec.size.cpu_units

    def _resident_memory(self, server_id: str) -> int:
        return sum(self.live_vms[vm].size.memory_mb
                   for vm, sid in self.allocation.items() if sid == server_id)

    def _view(self) -> ClusterView:
        incoming_cpu = {}
        for migration in self.in_flight:
            cpu, _ = self._demands[migration.vm]
            incoming_cpu[migration.target] = incoming_cpu.get(migration.target, 0.0) + cpu
        return ClusterView(
            servers=self._servers,
            vm_cpu_demand={vm: self._demands[vm][0] for vm in self.live_vms},
            vm_memory_mb={vm: self._demands[vm][1] for vm in self.live_vms},
            residence=dict(self.allocation),
            incoming_cpu=incoming_cpu,
            reserved_mb={sid: mb for sid, mb in self.reserved_mb.items() if mb},
        )

    def _sample_loop(self):
        self._check_invariants()
        loads = {s.id: [] for s in self._servers}
        for vm_id, server_id in self.allocation.items():
            loads[server_id].append(self._current_load(vm_id))
        overheads = {s.id: [] for s in self._servers}
        migrating = set()
        for migration in self.in_flight:
            overhead = self.config.migration_cpu_overhead_frac * self._current_load(migration.vm)
            overheads[migration.source].append(overhead)
            overheads[migration.target].append(overhead)
            migrating.update((migration.source, migration.target))

        active = [s for s in self._servers if loads[s.id] or s.id in migrating]
        for spec in active:
            utilization = server_utilization(spec, loads[spec.id], overheads[spec.id])
            self.acc.util_sample_sum += utilization
            self.acc.util_sample_count += 1
            self.acc.active_samples += 1
            if utilization > self.config.sla_threshold_pct:
                self.acc.overload_samples += 1
        self.acc.active_server_loop_sum += len(active)
        self.acc.loop_count += 1

    def _check_invariants(self):
        # Residency conservation and memory safety at every loop boundary.
        assert set(self.allocation) == set(self.live_vms)
        for vm_id, server_id in self.allocation.items():
            assert server_id in self._by_id, f"{vm_id} resident on unknown server"
        for spec in self._servers:
            in_use = self._resident_memory(spec.id) + self.reserved_mb[spec.id]
            assert in_use <= spec.memory_mb, (
                f"{spec.id}: {in_use} MB in use exceeds {spec.memory_mb} MB")


def run_simulation(config: SimulationConfig, schedule: Schedule, workloads,
                   *, sim_id: str = "0", initial_allocation=None) -> SimulationResult:
    return Simulation(config, schedule, workloads, sim_id=sim_id,
                      initial_allocation=initial_allocation).run()
