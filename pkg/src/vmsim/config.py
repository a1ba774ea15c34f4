"""Declarative simulation configuration: one JSON file configures a run.

Everything is explicit -- controllers, estimator, server population, timing,
migration model, workload source -- so a config file plus a schedule file
fully determines a simulation.  Unknown fields are rejected and every
validation error names the offending field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from vmsim.model import ESTIMATOR_KINDS, ServerSpec
from vmsim.solver import SolveBudget

DEFAULT_LOOP_INTERVAL_S = 3
DEFAULT_REALLOCATION_INTERVAL_S = 1800
DEFAULT_SLA_THRESHOLD_PCT = 100.0
DEFAULT_MIGRATION_RATE_MB_PER_S = 100.0
DEFAULT_MIGRATION_CPU_OVERHEAD_FRAC = 0.1


class ConfigInvalid(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SimulationConfig:
    initial_placement: str
    estimator: str
    duration_s: int
    reallocation: str = "none"
    placement: str = "none"
    loop_interval_s: int = DEFAULT_LOOP_INTERVAL_S
    reallocation_interval_s: int = DEFAULT_REALLOCATION_INTERVAL_S
    sla_threshold_pct: float = DEFAULT_SLA_THRESHOLD_PCT
    seed: int = 0
    servers: tuple[ServerSpec, ...] = ()
    migration_rate_mb_per_s: float = DEFAULT_MIGRATION_RATE_MB_PER_S
    migration_cpu_overhead_frac: float = DEFAULT_MIGRATION_CPU_OVERHEAD_FRAC
    schedule_path: str | None = None
    workloads: str | None = None
    exact_budget: SolveBudget = field(default_factory=SolveBudget)

    def validate(self) -> None:
        if self.loop_interval_s <= 0:
            raise ConfigInvalid("loop_interval_s", "must be positive")
        if self.reallocation_interval_s <= 0:
            raise ConfigInvalid("reallocation_interval_s", "must be positive")
        if self.duration_s < 0:
            raise ConfigInvalid("duration_s", "must be non-negative")
        if self.duration_s % self.loop_interval_s != 0:
            raise ConfigInvalid(
                "duration_s",
                f"{self.duration_s} is not a multiple of loop_interval_s "
                f"{self.loop_interval_s}",
            )
        if self.estimator not in ESTIMATOR_KINDS:
            raise ConfigInvalid("estimator",
                                f"{self.estimator!r} not one of {ESTIMATOR_KINDS}")
        if not self.servers:
            raise ConfigInvalid("servers", "at least one server is required")
        if self.sla_threshold_pct <= 0:
            raise ConfigInvalid("sla_threshold_pct", "must be positive")
        if self.migration_rate_mb_per_s <= 0:
            raise ConfigInvalid("migration.rate_mb_per_s", "must be positive")
        if self.migration_cpu_overhead_frac < 0:
            raise ConfigInvalid("migration.cpu_overhead_frac", "must be non-negative")

    def replace(self, **changes) -> "SimulationConfig":
        from dataclasses import replace

        return replace(self, **changes)


def _expect(value, kind, path):
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigInvalid(path, f"expected {kind.__name__ if isinstance(kind, type) else 'number'}, "
                                  f"got {type(value).__name__}")
    return value


def _check_fields(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigInvalid(path, f"expected object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigInvalid(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0],
                            "unknown field")


_TOP_FIELDS = {
    "initial_placement", "reallocation", "placement", "estimator",
    "loop_interval_s", "reallocation_interval_s", "duration_s", "seed",
    "sla_threshold_pct", "servers", "server_list", "migration", "schedule",
    "workloads", "exact_budget",
}
_SERVERS_FIELDS = {"count", "cpu_units", "memory_mb", "base_cpu_units"}
_SERVER_ITEM_FIELDS = {"id", "cpu_units", "memory_mb", "base_cpu_units"}
_MIGRATION_FIELDS = {"rate_mb_per_s", "cpu_overhead_frac"}
_BUDGET_FIELDS = {"max_nodes", "max_wall_ms"}


def _build_servers(document) -> tuple[ServerSpec, ...]:
    homogeneous = document.get("servers")
    explicit = document.get("server_list")
    if (homogeneous is None) == (explicit is None):
        raise ConfigInvalid("servers", "exactly one of 'servers' or 'server_list' is required")
    specs = []
    try:
        if homogeneous is not None:
            _check_fields(homogeneous, _SERVERS_FIELDS, "servers")
            count = _expect(homogeneous.get("count"), int, "servers.count")
            if count < 1:
                raise ConfigInvalid("servers.count", "must be >= 1")
            for i in range(count):
                specs.append(ServerSpec(
                    id=f"s{i + 1}",
                    cpu_units=_expect(homogeneous.get("cpu_units"), int, "servers.cpu_units"),
                    memory_mb=_expect(homogeneous.get("memory_mb"), int, "servers.memory_mb"),
                    base_cpu_units=_expect(homogeneous.get("base_cpu_units", 0), int,
                                           "servers.base_cpu_units"),
                ))
        else:
            _expect(explicit, list, "server_list")
            for i, item in enumerate(explicit):
                path = f"server_list[{i}]"
                _check_fields(item, _SERVER_ITEM_FIELDS, path)
                specs.append(ServerSpec(
                    id=_expect(item.get("id"), str, f"{path}.id"),
                    cpu_units=_expect(item.get("cpu_units"), int, f"{path}.cpu_units"),
                    memory_mb=_expect(item.get("memory_mb"), int, f"{path}.memory_mb"),
                    base_cpu_units=_expect(item.get("base_cpu_units", 0), int,
                                           f"{path}.base_cpu_units"),
                ))
    except ValueError as exc:
        raise ConfigInvalid("servers", str(exc)) from None
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ConfigInvalid("server_list", "duplicate server ids")
    return tuple(specs)


def config_from_dict(document: dict) -> SimulationConfig:
    _check_fields(document, _TOP_FIELDS, "")
    for name in ("initial_placement", "estimator", "duration_s"):
        if name not in document:
            raise ConfigInvalid(name, "missing required field")

    migration = document.get("migration", {})
    _check_fields(migration, _MIGRATION_FIELDS, "migration")
    budget_doc = document.get("exact_budget", {})
    _check_fields(budget_doc, _BUDGET_FIELDS, "exact_budget")
    for key in _BUDGET_FIELDS:
        value = budget_doc.get(key)
        if value is not None:
            _expect(value, int, f"exact_budget.{key}")
    try:
        budget = SolveBudget(max_nodes=budget_doc.get("max_nodes"),
                             max_wall_ms=budget_doc.get("max_wall_ms"))
    except ValueError as exc:
        raise ConfigInvalid("exact_budget", str(exc)) from None

    config = SimulationConfig(
        initial_placement=_expect(document["initial_placement"], str, "initial_placement"),
        reallocation=_expect(document.get("reallocation", "none"), str, "reallocation"),
        placement=_expect(document.get("placement", "none"), str, "placement"),
        estimator=_expect(document["estimator"], str, "estimator"),
        loop_interval_s=_expect(document.get("loop_interval_s", DEFAULT_LOOP_INTERVAL_S),
                                int, "loop_interval_s"),
        reallocation_interval_s=_expect(
            document.get("reallocation_interval_s", DEFAULT_REALLOCATION_INTERVAL_S),
            int, "reallocation_interval_s"),
        duration_s=_expect(document["duration_s"], int, "duration_s"),
        seed=_expect(document.get("seed", 0), int, "seed"),
        sla_threshold_pct=float(_expect(document.get("sla_threshold_pct",
                                                     DEFAULT_SLA_THRESHOLD_PCT),
                                        (int, float), "sla_threshold_pct")),
        servers=_build_servers(document),
        migration_rate_mb_per_s=float(_expect(
            migration.get("rate_mb_per_s", DEFAULT_MIGRATION_RATE_MB_PER_S),
            (int, float), "migration.rate_mb_per_s")),
        migration_cpu_overhead_frac=float(_expect(
            migration.get("cpu_overhead_frac", DEFAULT_MIGRATION_CPU_OVERHEAD_FRAC),
            (int, float), "migration.cpu_overhead_frac")),
        schedule_path=document.get("schedule"),
        workloads=document.get("workloads"),
        exact_budget=budget,
    )
    if config.schedule_path is not None:
        _expect(config.schedule_path, str, "schedule")
    if config.workloads is not None:
        _expect(config.workloads, str, "workloads")
    config.validate()
    return config


def config_to_dict(config: SimulationConfig) -> dict:
    """Canonical document form; config_from_dict inverts it."""
    document = {
        "initial_placement": config.initial_placement,
        "reallocation": config.reallocation,
        "placement": config.placement,
        "estimator": config.estimator,
        "loop_interval_s": config.loop_interval_s,
        "reallocation_interval_s": config.reallocation_interval_s,
        "duration_s": config.duration_s,
        "seed": config.seed,
        "sla_threshold_pct": config.sla_threshold_pct,
        "server_list": [
            {"id": s.id, "cpu_units": s.cpu_units, "memory_mb": s.memory_mb,
             "base_cpu_units": s.base_cpu_units}
            for s in config.servers
        ],
        "migration": {
            "rate_mb_per_s": config.migration_rate_mb_per_s,
            "cpu_overhead_frac": config.migration_cpu_overhead_frac,
        },
        "exact_budget": {
            "max_nodes": config.exact_budget.max_nodes,
            "max_wall_ms": config.exact_budget.max_wall_ms,
        },
    }
    if config.schedule_path is not None:
        document["schedule"] = config.schedule_path
    if config.workloads is not None:
        document["workloads"] = config.workloads
    return document


def load_config(path) -> SimulationConfig:
    try:
        with open(path) as fh:
            document = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(str(path), f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(str(path), f"config is not valid JSON: {exc}") from exc
    return config_from_dict(document)
