"""Batch experiment harness.

Builds the factor-level matrix over controller, estimator and seed lists,
runs every combination in an isolated worker, and writes one CSV of
successful results plus an ERR file of failed configurations.  Existing
outputs are rotated to ``.bak`` first.  Workers buffer their results and the
collector writes everything sorted by sim_id at the end, so batch output is
byte-identical across parallelism levels.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from vmsim.config import SimulationConfig
from vmsim.engine import SimulationResult, run_simulation
from vmsim.workloads import open_workloads

CSV_HEADER = [
    "sim_id", "initial_placement", "reallocation", "placement", "estimator",
    "seed", "schedule_id", "duration_s", "avg_active_servers",
    "avg_cpu_util_pct", "sla_violation_rate", "migration_count", "vm_count",
    "status", "wall_ms",
]


class RunnerError(Exception):
    pass


class EmptyFactor(RunnerError):
    pass


class OutputUnwritable(RunnerError):
    pass


class RotationFailed(RunnerError):
    pass


@dataclass(frozen=True)
class FactorLists:
    initial: tuple[str, ...]
    reallocation: tuple[str, ...]
    placement: tuple[str, ...]
    estimators: tuple[str, ...]
    seeds: tuple[int, ...]

    def __post_init__(self):
        for name in ("initial", "reallocation", "placement", "estimators", "seeds"):
            values = tuple(getattr(self, name))
            object.__setattr__(self, name, values)
            if not values:
                raise EmptyFactor(f"factor list {name!r} is empty")
            if len(set(values)) != len(values):
                raise ValueError(f"factor list {name!r} contains duplicates")


@dataclass(frozen=True)
class Combination:
    sim_id: str
    initial: str
    reallocation: str
    placement: str
    estimator: str
    seed: int


def build_matrix(lists: FactorLists) -> list[Combination]:
    """Full cross product, ordered by list positions; sim_id is the rank."""
    product = [
        (i, r, p, e, s)
        for i in lists.initial
        for r in lists.reallocation
        for p in lists.placement
        for e in lists.estimators
        for s in lists.seeds
    ]
    width = len(str(len(product)))
    return [
        Combination(sim_id=f"{rank:0{width}d}", initial=i, reallocation=r,
                    placement=p, estimator=e, seed=s)
        for rank, (i, r, p, e, s) in enumerate(product)
    ]


def rotate_outputs(path) -> None:
    """Move an existing file to ``path + '.bak'``, replacing any previous backup."""
    path = Path(path)
    if not path.exists():
        return
    try:
        os.replace(path, str(path) + ".bak")
    except OSError as exc:
        raise RotationFailed(f"cannot rotate {path}: {exc}") from exc


def result_csv_row(result: SimulationResult) -> list[str]:
    return [
        result.sim_id, result.initial_placement, result.reallocation,
        result.placement, result.estimator, str(result.seed),
        result.schedule_id, str(result.duration_s),
        repr(result.avg_active_servers), repr(result.avg_cpu_util_pct),
        repr(result.sla_violation_rate), str(result.migration_count),
        str(result.vm_count), result.status, str(result.wall_ms),
    ]


@dataclass(frozen=True)
class BatchSummary:
    total: int
    succeeded: int
    failed: int
    csv_path: str
    err_path: str
    wall_ms: int


def _run_combination(combination: Combination, base_config: SimulationConfig,
                     schedule, workloads_factory):
    config = base_config.replace(
        initial_placement=combination.initial,
        reallocation=combination.reallocation,
        placement=combination.placement,
        estimator=combination.estimator,
        seed=combination.seed,
    )
    return run_simulation(config, schedule, workloads_factory(),
                          sim_id=combination.sim_id)


def run_batch(matrix, base_config: SimulationConfig, schedule, workloads,
              parallelism: int, csv_path, err_path) -> BatchSummary:
    """Run every combination; one worker crash never kills the batch.

    ``workloads`` is a source string (directory or HOST:PORT) or a zero-arg
    factory; each worker gets its own provider instance.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if callable(workloads):
        factory = workloads
    else:
        factory = lambda: open_workloads(workloads)

    for path in (csv_path, err_path):
        parent = Path(path).resolve().parent
        if not parent.is_dir():
            raise OutputUnwritable(f"output directory {parent} does not exist")

    started = time.monotonic()
    rows = {}
    failures = {}
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = {
            pool.submit(_run_combination, combo, base_config, schedule, factory): combo
            for combo in matrix
        }
        for future in as_completed(futures):
            combo = futures[future]
            try:
                result = future.result()
            except Exception as exc:  # worker isolation: any crash is one failure
                failures[combo.sim_id] = (combo, f"{type(exc).__name__}: {exc}")
                continue
            if result.status == "ok":
                rows[combo.sim_id] = result
            else:
                failures[combo.sim_id] = (combo, result.message)

    rotate_outputs(csv_path)
    rotate_outputs(err_path)
    try:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for sim_id in sorted(rows):
                writer.writerow(result_csv_row(rows[sim_id]))
        if failures:
            with open(err_path, "w") as fh:
                for sim_id in sorted(failures):
                    combo, message = failures[sim_id]
                    fields = (sim_id, combo.initial, combo.reallocation,
                              combo.placement, combo.estimator, str(combo.seed),
                              message.replace("\t", " ").replace("\n", " "))
                    fh.write("\t".join(fields) + "\n")
    except OSError as exc:
        raise OutputUnwritable(f"cannot write batch outputs: {exc}") from exc

    return BatchSummary(
        total=len(matrix),
        succeeded=len(rows),
        failed=len(failures),
        csv_path=str(csv_path),
        err_path=str(err_path),
        wall_ms=int((time.monotonic() - started) * 1000),
    )
