"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.
"""

import random
import struct
import threading
import time
from contextlib import contextmanager
from itertools import combinations_with_replacement

import pytest

from vmsim.controllers import (
    ClusterView,
    ExactConsolidation,
    FfdRepack,
    NoFeasibleServer,
    place_initial,
)
from vmsim.engine import run_simulation
from vmsim.model import TimeSeries, estimate_demand
from vmsim.runner import FactorLists, build_matrix, rotate_outputs, run_batch
from vmsim.schedule import BuilderParams, build_schedule
from vmsim.solver import (
    Infeasible,
    SolveBudget,
    ffd_assignment,
    solve_min_servers_exact,
    used_count,
)
from vmsim.times.codec import decode_series, encode_series
from vmsim.times.net import TimesClient, TimesServer
from vmsim.times.store import SeriesStore

from helpers import config_of, constant_series, schedule_of, servers, size, workloads_of
from oracles import min_servers_brute


@contextmanager
def criterion(name: str, budget_s: float):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"{name}: FAIL")
        raise
    elapsed = time.monotonic() - started
    print(f"{name}: PASS ({elapsed:.1f}s)")
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s runtime budget"


def test_c1_exact_solver_oracle_equivalence():
    with criterion("C1 exact-solver oracle equivalence", 60.0):
        checked = 0
        for n in range(1, 8):
            for multiset in combinations_with_replacement(range(1, 11), n):
                demands = [(d, 1) for d in multiset]
                for m in range(1, 5):
                    fleet = [(10, 1000)] * m
                    expected = min_servers_brute(demands, fleet)
                    got = _solve_count(demands, fleet)
                    assert got == expected, (demands, m, expected, got)
                    checked += 1
        assert checked == 77_788

        rng = random.Random(0xC1)
        for _ in range(200):
            n, m = rng.randint(1, 7), rng.randint(1, 4)
            if rng.random() < 0.5:
                fleet = [(10, rng.randint(8, 14))] * m
            else:
                fleet = [(rng.randint(8, 14), rng.randint(8, 14)) for _ in range(m)]
            demands = [(rng.randint(1, 10), rng.randint(1, 10)) for _ in range(n)]
            assert _solve_count(demands, fleet) == min_servers_brute(demands, fleet)


def _solve_count(demands, fleet):
    try:
        allocation, optimal = solve_min_servers_exact(demands, fleet)
    except Infeasible as exc:
        assert exc.proven
        return None
    assert optimal
    return used_count(allocation)


def test_c2_capacity_safety_invariants():
    with criterion("C2 capacity-safety invariant suite", 30.0):
        rng = random.Random(0xC2)
        strategies = ["firstfit", "bestfit", "worstfit", "ffd", "random"]
        estimators = ["max", "mean", "p95", "p99"]
        placed = 0
        for trial in range(500):
            strategy = strategies[trial % len(strategies)]
            estimator = estimators[trial % len(estimators)]
            fleet = servers(rng.randint(1, 5), cpu=rng.randint(60, 150),
                            mem=rng.randint(2048, 8192), base=rng.randint(0, 10))
            table = {}
            vms = []
            from helpers import vm as make_vm

            for i in range(rng.randint(1, 12)):
                name = f"w{i}"
                table[name] = TimeSeries(
                    name=name, start_s=0, interval_s=3,
                    samples=tuple(rng.uniform(0, 100)
                                  for _ in range(rng.randint(1, 12))))
                vms.append(make_vm(f"v{i:02d}", rng.randint(5, 40), name,
                                   mem=rng.randint(64, 1024)))
            try:
                allocation = place_initial(vms, fleet, estimator, strategy,
                                           random.Random(trial),
                                           lambda s: table[s.series_name])
            except NoFeasibleServer:
                continue
            placed += 1
            demands = {v.id: (estimate_demand(table[v.series_name], estimator,
                                              v.size.cpu_units),
                              v.size.memory_mb) for v in vms}
            assert _violations(fleet, demands, allocation) == []
            view = ClusterView(
                servers=fleet,
                vm_cpu_demand={k: c for k, (c, _) in demands.items()},
                vm_memory_mb={k: m for k, (_, m) in demands.items()},
                residence=allocation,
            )
            for controller in (FfdRepack(),
                               ExactConsolidation(SolveBudget(max_nodes=2000))):
                plan = controller.plan(view)
                applied = dict(allocation)
                for vm_id, target in plan.migrations:
                    assert applied[vm_id] != target
                    applied[vm_id] = target
                assert _violations(fleet, demands, applied) == []
        assert placed >= 300  # the suite must actually exercise allocations


def _violations(fleet, demands, allocation):
    out = []
    for spec in fleet:
        cpu = sum(c for v, (c, _) in demands.items() if allocation[v] == spec.id)
        mem = sum(m for v, (_, m) in demands.items() if allocation[v] == spec.id)
        if cpu > spec.placement_cpu_units + 1e-9:
            out.append((spec.id, "cpu"))
        if mem > spec.memory_mb:
            out.append((spec.id, "mem"))
    return out


def _batch_fixture():
    sched = schedule_of(
        [("v1", 0, 300, 0, "flat40"), ("v2", 0, 150, 1, "vary"),
         ("v3", 0, 300, 0, "flat40"), ("v4", 0, 210, 1, "vary"),
         ("v5", 0, 300, 0, "flat40"), ("v6", 0, 300, 1, "vary")],
        [size(30, mem=256), size(45, mem=512)],
        horizon_s=300,
    )
    workloads = workloads_of(
        constant_series("flat40", 40.0),
        TimeSeries(name="vary", start_s=0, interval_s=3,
                   samples=(20, 45, 80, 60, 30, 10, 90, 55)),
    )
    config = config_of(duration_s=300, servers=servers(3),
                       reallocation_interval_s=60)
    return config, sched, (lambda: workloads)


def test_c3_batch_determinism(tmp_path):
    with criterion("C3 batch determinism across runs and parallelism", 120.0):
        config, sched, factory = _batch_fixture()
        matrix = build_matrix(FactorLists(
            initial=("firstfit", "bestfit", "ffd"),
            reallocation=("none", "ffd-repack"),
            placement=("none", "firstfit-online"),
            estimators=("mean",),
            seeds=(1,),
        ))
        assert len(matrix) == 12
        outputs = []
        for run_idx, parallelism in enumerate((1, 4, 1, 4)):
            csv_path = tmp_path / f"run{run_idx}.csv"
            summary = run_batch(matrix, config, sched, factory, parallelism,
                                csv_path, tmp_path / f"run{run_idx}.err")
            assert summary.failed == 0
            masked = b"\n".join(line.rsplit(b",", 1)[0] for line in
                                csv_path.read_bytes().splitlines())
            outputs.append(masked)
        assert outputs[0] == outputs[1] == outputs[2] == outputs[3]


def test_c4_hand_trace_oracle():
    with criterion("C4 hand-trace run examples", 30.0):
        sched = schedule_of([("v1", 0, 30, 0, "flat50")], [size(50)], horizon_s=30)
        result = run_simulation(config_of(), sched,
                                workloads_of(constant_series("flat50", 50.0)))
        assert result.status == "ok"
        assert result.avg_active_servers == 1.0
        assert result.avg_cpu_util_pct == 25.0
        assert result.sla_violation_rate == 0.0
        assert result.migration_count == 0

        empty = schedule_of([], [size(50)], horizon_s=0)
        result = run_simulation(config_of(), empty, workloads_of())
        assert result.status == "ok"
        assert result.avg_active_servers == 0.0
        assert result.sla_violation_rate == 0.0

        forced = schedule_of([("v1", 0, 30, 0, "full"), ("v2", 0, 30, 0, "full")],
                             [size(60, mem=512)], horizon_s=30)
        result = run_simulation(
            config_of(), forced, workloads_of(constant_series("full", 100.0)),
            initial_allocation={"v1": "s1", "v2": "s1"})
        assert result.status == "ok"
        assert result.avg_active_servers == 1.0
        assert result.avg_cpu_util_pct == 120.0
        assert result.sla_violation_rate == 1.0


def test_c5_directional_reallocation_benefit():
    with criterion("C5 reallocation improves consolidation", 30.0):
        sizes = [size(c, mem=256) for c in (26, 74, 25, 75, 24, 76, 23, 77)]
        entries = [
            ("va", 0, 1800, 0, "full"), ("vb", 0, 300, 1, "full"),
            ("vc", 0, 1800, 2, "full"), ("vd", 0, 300, 3, "full"),
            ("ve", 0, 1800, 4, "full"), ("vf", 0, 300, 5, "full"),
            ("vg", 0, 1800, 6, "full"), ("vh", 0, 300, 7, "full"),
        ]
        sched = schedule_of(entries, sizes, horizon_s=1800)
        workloads = workloads_of(constant_series("full", 100.0))

        def run_with(reallocation):
            config = config_of(duration_s=1800, servers=servers(4, mem=4096),
                               reallocation=reallocation,
                               reallocation_interval_s=600)
            return run_simulation(config, sched, workloads)

        consolidated = run_with("ffd-repack")
        baseline = run_with("none")
        assert consolidated.status == baseline.status == "ok"
        assert consolidated.avg_active_servers < baseline.avg_active_servers
        assert consolidated.migration_count > 0
        assert baseline.migration_count == 0


def test_c6_codec_and_protocol_conformance(tmp_path):
    with criterion("C6 codec and wire-protocol conformance", 30.0):
        golden = encode_series(TimeSeries(name="a", start_s=0, interval_s=3,
                                          samples=(1.0,)))
        assert golden == (b"TSB1" + struct.pack(">I", 1) + b"a"
                          + struct.pack(">q", 0) + struct.pack(">I", 3)
                          + struct.pack(">I", 1) + struct.pack(">d", 1.0))
        assert len(golden) == 33

        rng = random.Random(0xC6)
        for _ in range(1000):
            series = TimeSeries(
                name="".join(rng.choice("abCD_19-.") for _ in range(rng.randint(0, 16))),
                start_s=rng.randint(-2**40, 2**40),
                interval_s=rng.randint(1, 10_000),
                samples=tuple(rng.uniform(0, 100) for _ in range(rng.randint(0, 64))),
            )
            blob = encode_series(series)
            decoded = decode_series(blob)
            assert decoded == series
            assert encode_series(decoded) == blob

        store = SeriesStore(tmp_path / "store")
        server = TimesServer(store, ("127.0.0.1", 0))
        server.start()
        try:
            host, port = server.address
            payloads = {f"c{k}": encode_series(constant_series(f"c{k}", float(k)))
                        for k in range(10)}
            errors = []
            barrier = threading.Barrier(10)

            def worker(name):
                try:
                    with TimesClient(host, port) as client:
                        barrier.wait()
                        client.put_bytes(name, payloads[name])
                        for _ in range(3):
                            assert client.get_bytes(name) == payloads[name]
                except Exception as exc:  # noqa: BLE001
                    errors.append(exc)

            threads = [threading.Thread(target=worker, args=(n,)) for n in payloads]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert errors == []
            with TimesClient(host, port) as client:
                assert client.list() == sorted(payloads)
        finally:
            server.shutdown()


def test_c7_schedule_builder_statistics():
    with criterion("C7 schedule-builder statistics", 30.0):
        from vmsim.model import DomainSize

        params = BuilderParams(
            arrival_rate_per_s=0.01,
            mean_lifetime_s=2000.0,
            horizon_s=100_000,
            sizes=(DomainSize(25, 512, 0.5), DomainSize(50, 1024, 0.5)),
            series_pool=("w1", "w2", "w3"),
            seed=5,
        )
        schedule = build_schedule(params)
        n = len(schedule.entries)
        assert n >= 1000
        mean_inter = schedule.entries[-1].arrival_s / (n - 1)
        assert abs(mean_inter - 100.0) <= 10.0
        untruncated = [e for e in schedule.entries
                       if e.departure_s < schedule.horizon_s]
        assert len(untruncated) >= 1000
        mean_life = (sum(e.departure_s - e.arrival_s for e in untruncated)
                     / len(untruncated))
        assert abs(mean_life - 2000.0) <= 200.0


def test_c8_bak_rotation_semantics(tmp_path):
    with criterion("C8 .bak rotation semantics", 10.0):
        path = tmp_path / "results.csv"
        bak = tmp_path / "results.csv.bak"

        path.write_text("first")
        rotate_outputs(path)
        assert not path.exists() and bak.read_text() == "first"

        path.write_text("second")
        rotate_outputs(path)
        assert not path.exists() and bak.read_text() == "second"

        before = sorted(p.name for p in tmp_path.iterdir())
        rotate_outputs(path)  # neither results.csv nor new state: no-op
        assert sorted(p.name for p in tmp_path.iterdir()) == before


def test_c9_budget_bounded_solver_contract():
    with criterion("C9 budget-bounded solver contract", 30.0):
        demands = [(6, 1), (6, 1), (5, 1), (5, 1), (5, 1), (4, 1)]
        fleet = [(10, 100)] * 6
        ffd = ffd_assignment(demands, fleet)
        # Pinned from the deterministic FFD trace: {6,4},{6},{5,5},{5}.
        assert used_count(ffd) == 4
        assert min_servers_brute(demands, fleet) == 4

        budgeted, optimal = solve_min_servers_exact(demands, fleet,
                                                    SolveBudget(max_nodes=1))
        assert budgeted == ffd
        assert used_count(budgeted) == 4
        assert optimal is False

        unlimited, optimal = solve_min_servers_exact(demands, fleet)
        assert used_count(unlimited) == 4
        assert optimal is True
