"""Budgeted exact server-minimization by branch and bound.

Packs (cpu, memory) demand pairs onto a fixed server list, minimizing the
number of servers used.  The search is plain depth-first enumeration with a
first-fit-decreasing incumbent, symmetry breaking over identical idle
servers, and bound pruning.  Expansion order is fully deterministic: items by
demand descending, servers by index.

The budget caps the explored node count and/or wall time.  Optimality is
reported only when the enumeration itself finished within budget; the bound
arithmetic is used to prune, never to certify, so a node-budgeted run on the
same instance always reports the same incumbent on every machine.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass


@dataclass(frozen=True)
class SolveBudget:
    """Search limits; None means unbounded."""

    max_nodes: int | None = None
    max_wall_ms: int | None = None

    def __post_init__(self):
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.max_wall_ms is not None and self.max_wall_ms < 1:
            raise ValueError("max_wall_ms must be >= 1")

    @property
    def bounded(self) -> bool:
        return self.max_nodes is not None or self.max_wall_ms is not None


UNLIMITED = SolveBudget()


class Infeasible(Exception):
    """No complete assignment exists (or none was found within budget).

    ``proven`` distinguishes a completed search from a budget abort that never
    reached an incumbent.
    """

    def __init__(self, message: str, proven: bool = True):
        super().__init__(message)
        self.proven = proven


def _sorted_items(demands):
    # Demand descending; original index breaks ties so the order is total.
    return sorted(range(len(demands)),
                  key=lambda i: (-demands[i][0], -demands[i][1], i))


def ffd_assignment(demands, servers):
    """First-fit decreasing: items by demand descending onto servers by index.

    Returns {item_index: server_index} or None when some item finds no
    feasible server under this heuristic.
    """
    cpu_free = [c for c, _ in servers]
    mem_free = [m for _, m in servers]
    assignment = {}
    for i in _sorted_items(demands):
        cpu, mem = demands[i]
        for s in range(len(servers)):
            if cpu <= cpu_free[s] and mem <= mem_free[s]:
                cpu_free[s] -= cpu
                mem_free[s] -= mem
                assignment[i] = s
                break
        else:
            return None
    return assignment


def used_count(assignment) -> int:
    return len(set(assignment.values()))


def solve_min_servers_exact(demands, servers, budget: SolveBudget = UNLIMITED):
    """Minimize the number of used servers; returns (assignment, optimal).

    ``demands`` and ``servers`` are (cpu, memory) pairs; the assignment maps
    item index to server index.  ``optimal`` is True iff the search space was
    exhausted within the budget.  Raises Infeasible when no assignment exists
    (proven) or when the budget ran out before any incumbent was found (not
    proven).
    """
    n, m = len(demands), len(servers)
    for cpu, mem in demands:
        if cpu <= 0 or mem <= 0:
            raise ValueError("demands must be positive in both dimensions")
    for cpu, mem in servers:
        if cpu <= 0 or mem <= 0:
            raise ValueError("server capacities must be positive")
    if n == 0:
        return {}, True
    for i, (cpu, mem) in enumerate(demands):
        if not any(cpu <= sc and mem <= sm for sc, sm in servers):
            raise Infeasible(f"item {i} ({cpu}, {mem}) fits no server", proven=True)

    order = _sorted_items(demands)
    incumbent = ffd_assignment(demands, servers)
    best_count = used_count(incumbent) if incumbent is not None else m + 1
    best = dict(incumbent) if incumbent is not None else None

    cpu_free = [c for c, _ in servers]
    mem_free = [m_ for _, m_ in servers]
    load = [0] * m  # item count per server, for used/idle bookkeeping
    assignment = [None] * n  # position in `order` -> server index
    suffix_cpu = [0.0] * (n + 1)
    suffix_mem = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        cpu, mem = demands[order[k]]
        suffix_cpu[k] = suffix_cpu[k + 1] + cpu
        suffix_mem[k] = suffix_mem[k + 1] + mem
    max_cap_cpu = max(c for c, _ in servers)
    max_cap_mem = max(m_ for _, m_ in servers)

    deadline = None
    if budget.max_wall_ms is not None:
        deadline = time.monotonic() + budget.max_wall_ms / 1000.0
    state = {"nodes": 0, "aborted": False}

    def additional_servers_needed(k, used):
        # Remaining demand that cannot fit in already-used servers must open
        # new ones; dividing by the largest capacity keeps the bound valid for
        # heterogeneous server lists.
        open_cpu = sum(cpu_free[s] for s in range(m) if load[s] > 0)
        open_mem = sum(mem_free[s] for s in range(m) if load[s] > 0)
        extra_cpu = max(0, math.ceil((suffix_cpu[k] - open_cpu) / max_cap_cpu))
        extra_mem = max(0, math.ceil((suffix_mem[k] - open_mem) / max_cap_mem))
        return max(extra_cpu, extra_mem)

    def search(k, used):
        nonlocal best, best_count
        if k == n:
            if used < best_count:
                best_count = used
                best = {order[j]: assignment[j] for j in range(n)}
            return
        state["nodes"] += 1
        if budget.max_nodes is not None and state["nodes"] > budget.max_nodes:
            state["aborted"] = True
            return
        if deadline is not None and time.monotonic() > deadline:
            state["aborted"] = True
            return
        # The root is always expanded: bound pruning below certifies nothing on
        # its own, so a node budget bites before any pruning can exhaust the
        # space and a budgeted run never reports optimality it did not earn.
        if k > 0 and (used >= best_count
                      or used + additional_servers_needed(k, used) >= best_count):
            return
        cpu, mem = demands[order[k]]
        tried_idle = set()  # capacities of idle servers already expanded here
        for s in range(m):
            if cpu > cpu_free[s] or mem > mem_free[s]:
                continue
            idle = load[s] == 0
            if idle:
                cap = (servers[s][0], servers[s][1])
                if cap in tried_idle:
                    continue  # symmetric to an idle server already tried
                tried_idle.add(cap)
            cpu_free[s] -= cpu
            mem_free[s] -= mem
            load[s] += 1
            assignment[k] = s
            search(k + 1, used + (1 if idle else 0))
            assignment[k] = None
            load[s] -= 1
            cpu_free[s] += cpu
            mem_free[s] += mem
            if state["aborted"]:
                return

    search(0, 0)
    optimal = not state["aborted"]
    if best is None:
        if optimal:
            raise Infeasible("no feasible assignment exists", proven=True)
        raise Infeasible("no feasible assignment found within budget", proven=False)
    return best, optimal
