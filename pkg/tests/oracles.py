"""Independent oracles used to freeze expected values.

These deliberately avoid every shortcut the production code takes: the bin
minimizer is a plain assignment enumerator (canonical bin order for identical
servers, full cartesian product otherwise) with no bounds, no FFD seeding and
no budget logic.
"""

from __future__ import annotations

import itertools


def min_servers_brute(demands, servers):
    """Minimum used-server count over all feasible assignments; None if infeasible.

    demands/servers are (cpu, memory) pairs.
    """
    n, m = len(demands), len(servers)
    if n == 0:
        return 0
    if len(set(servers)) == 1:
        return _min_bins_identical(demands, m, servers[0])
    best = None
    for assignment in itertools.product(range(m), repeat=n):
        cpu_free = [c for c, _ in servers]
        mem_free = [mm for _, mm in servers]
        feasible = True
        for item, s in enumerate(assignment):
            cpu_free[s] -= demands[item][0]
            mem_free[s] -= demands[item][1]
            if cpu_free[s] < 0 or mem_free[s] < 0:
                feasible = False
                break
        if feasible:
            used = len(set(assignment))
            if best is None or used < best:
                best = used
    return best


def _min_bins_identical(demands, m, capacity):
    """Canonical enumeration: item i goes to an open bin or the next fresh one."""
    cap_cpu, cap_mem = capacity
    n = len(demands)
    cpu_free = [cap_cpu] * m
    mem_free = [cap_mem] * m
    best = [None]

    def recurse(i, used):
        if best[0] is not None and used >= best[0]:
            return
        if i == n:
            best[0] = used
            return
        cpu, mem = demands[i]
        for b in range(min(used + 1, m)):
            if cpu <= cpu_free[b] and mem <= mem_free[b]:
                cpu_free[b] -= cpu
                mem_free[b] -= mem
                recurse(i + 1, max(used, b + 1))
                cpu_free[b] += cpu
                mem_free[b] += mem

    recurse(0, 0)
    return best[0]
