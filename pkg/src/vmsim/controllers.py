"""Placement and reallocation controllers plus their name registry.

Three controller families exist.  Initial placement packs the whole VM
population once at simulation start; online placement picks a server for
each VM arriving mid-run; reallocation periodically recomputes the
allocation and emits a migration plan.  Controllers are pure decision
procedures over a cluster snapshot: the engine owns all state mutation.

New strategies are added with ``register(family, name, factory)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from vmsim.model import ServerSpec, estimate_demand
from vmsim.solver import Infeasible, SolveBudget, UNLIMITED, solve_min_servers_exact

FAMILIES = ("initial", "placement", "reallocation")


class ControllerError(Exception):
    pass


class UnknownController(ControllerError):
    pass


class NoneNotAllowed(ControllerError):
    """'none' is not acceptable where a controller is mandatory."""


class NoFeasibleServer(ControllerError):
    def __init__(self, vm_id: str):
        super().__init__(f"no feasible server for VM {vm_id!r}")
        self.vm_id = vm_id


@dataclass(frozen=True)
class ReallocationPlan:
    """Ordered migrations (vm id, target server id); empty plans are valid."""

    migrations: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = set()
        for vm, _target in self.migrations:
            if vm in seen:
                raise ValueError(f"VM {vm!r} appears twice in one plan")
            seen.add(vm)

    def __len__(self) -> int:
        return len(self.migrations)


@dataclass(frozen=True)
class ClusterView:
    """Snapshot the engine hands to online-placement and reallocation controllers.

    ``incoming_cpu`` and ``reserved_mb`` carry the demand a server is already
    committed to by in-flight migrations; counting a migrating VM on both
    endpoints keeps every decision safe at the moment residency flips.
    """

    servers: tuple[ServerSpec, ...]
    vm_cpu_demand: dict[str, float]
    vm_memory_mb: dict[str, int]
    residence: dict[str, str]
    incoming_cpu: dict[str, float] = field(default_factory=dict)
    reserved_mb: dict[str, int] = field(default_factory=dict)

    def cpu_used(self, server_id: str) -> float:
        resident = sum(self.vm_cpu_demand[vm] for vm, sid in self.residence.items()
                       if sid == server_id)
        return resident + self.incoming_cpu.get(server_id, 0.0)

    def mem_used(self, server_id: str) -> int:
        resident = sum(self.vm_memory_mb[vm] for vm, sid in self.residence.items()
                       if sid == server_id)
        return resident + self.reserved_mb.get(server_id, 0)


def _pick(strategy: str, cpu: float, mem: int, candidates, rng):
    """Select one of (index, spec, cpu_free, mem_free) per the strategy rules.

    Ties resolve to the lowest server index everywhere so decisions are total.
    """
    feasible = [c for c in candidates if cpu <= c[2] and mem <= c[3]]
    if not feasible:
        return None
    if strategy == "firstfit":
        return feasible[0]
    if strategy == "bestfit":
        return min(feasible, key=lambda c: (c[2] - cpu, c[0]))
    if strategy == "worstfit":
        return min(feasible, key=lambda c: (-(c[2] - cpu), c[0]))
    if strategy == "random":
        return feasible[rng.randrange(len(feasible))]
    raise UnknownController(f"unknown packing strategy {strategy!r}")


class InitialPlacement:
    """Bin-packs the full population onto empty servers."""

    family = "initial"

    def __init__(self, name: str, strategy: str, decreasing: bool = False):
        self.name = name
        self._strategy = strategy
        self._decreasing = decreasing

    def place(self, vms, servers, demands, rng) -> dict[str, str]:
        """``demands`` maps vm id -> (estimated cpu-units, memory_mb)."""
        order = list(vms)
        if self._decreasing:
            order.sort(key=lambda vm: (-demands[vm.id][0], vm.id))
        candidates = [[i, spec, float(spec.placement_cpu_units), spec.memory_mb]
                      for i, spec in enumerate(servers)]
        allocation = {}
        for vm in order:
            cpu, mem = demands[vm.id]
            chosen = _pick(self._strategy, cpu, mem, candidates, rng)
            if chosen is None:
                raise NoFeasibleServer(vm.id)
            chosen[2] -= cpu
            chosen[3] -= mem
            allocation[vm.id] = chosen[1].id
        return allocation


class OnlinePlacement:
    """Places one arriving VM against current residual capacities."""

    family = "placement"

    def __init__(self, name: str, strategy: str):
        self.name = name
        self._strategy = strategy

    def place(self, vm_id: str, cpu: float, mem: int, view: ClusterView, rng) -> str:
        candidates = [(i, spec,
                       spec.placement_cpu_units - view.cpu_used(spec.id),
                       spec.memory_mb - view.mem_used(spec.id))
                      for i, spec in enumerate(view.servers)]
        chosen = _pick(self._strategy, cpu, mem, candidates, rng)
        if chosen is None:
            raise NoFeasibleServer(vm_id)
        return chosen[1].id


class FfdRepack:
    """Consolidation by repacking every live VM with first-fit decreasing.

    Servers are visited in current-load-descending order so load gravitates
    onto the busiest machines; a VM stays where it is whenever its current
    server ties with the winning candidate, which keeps settled states free
    of churn.
    """

    family = "reallocation"
    name = "ffd-repack"

    def plan(self, view: ClusterView) -> ReallocationPlan:
        if not view.residence:
            return ReallocationPlan()
        load = {spec.id: 0.0 for spec in view.servers}
        for vm, sid in view.residence.items():
            load[sid] += view.vm_cpu_demand[vm]
        index_of = {spec.id: i for i, spec in enumerate(view.servers)}
        order = sorted(view.servers, key=lambda s: (-load[s.id], index_of[s.id]))
        by_id = {spec.id: spec for spec in view.servers}

        cpu_used = {spec.id: 0.0 for spec in view.servers}
        mem_used = {spec.id: 0 for spec in view.servers}

        def fits(spec, cpu, mem):
            return (cpu <= spec.placement_cpu_units - cpu_used[spec.id]
                    and mem <= spec.memory_mb - mem_used[spec.id])

        target = {}
        vms = sorted(view.residence, key=lambda vm: (-view.vm_cpu_demand[vm], vm))
        for vm in vms:
            cpu, mem = view.vm_cpu_demand[vm], view.vm_memory_mb[vm]
            chosen = next((spec for spec in order if fits(spec, cpu, mem)), None)
            if chosen is None:
                # Current allocation may be tighter than a fresh FFD pack can
                # reproduce; a no-op tick is always safe.
                return ReallocationPlan()
            current = by_id[view.residence[vm]]
            if (current.id != chosen.id and load[current.id] == load[chosen.id]
                    and fits(current, cpu, mem)):
                chosen = current
            cpu_used[chosen.id] += cpu
            mem_used[chosen.id] += mem
            target[vm] = chosen.id
        moves = tuple((vm, target[vm]) for vm in vms if target[vm] != view.residence[vm])
        return ReallocationPlan(moves)


class ExactConsolidation:
    """Reallocation via the budgeted exact server-minimization solver."""

    family = "reallocation"
    name = "exact"

    def __init__(self, budget: SolveBudget = UNLIMITED):
        self.budget = budget

    def plan(self, view: ClusterView) -> ReallocationPlan:
        vms = sorted(view.residence)
        if not vms:
            return ReallocationPlan()
        demands = [(view.vm_cpu_demand[vm], view.vm_memory_mb[vm]) for vm in vms]
        capacities = [(spec.placement_cpu_units, spec.memory_mb) for spec in view.servers]
        try:
            assignment, _optimal = solve_min_servers_exact(demands, capacities, self.budget)
        except Infeasible:
            return ReallocationPlan()
        moves = tuple(
            (vm, view.servers[assignment[i]].id)
            for i, vm in enumerate(vms)
            if view.servers[assignment[i]].id != view.residence[vm]
        )
        return ReallocationPlan(moves)


_REGISTRY: dict[str, dict] = {
    "initial": {
        "firstfit": lambda **kw: InitialPlacement("firstfit", "firstfit"),
        "bestfit": lambda **kw: InitialPlacement("bestfit", "bestfit"),
        "worstfit": lambda **kw: InitialPlacement("worstfit", "worstfit"),
        "ffd": lambda **kw: InitialPlacement("ffd", "firstfit", decreasing=True),
        "random": lambda **kw: InitialPlacement("random", "random"),
    },
    "placement": {
        "firstfit-online": lambda **kw: OnlinePlacement("firstfit-online", "firstfit"),
        "bestfit-online": lambda **kw: OnlinePlacement("bestfit-online", "bestfit"),
        "worstfit-online": lambda **kw: OnlinePlacement("worstfit-online", "worstfit"),
        "random-online": lambda **kw: OnlinePlacement("random-online", "random"),
    },
    "reallocation": {
        "ffd-repack": lambda **kw: FfdRepack(),
        "exact": lambda **kw: ExactConsolidation(kw.get("budget") or UNLIMITED),
    },
}


def register(family: str, name: str, factory) -> None:
    """Add a controller under ``name``; the factory must accept **kwargs."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    _REGISTRY[family][name] = factory


def registered_names(family: str) -> list[str]:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    return sorted(_REGISTRY[family])


def resolve(name: str, family: str, **kwargs):
    """Look up a controller by (family, name).

    'none' disables the optional placement/reallocation families and returns
    None; an initial placement controller is mandatory, so 'none' is rejected
    there.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if name == "none":
        if family == "initial":
            raise NoneNotAllowed("an initial placement controller is required")
        return None
    try:
        factory = _REGISTRY[family][name]
    except KeyError:
        raise UnknownController(f"no {family} controller named {name!r}") from None
    return factory(**kwargs)


def place_initial(vms, servers, estimator: str, strategy: str, rng,
                  series_of) -> dict[str, str]:
    """Pack ``vms`` (in list order) onto ``servers`` using the named strategy.

    ``series_of`` resolves a VmSpec to its workload trace; demands are the
    estimator statistic of that trace scaled by the flavor's CPU units.
    """
    controller = resolve(strategy, "initial")
    demands = {
        vm.id: (estimate_demand(series_of(vm), estimator, vm.size.cpu_units),
                vm.size.memory_mb)
        for vm in vms
    }
    return controller.place(vms, servers, demands, rng)
