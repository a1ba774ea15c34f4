"""Discrete-event simulator for dynamic VM-to-server allocation.

Subpackages and modules:
    model       -- domain types, workload sampling, demand estimation
    times       -- binary time-series codec, file store, network service
    workloads   -- series providers (in-memory, directory, network)
    engine      -- deterministic simulation core
    controllers -- placement / reallocation strategies and the exact solver
    schedule    -- VM arrival-departure schedules and the builder
    runner      -- factorial batch-experiment harness
    analysis    -- result aggregation and report rendering
    cli         -- command-line entry point
"""

__version__ = "0.1.0"
