"""
Shared runtime configuration defaults.

This module centralizes default run lengths, seeds and numerical tolerances so the
simulator, the analytic modules and the CLI import one source of truth. Values are
overridable per experiment from the TOML config or from CLI flags.
"""

from __future__ import annotations

import os

# Output
DEFAULT_OUTPUT_FORMAT = "csv"

# Simulation run lengths
DEFAULT_MASTER_SEED = 20090101
DEFAULT_REPLICATIONS = 200
DEFAULT_CYCLES_PER_REPLICATION = 5_000
DEFAULT_WARMUP_CYCLES = 500
# Cells with switch-over times above this threshold run 10x fewer cycles.
LONG_SWITCHOVER_THRESHOLD = 10.0
LONG_SWITCHOVER_CYCLE_DIVISOR = 10
# With scale_long_runs, one cell simulates at most this many customers (about a
# minute of one core); cycles shrink first, then replications.
CELL_CUSTOMER_BUDGET = 15_000_000
MIN_BUDGET_CYCLES = 20
MIN_BUDGET_REPLICATIONS = 10
DEFAULT_WORKERS = os.cpu_count() or 1

# Variate buffering for arrival / service streams
VARIATE_BATCH_SIZE = 4_096

# Branching moment recursion
MOMENT_TOLERANCE = 1e-12
MOMENT_MAX_CYCLES = 1_000_000

# Busy-period LST fixed point
BUSY_PERIOD_TOLERANCE = 1e-13
BUSY_PERIOD_MAX_ITERATIONS = 100_000

# Two-queue normalization constant
CONSTANT_AGREEMENT_TOLERANCE = 1e-6
RICHARDSON_BASE_STEP = 1e-2
RICHARDSON_LEVELS = 6
# psi(z2) is interpolated from points this far below 1 for z2 closer to 1
PSI_NEAR_ONE_RADIUS = 1e-4
DERIVATIVE_STEP = 1e-4

# Confidence level for all simulation intervals
CONFIDENCE_LEVEL = 0.95

# Table sweeps
TABLE_SWITCHOVERS = (1.0, 10.0, 100.0)
TABLE_ARRIVAL_SCVS = (0.25, 0.5, 1.0, 2.0)
TABLE2_ARRIVAL_SCVS = (0.25, 1.0, 2.0)
TABLE2_IMBALANCES = ((1.0, 1.0), (1.0, 3.0), (3.0, 1.0), (3.0, 3.0))
TABLE2_SWITCHOVER = 100.0
SYMMETRIC_QUEUES = 3
SYMMETRIC_MEAN_SERVICE = 0.25
SYMMETRIC_RHO = 0.75
LIMIT_SWEEP_MULTIPLIERS = (1.0, 10.0, 100.0, 1000.0)


def env_str(name: str, default: str) -> str:
    value = os.getenv(name)
    if value is None:
        return default
    return value


def env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise ValueError(f"{name} must be an integer, got {value!r}") from exc
