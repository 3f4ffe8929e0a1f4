"""
Experiment runners: table reproduction, limit-law sweeps and two-queue checks.

Every runner builds its cells as CellJobs in row order, drains them through a
Worker (the first failed cell aborts the experiment with its original exception)
and assembles rows with a stable column order. Every row carries the experiment
kind, its parameter tuple and the master seed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from pollinglab import branching, stats, twoqueue
from pollinglab import distributions as dist
from pollinglab.config import (
    CELL_CUSTOMER_BUDGET,
    DEFAULT_OUTPUT_FORMAT,
    LIMIT_SWEEP_MULTIPLIERS,
    LONG_SWITCHOVER_CYCLE_DIVISOR,
    LONG_SWITCHOVER_THRESHOLD,
    MIN_BUDGET_CYCLES,
    MIN_BUDGET_REPLICATIONS,
    SYMMETRIC_MEAN_SERVICE,
    SYMMETRIC_QUEUES,
    SYMMETRIC_RHO,
    TABLE2_ARRIVAL_SCVS,
    TABLE2_IMBALANCES,
    TABLE2_SWITCHOVER,
    TABLE_ARRIVAL_SCVS,
    TABLE_SWITCHOVERS,
)
from pollinglab.distributions import Deterministic, Exponential
from pollinglab.errors import ConfigError
from pollinglab.job_queue import InMemoryCellQueue
from pollinglab.jobs import CellJob
from pollinglab.model import (
    Exhaustive,
    Gated,
    ImbalanceParams,
    KLimited,
    QueueSpec,
    SystemSpec,
    VisitOrder,
    describe_system,
    is_branching,
    symmetric_system,
    system_from_imbalance,
)
from pollinglab.simulate import SimConfig, SimResult
from pollinglab.stats import MeanEstimate, SampleSummary
from pollinglab.worker import Worker, default_handlers

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    "table1",
    "table2",
    "table3",
    "limit-sweep",
    "pcl-check",
    "e1l-eval",
    "g1l-residual",
    "custom",
)
OUTPUT_FORMATS = ("csv", "pretty")
DEFAULT_RESIDUAL_POINTS = ((0.5, 0.5), (0.25, 0.75), (0.75, 0.25), (0.9, 0.9))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment: its kind, run lengths, optional system and sweep coordinates.

    system is required for "custom"; the other kinds fall back to built-in systems.
    With scale_long_runs, cells whose switch-over times exceed the long-switch-over
    threshold run a tenth of the configured cycles. cross_check adds simulation to
    cells that are otherwise analytic.
    """

    kind: str
    simulation: SimConfig = field(default_factory=SimConfig)
    system: Optional[SystemSpec] = None
    output: Optional[str] = None
    output_format: str = DEFAULT_OUTPUT_FORMAT
    switchovers: tuple[float, ...] = TABLE_SWITCHOVERS
    arrival_scvs: tuple[float, ...] = TABLE_ARRIVAL_SCVS
    table2_arrival_scvs: tuple[float, ...] = TABLE2_ARRIVAL_SCVS
    imbalances: tuple[tuple[float, float], ...] = TABLE2_IMBALANCES
    table2_switchover: float = TABLE2_SWITCHOVER
    multipliers: tuple[float, ...] = LIMIT_SWEEP_MULTIPLIERS
    grid_size: int = 20
    points: tuple[tuple[float, float], ...] = DEFAULT_RESIDUAL_POINTS
    scale_long_runs: bool = True
    cross_check: bool = False

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind must be one of {', '.join(EXPERIMENT_KINDS)}; got {self.kind!r}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output_format must be one of {', '.join(OUTPUT_FORMATS)}")
        if any(not (m > 0 and math.isfinite(m)) for m in self.multipliers):
            raise ConfigError("switch-over multipliers must be finite and > 0 (E[S] > 0 is required)")
        if any(s < 0 for s in self.switchovers) or self.table2_switchover < 0:
            raise ConfigError("switch-over times must be >= 0")
        if any(c <= 0 for c in (*self.arrival_scvs, *self.table2_arrival_scvs)):
            raise ConfigError("arrival SCVs must be > 0")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.kind == "custom" and self.system is None:
            raise ConfigError("a custom experiment needs a [system] or [imbalance] block")


@dataclass(frozen=True)
class ExperimentResult:
    kind: str
    columns: tuple[str, ...]
    rows: list[dict[str, Any]]


def table_system(switchover: float, arrival_scv: float, visit_order: VisitOrder = VisitOrder.CYCLIC) -> SystemSpec:
    """Symmetric exhaustive system: N=3, interarrival mean 1, exponential service mean 0.25."""
    rate = SYMMETRIC_RHO / (SYMMETRIC_QUEUES * SYMMETRIC_MEAN_SERVICE)
    return symmetric_system(
        SYMMETRIC_QUEUES,
        interarrival=dist.fit_phase_type(1.0 / rate, arrival_scv),
        service=Exponential(1.0 / SYMMETRIC_MEAN_SERVICE),
        switchover=Deterministic(switchover),
        visit_order=visit_order,
    )


def two_queue_test_system(first: Exhaustive | Gated) -> SystemSpec:
    """lambda = (0.3, 0.2), exponential service mean 1, deterministic switch-overs of 1, Q2 1-limited."""
    return SystemSpec(
        queues=(
            QueueSpec(interarrival=Exponential(0.3), service=Exponential(1.0), discipline=first),
            QueueSpec(interarrival=Exponential(0.2), service=Exponential(1.0), discipline=KLimited(1)),
        ),
        switchovers=(Deterministic(1.0), Deterministic(1.0)),
    )


def cell_config(cfg: ExperimentConfig, spec: SystemSpec, **overrides: Any) -> SimConfig:
    """
    The experiment's SimConfig for one cell.

    With scale_long_runs, long switch-over cells run a tenth of the cycles and every
    cell is cut to the customer budget.
    """
    sim = replace(cfg.simulation, **overrides) if overrides else cfg.simulation
    if not cfg.scale_long_runs:
        return sim
    longest = max(dist.mean(s) for s in spec.switchovers)
    if longest > LONG_SWITCHOVER_THRESHOLD:
        warmup = sim.warmup_cycles // LONG_SWITCHOVER_CYCLE_DIVISOR
        cycles = max(sim.cycles_per_replication // LONG_SWITCHOVER_CYCLE_DIVISOR, warmup + 1)
        sim = replace(sim, cycles_per_replication=cycles, warmup_cycles=warmup)
    return _within_budget(sim, spec)


def _within_budget(sim: SimConfig, spec: SystemSpec) -> SimConfig:
    """Fewer cycles, then fewer replications, until the cell fits CELL_CUSTOMER_BUDGET."""
    per_cycle = math.fsum(spec.arrival_rates) * spec.mean_cycle
    if sim.replications * sim.cycles_per_replication * per_cycle <= CELL_CUSTOMER_BUDGET:
        return sim
    replications = sim.replications
    cycles = int(CELL_CUSTOMER_BUDGET // (replications * per_cycle))
    if cycles < MIN_BUDGET_CYCLES:
        cycles = min(MIN_BUDGET_CYCLES, sim.cycles_per_replication)
        fitted = int(CELL_CUSTOMER_BUDGET // (cycles * per_cycle))
        replications = min(replications, max(MIN_BUDGET_REPLICATIONS, fitted))
    warmup = min(sim.warmup_cycles * cycles // sim.cycles_per_replication, cycles - 1)
    logger.debug(
        "Cell cut to customer budget",
        extra={
            "replications": replications,
            "cycles": cycles,
            "customers_per_cycle": per_cycle,
        },
    )
    return replace(sim, replications=replications, cycles_per_replication=cycles, warmup_cycles=warmup)


def _analytic_eligible(spec: SystemSpec) -> bool:
    return spec.is_poisson and spec.is_branching and spec.visit_order is VisitOrder.CYCLIC


def _drain(queue: InMemoryCellQueue, kind: str) -> None:
    started = time.perf_counter()
    cells = len(queue)
    Worker(queue, default_handlers()).run_until_empty(stop_on_failure=True)
    logger.info(
        "Experiment cells done",
        extra={"experiment": kind, "cells": cells, "elapsed_seconds": time.perf_counter() - started},
    )


def _result(job: Optional[CellJob], key: str) -> Any:
    if job is None or job.result is None:
        return None
    return job.result[key]


def _none_if_nan(value: Optional[float]) -> Optional[float]:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return value


def _run_info(sim: Optional[SimResult], seed: int) -> dict[str, Any]:
    if sim is None:
        return {"replications": None, "cycles": None, "seed": seed}
    return {
        "replications": sim.config.replications,
        "cycles": sim.config.cycles_per_replication,
        "seed": sim.config.master_seed,
    }


def vector_mean(sim: SimResult, column: int) -> MeanEstimate:
    """Mean of one coordinate of the polling-instant vectors, with its t-interval."""
    if len(sim.replications) >= 2:
        groups: Any = [SampleSummary.from_samples(r.polling_vectors[:, column]) for r in sim.replications]
    else:
        groups = sim.replications[0].polling_vectors[:, column].astype(float)
    return stats.estimate_mean(groups)


TABLE1_COLUMNS = (
    "kind",
    "visit_order",
    "switchover",
    "arrival_scv",
    "scv_sim",
    "scv_half_width",
    "scv_analytic",
    "scaled_mean_sim",
    "replications",
    "cycles",
    "seed",
)


def _symmetric_table(cfg: ExperimentConfig, visit_order: VisitOrder, analytic: bool) -> ExperimentResult:
    queue = InMemoryCellQueue()
    cells: list[tuple[float, float, Optional[CellJob], Optional[CellJob]]] = []
    for switchover in cfg.switchovers:
        for scv in cfg.arrival_scvs:
            spec = table_system(switchover, scv, visit_order)
            exact = analytic and _analytic_eligible(spec)
            analytic_job = queue.submit("polling-moments", {"spec": spec}) if exact else None
            sim_job = None
            if not exact or cfg.cross_check:
                sim_job = queue.submit("simulate", {"spec": spec, "config": cell_config(cfg, spec)})
            cells.append((switchover, scv, sim_job, analytic_job))
    _drain(queue, cfg.kind)

    rows = []
    for switchover, scv, sim_job, analytic_job in cells:
        sim: Optional[SimResult] = _result(sim_job, "sim")
        moments = _result(analytic_job, "moments")
        scaled = sim.scaled_polling_mean if sim is not None else None
        rows.append(
            {
                "kind": cfg.kind,
                "visit_order": visit_order.value,
                "switchover": switchover,
                "arrival_scv": scv,
                "scv_sim": _none_if_nan(sim.polling_scv.scv) if sim else None,
                "scv_half_width": _none_if_nan(sim.polling_scv.half_width) if sim else None,
                "scv_analytic": moments.scv_at_q1 if moments is not None else None,
                "scaled_mean_sim": scaled.mean if scaled is not None else None,
                **_run_info(sim, cfg.simulation.master_seed),
            }
        )
    return ExperimentResult(kind=cfg.kind, columns=TABLE1_COLUMNS, rows=rows)


def run_table1(cfg: ExperimentConfig) -> ExperimentResult:
    """SCV of the Q1 polling-instant queue length: S_i x arrival SCV, cyclic order."""
    return _symmetric_table(cfg, VisitOrder.CYCLIC, analytic=True)


def run_table3(cfg: ExperimentConfig) -> ExperimentResult:
    """As run_table1 under the longest-queue visit order; simulation only."""
    return _symmetric_table(cfg, VisitOrder.LONGEST_QUEUE, analytic=False)


TABLE2_COLUMNS = (
    "kind",
    "arrival_scv",
    "imbalance_arrival",
    "imbalance_service",
    "switchover",
    "wait_scv_sim",
    "wait_scv_half_width",
    "scv_sim",
    "scv_half_width",
    "scv_analytic",
    "replications",
    "cycles",
    "seed",
)


def table2_system(cfg: ExperimentConfig, arrival_scv: float, imbalance: tuple[float, float]) -> SystemSpec:
    params = ImbalanceParams(
        n=SYMMETRIC_QUEUES,
        rho=SYMMETRIC_RHO,
        imbalance_arrival=imbalance[0],
        imbalance_service=imbalance[1],
        scv_arrival=arrival_scv,
    )
    return system_from_imbalance(params, switchover=Deterministic(cfg.table2_switchover))


def run_table2(cfg: ExperimentConfig) -> ExperimentResult:
    """SCV of W_1 (simulated) and of the Q1 polling-instant queue length, asymmetric systems."""
    queue = InMemoryCellQueue()
    cells = []
    for scv in cfg.table2_arrival_scvs:
        for imbalance in cfg.imbalances:
            spec = table2_system(cfg, scv, imbalance)
            analytic_job = queue.submit("polling-moments", {"spec": spec}) if _analytic_eligible(spec) else None
            sim_job = queue.submit("simulate", {"spec": spec, "config": cell_config(cfg, spec)})
            cells.append((scv, imbalance, sim_job, analytic_job))
    _drain(queue, cfg.kind)

    rows = []
    for scv, (ia, ib), sim_job, analytic_job in cells:
        sim: SimResult = _result(sim_job, "sim")
        moments = _result(analytic_job, "moments")
        wait = sim.waits[0]
        rows.append(
            {
                "kind": cfg.kind,
                "arrival_scv": scv,
                "imbalance_arrival": ia,
                "imbalance_service": ib,
                "switchover": cfg.table2_switchover,
                "wait_scv_sim": _none_if_nan(wait.scv),
                "wait_scv_half_width": _none_if_nan(wait.scv_half_width),
                "scv_sim": _none_if_nan(sim.polling_scv.scv),
                "scv_half_width": _none_if_nan(sim.polling_scv.half_width),
                "scv_analytic": moments.scv_at_q1 if moments is not None else None,
                **_run_info(sim, cfg.simulation.master_seed),
            }
        )
    return ExperimentResult(kind=cfg.kind, columns=TABLE2_COLUMNS, rows=rows)


LIMIT_COLUMNS = (
    "kind",
    "system",
    "multiplier",
    "total_switchover",
    "ks_distance",
    "ks_decreased",
    "scaled_wait_mean",
    "limit_mean",
    "limit_scv",
    "scv_sim",
    "scv_half_width",
    "scv_analytic",
    "scv_times_s",
    "replications",
    "cycles",
    "seed",
)


def limit_base_system() -> SystemSpec:
    return table_system(1.0, 1.0)


def run_limit_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """
    W_1/S against the uniform limit law as every switch-over time is multiplied up.

    KS distances need branching disciplines (for the reference law); SCVs of the
    polling-instant queue length are reported for any system.
    """
    base = cfg.system if cfg.system is not None else limit_base_system()
    if not base.has_deterministic_switchovers:
        raise ConfigError("limit-sweep needs deterministic switch-over times")
    if base.mean_total_switchover <= 0:
        raise ConfigError("limit-sweep needs E[S] > 0")
    record = cfg.simulation.record_queue
    queue = InMemoryCellQueue()
    law_job = None
    if record >= base.n:
        raise ConfigError(f"record_queue must be < {base.n}")
    if is_branching(base.queues[record].discipline):
        law_job = queue.submit("limit-law", {"spec": base, "queue": record})
    cells = []
    for multiplier in cfg.multipliers:
        spec = base.with_switchover_scale(multiplier)
        analytic_job = queue.submit("polling-moments", {"spec": spec}) if _analytic_eligible(spec) and record == 0 else None
        sim_job = queue.submit(
            "simulate",
            {"spec": spec, "config": cell_config(cfg, spec, keep_wait_samples=True)},
        )
        cells.append((multiplier, spec, sim_job, analytic_job))
    _drain(queue, cfg.kind)

    law = _result(law_job, "law")
    rows = []
    previous_ks: Optional[float] = None
    for multiplier, spec, sim_job, analytic_job in cells:
        sim: SimResult = _result(sim_job, "sim")
        moments = _result(analytic_job, "moments")
        total = spec.mean_total_switchover
        scaled_waits = sim.wait_samples() / total
        ks = stats.ks_distance(scaled_waits, law.cdf) if law is not None and scaled_waits.size else None
        scv_sim = _none_if_nan(sim.polling_scv.scv)
        rows.append(
            {
                "kind": cfg.kind,
                "system": describe_system(base),
                "multiplier": multiplier,
                "total_switchover": total,
                "ks_distance": ks,
                "ks_decreased": None if ks is None or previous_ks is None else ks < previous_ks,
                "scaled_wait_mean": float(scaled_waits.mean()) if scaled_waits.size else None,
                "limit_mean": law.mean if law is not None else None,
                "limit_scv": law.scv if law is not None else None,
                "scv_sim": scv_sim,
                "scv_half_width": _none_if_nan(sim.polling_scv.half_width),
                "scv_analytic": moments.scv_at_q1 if moments is not None else None,
                "scv_times_s": scv_sim * total if scv_sim is not None else None,
                **_run_info(sim, cfg.simulation.master_seed),
            }
        )
        previous_ks = ks if ks is not None else previous_ks
    return ExperimentResult(kind=cfg.kind, columns=LIMIT_COLUMNS, rows=rows)


PCL_COLUMNS = (
    "kind",
    "system",
    "lhs",
    "rhs",
    "relative_gap",
    "mean_waits_sim",
    "mean_waits_analytic",
    "replications",
    "cycles",
    "seed",
)


def _joined(values: Sequence[float]) -> str:
    return ";".join(f"{v:.12g}" for v in values)


def run_pcl_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Pseudo-conservation law with simulated mean waits (G/1-L test system by default)."""
    spec = cfg.system if cfg.system is not None else two_queue_test_system(Gated())
    queue = InMemoryCellQueue()
    sim_job = queue.submit("simulate", {"spec": spec, "config": cell_config(cfg, spec)})
    _drain(queue, cfg.kind)

    sim: SimResult = _result(sim_job, "sim")
    waits = [w.mean for w in sim.waits]
    report = twoqueue.pseudo_conservation(spec, waits)
    analytic = _joined(branching.mean_waiting_times(spec)) if _analytic_eligible(spec) else None
    row = {
        "kind": cfg.kind,
        "system": describe_system(spec),
        "lhs": report.lhs,
        "rhs": report.rhs,
        "relative_gap": report.relative_gap,
        "mean_waits_sim": _joined(waits),
        "mean_waits_analytic": analytic,
        **_run_info(sim, cfg.simulation.master_seed),
    }
    return ExperimentResult(kind=cfg.kind, columns=PCL_COLUMNS, rows=[row])


E1L_COLUMNS = (
    "kind",
    "row_type",
    "z1",
    "z2",
    "value",
    "residual",
    "constant",
    "numerical_constant",
    "mean_q1",
    "mean_q2",
    "mean_q1_sim",
    "mean_q1_half_width",
    "mean_q2_sim",
    "mean_q2_half_width",
    "seed",
)


def _empty_row(columns: Sequence[str], **values: Any) -> dict[str, Any]:
    row: dict[str, Any] = {c: None for c in columns}
    row.update(values)
    return row


def run_e1l_eval(cfg: ExperimentConfig) -> ExperimentResult:
    """
    E/1-L joint PGF: a summary row (C, mean queue lengths) and a grid of F_1 values
    with their functional-equation residuals. cross_check adds simulated means.
    """
    system = cfg.system if cfg.system is not None else two_queue_test_system(Exhaustive())
    spec = twoqueue.TwoQueueSpec.from_system(system)
    queue = InMemoryCellQueue()
    summary_job = queue.submit("e1l-summary", {"spec": spec})
    sim_job = queue.submit("simulate", {"spec": system, "config": cell_config(cfg, system)}) if cfg.cross_check else None
    _drain(queue, cfg.kind)

    summary = summary_job.result or {}
    constant = summary["constant"]
    mean_q1, mean_q2 = summary["mean_queue_lengths"]
    seed = cfg.simulation.master_seed
    head = _empty_row(
        E1L_COLUMNS,
        kind=cfg.kind,
        row_type="summary",
        z1=1.0,
        z2=1.0,
        value=summary["normalization"],
        constant=constant,
        numerical_constant=summary["numerical_constant"],
        mean_q1=mean_q1,
        mean_q2=mean_q2,
        seed=seed,
    )
    sim: Optional[SimResult] = _result(sim_job, "sim")
    if sim is not None:
        first, second = vector_mean(sim, 0), vector_mean(sim, 1)
        head.update(
            mean_q1_sim=first.mean,
            mean_q1_half_width=first.half_width,
            mean_q2_sim=second.mean,
            mean_q2_half_width=second.half_width,
            seed=sim.config.master_seed,
        )
    rows = [head]
    grid = np.linspace(0.0, 1.0, cfg.grid_size)
    for z1 in grid:
        for z2 in grid:
            value = float(np.real(twoqueue.e1l_eval(spec, float(z1), float(z2), constant=constant)))
            residual = twoqueue.e1l_residual(spec, float(z1), float(z2)) if z2 > 0 else None
            rows.append(
                _empty_row(
                    E1L_COLUMNS,
                    kind=cfg.kind,
                    row_type="grid",
                    z1=float(z1),
                    z2=float(z2),
                    value=value,
                    residual=residual,
                    constant=constant,
                    seed=seed,
                )
            )
    return ExperimentResult(kind=cfg.kind, columns=E1L_COLUMNS, rows=rows)


G1L_COLUMNS = (
    "kind",
    "system",
    "z1",
    "z2",
    "pgf_value",
    "pgf_standard_error",
    "residual",
    "residual_standard_error",
    "residual_ratio",
    "samples",
    "replications",
    "cycles",
    "seed",
)


def run_g1l_residual(cfg: ExperimentConfig) -> ExperimentResult:
    """Functional-equation residual of the simulated G/1-L PGF at each configured point."""
    system = cfg.system if cfg.system is not None else two_queue_test_system(Gated())
    spec = twoqueue.TwoQueueSpec.from_system(system)
    queue = InMemoryCellQueue()
    sim_job = queue.submit("simulate", {"spec": system, "config": cell_config(cfg, system, record_queue=0)})
    _drain(queue, cfg.kind)

    sim: SimResult = _result(sim_job, "sim")
    pgf = twoqueue.EmpiricalPGF.from_result(sim)
    rows = []
    for z1, z2 in cfg.points:
        value, value_se = pgf.combination([(1.0, z1, z2)])
        residual = twoqueue.g1l_residual(pgf, spec, z1, z2)
        ratio = residual.value / residual.standard_error if residual.standard_error > 0 else None
        rows.append(
            {
                "kind": cfg.kind,
                "system": describe_system(system),
                "z1": z1,
                "z2": z2,
                "pgf_value": float(np.real(value)),
                "pgf_standard_error": value_se,
                "residual": residual.value,
                "residual_standard_error": residual.standard_error,
                "residual_ratio": ratio,
                "samples": pgf.size,
                **_run_info(sim, cfg.simulation.master_seed),
            }
        )
    return ExperimentResult(kind=cfg.kind, columns=G1L_COLUMNS, rows=rows)


CUSTOM_COLUMNS = (
    "kind",
    "system",
    "queue",
    "load",
    "mean_wait_sim",
    "mean_wait_half_width",
    "wait_scv_sim",
    "wait_scv_half_width",
    "mean_wait_analytic",
    "polling_scv_sim",
    "polling_scv_half_width",
    "polling_scv_analytic",
    "cycle_time_sim",
    "cycle_time_analytic",
    "replications",
    "cycles",
    "seed",
)


def run_custom(cfg: ExperimentConfig) -> ExperimentResult:
    """Simulate an arbitrary system; add exact values where the system allows them."""
    spec = cfg.system
    if spec is None:
        raise ConfigError("a custom experiment needs a [system] or [imbalance] block")
    record = cfg.simulation.record_queue
    queue = InMemoryCellQueue()
    sim_job = queue.submit("simulate", {"spec": spec, "config": cell_config(cfg, spec)})
    _drain(queue, cfg.kind)

    sim: SimResult = _result(sim_job, "sim")
    exact_waits: Optional[tuple[float, ...]] = None
    exact_scv: Optional[float] = None
    if _analytic_eligible(spec):
        exact_waits = branching.mean_waiting_times(spec)
        exact_scv = branching.visit_start_moments(spec)[record].scv
    rows = []
    for i, wait in enumerate(sim.waits):
        recorded = i == record
        rows.append(
            {
                "kind": cfg.kind,
                "system": describe_system(spec),
                "queue": i + 1,
                "load": spec.loads[i],
                "mean_wait_sim": _none_if_nan(wait.mean),
                "mean_wait_half_width": _none_if_nan(wait.mean_half_width),
                "wait_scv_sim": _none_if_nan(wait.scv),
                "wait_scv_half_width": _none_if_nan(wait.scv_half_width),
                "mean_wait_analytic": _none_if_nan(exact_waits[i]) if exact_waits else None,
                "polling_scv_sim": _none_if_nan(sim.polling_scv.scv) if recorded else None,
                "polling_scv_half_width": _none_if_nan(sim.polling_scv.half_width) if recorded else None,
                "polling_scv_analytic": _none_if_nan(exact_scv) if recorded else None,
                "cycle_time_sim": _none_if_nan(sim.cycle_time.mean) if recorded else None,
                "cycle_time_analytic": spec.mean_cycle if recorded else None,
                **_run_info(sim, cfg.simulation.master_seed),
            }
        )
    return ExperimentResult(kind=cfg.kind, columns=CUSTOM_COLUMNS, rows=rows)


RUNNERS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "table1": run_table1,
    "table2": run_table2,
    "table3": run_table3,
    "limit-sweep": run_limit_sweep,
    "pcl-check": run_pcl_check,
    "e1l-eval": run_e1l_eval,
    "g1l-residual": run_g1l_residual,
    "custom": run_custom,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    logger.info("Running experiment", extra={"experiment": cfg.kind, "seed": cfg.simulation.master_seed})
    return RUNNERS[cfg.kind](cfg)
