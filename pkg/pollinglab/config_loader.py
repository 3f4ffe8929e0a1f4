"""
TOML experiment files: include resolution, schema validation, domain conversion.

A file holds one experiment. `include = [...]` lists files (relative to the including
file) that are deep-merged first, in order; the including file overrides them. The
merged document is validated with pydantic and converted to an ExperimentConfig.
"""

from __future__ import annotations

import logging
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Literal, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - same API, pre-3.11 backport
    import tomli as tomllib

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from pollinglab import distributions as dist
from pollinglab.config import (
    DEFAULT_CYCLES_PER_REPLICATION,
    DEFAULT_MASTER_SEED,
    DEFAULT_OUTPUT_FORMAT,
    DEFAULT_REPLICATIONS,
    DEFAULT_WARMUP_CYCLES,
    DEFAULT_WORKERS,
    LIMIT_SWEEP_MULTIPLIERS,
    TABLE2_ARRIVAL_SCVS,
    TABLE2_IMBALANCES,
    TABLE2_SWITCHOVER,
    TABLE_ARRIVAL_SCVS,
    TABLE_SWITCHOVERS,
    env_int,
)
from pollinglab.errors import ConfigError, StabilityError
from pollinglab.experiments import DEFAULT_RESIDUAL_POINTS, EXPERIMENT_KINDS, ExperimentConfig
from pollinglab.model import (
    Discipline,
    Exhaustive,
    Gated,
    ImbalanceParams,
    KLimited,
    QueueSpec,
    SystemSpec,
    VisitOrder,
    system_from_imbalance,
)
from pollinglab.simulate import SimConfig

logger = logging.getLogger(__name__)

_LIMITED = re.compile(r"^(\d+)-limited$")


class DistributionModel(BaseModel):
    """Either an explicit variant (kind + parameters) or a moment pair (mean + scv)."""

    model_config = ConfigDict(extra="forbid")

    kind: Optional[str] = None
    mean: Optional[float] = Field(None, gt=0)
    scv: Optional[float] = Field(None, ge=0)
    value: Optional[float] = Field(None, ge=0)
    rate: Optional[float] = Field(None, gt=0)
    phases: Optional[int] = Field(None, ge=1)
    phases_low: Optional[int] = Field(None, ge=1)
    phases_high: Optional[int] = None
    prob_low: Optional[float] = Field(None, ge=0, le=1)
    prob1: Optional[float] = Field(None, ge=0, le=1)
    rate1: Optional[float] = Field(None, gt=0)
    rate2: Optional[float] = Field(None, gt=0)

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in dist.DISTRIBUTION_KINDS:
            raise ValueError(f"kind must be one of {', '.join(sorted(dist.DISTRIBUTION_KINDS))}")
        return value

    @model_validator(mode="after")
    def validate_shape(self) -> "DistributionModel":
        if self.kind is None and (self.mean is None or self.scv is None):
            raise ValueError("a distribution needs either kind or both mean and scv")
        return self

    def to_spec(self) -> dist.DistributionSpec:
        if self.kind is None:
            return dist.fit_phase_type(self.mean, self.scv)  # type: ignore[arg-type]
        fields = self.model_dump(exclude_none=True, exclude={"kind", "mean", "scv"})
        if self.kind == "deterministic" and "value" not in fields and self.mean is not None:
            fields["value"] = self.mean
        try:
            return dist.DISTRIBUTION_KINDS[self.kind](**fields)
        except TypeError as exc:
            raise ValueError(f"invalid parameters for {self.kind}: {sorted(fields)}") from exc


DistributionField = Union[float, DistributionModel]


def _to_spec(value: DistributionField) -> dist.DistributionSpec:
    """A bare number means a deterministic time."""
    if isinstance(value, DistributionModel):
        return value.to_spec()
    return dist.Deterministic(float(value))


def parse_discipline(name: str, k: Optional[int] = None) -> Discipline:
    text = name.strip().lower()
    if text == "exhaustive":
        return Exhaustive()
    if text == "gated":
        return Gated()
    if text == "k-limited":
        return KLimited(k if k is not None else 1)
    match = _LIMITED.match(text)
    if match:
        return KLimited(int(match.group(1)))
    raise ValueError(f"unknown discipline {name!r}; use exhaustive, gated, k-limited or '<k>-limited'")


class QueueModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    interarrival: Optional[DistributionModel] = None
    service: DistributionModel
    discipline: str = "exhaustive"
    k: Optional[int] = Field(None, ge=1)
    switchover: DistributionField = 0.0


class SystemModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    visit_order: Literal["cyclic", "longest-queue"] = "cyclic"
    queues: list[QueueModel] = Field(..., min_length=1)

    def to_spec(self) -> SystemSpec:
        return SystemSpec(
            queues=tuple(
                QueueSpec(
                    interarrival=q.interarrival.to_spec() if q.interarrival is not None else None,
                    service=q.service.to_spec(),
                    discipline=parse_discipline(q.discipline, q.k),
                )
                for q in self.queues
            ),
            switchovers=tuple(_to_spec(q.switchover) for q in self.queues),
            visit_order=VisitOrder(self.visit_order),
        )


class ImbalanceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=1)
    rho: float = Field(..., gt=0, lt=1)
    imbalance_arrival: float = Field(1.0, ge=1)
    imbalance_service: float = Field(1.0, ge=1)
    scv_arrival: float = Field(1.0, gt=0)
    service_scv: float = Field(1.0, ge=0)
    switchover: DistributionField = 1.0
    discipline: str = "exhaustive"
    k: Optional[int] = Field(None, ge=1)
    visit_order: Literal["cyclic", "longest-queue"] = "cyclic"

    def to_spec(self) -> SystemSpec:
        params = ImbalanceParams(
            n=self.n,
            rho=self.rho,
            imbalance_arrival=self.imbalance_arrival,
            imbalance_service=self.imbalance_service,
            scv_arrival=self.scv_arrival,
        )
        return system_from_imbalance(
            params,
            switchover=_to_spec(self.switchover),
            service_scv=self.service_scv,
            discipline=parse_discipline(self.discipline, self.k),
            visit_order=VisitOrder(self.visit_order),
        )


class SimulationModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    master_seed: int = Field(DEFAULT_MASTER_SEED, ge=0)
    replications: int = Field(DEFAULT_REPLICATIONS, ge=1)
    cycles_per_replication: Optional[int] = Field(None, ge=1)
    warmup_cycles: Optional[int] = Field(None, ge=0)
    record_queue: int = Field(0, ge=0)
    keep_wait_samples: bool = False
    workers: Optional[int] = Field(None, ge=1)


class ExperimentModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str
    output: Optional[str] = None
    format: Literal["csv", "pretty"] = DEFAULT_OUTPUT_FORMAT  # type: ignore[assignment]
    switchovers: list[float] = Field(default_factory=lambda: list(TABLE_SWITCHOVERS))
    arrival_scvs: list[float] = Field(default_factory=lambda: list(TABLE_ARRIVAL_SCVS))
    table2_arrival_scvs: list[float] = Field(default_factory=lambda: list(TABLE2_ARRIVAL_SCVS))
    imbalances: list[tuple[float, float]] = Field(default_factory=lambda: list(TABLE2_IMBALANCES))
    table2_switchover: float = TABLE2_SWITCHOVER
    multipliers: list[float] = Field(default_factory=lambda: list(LIMIT_SWEEP_MULTIPLIERS))
    grid_size: int = Field(20, ge=2)
    points: list[tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_RESIDUAL_POINTS))
    scale_long_runs: Optional[bool] = None
    cross_check: bool = False

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, value: str) -> str:
        if value not in EXPERIMENT_KINDS:
            raise ValueError(f"kind must be one of {', '.join(EXPERIMENT_KINDS)}")
        return value


class ConfigDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    include: list[str] = Field(default_factory=list)
    experiment: ExperimentModel
    simulation: SimulationModel = Field(default_factory=SimulationModel)
    system: Optional[SystemModel] = None
    imbalance: Optional[ImbalanceModel] = None

    @model_validator(mode="after")
    def validate_system_source(self) -> "ConfigDocument":
        if self.system is not None and self.imbalance is not None:
            raise ValueError("give either [system] or [imbalance], not both")
        return self


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; non-dict values in override replace those in base."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_document(path: str | Path, _stack: tuple[Path, ...] = ()) -> dict[str, Any]:
    """Read a TOML file and resolve its includes into one merged document."""
    resolved = Path(path).resolve()
    if resolved in _stack:
        chain = " -> ".join(str(p) for p in (*_stack, resolved))
        raise ConfigError(f"include cycle: {chain}")
    try:
        with resolved.open("rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {resolved}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {resolved}: {exc}") from exc

    includes = raw.pop("include", [])
    if not isinstance(includes, list) or not all(isinstance(i, str) for i in includes):
        raise ConfigError(f"include must be a list of paths in {resolved}")
    merged: dict[str, Any] = {}
    for include in includes:
        merged = deep_merge(merged, load_document(resolved.parent / include, (*_stack, resolved)))
    return deep_merge(merged, raw)


def build_config(document: dict[str, Any]) -> ExperimentConfig:
    """Validate a merged document and convert it to an ExperimentConfig."""
    try:
        parsed = ConfigDocument.model_validate(document)
        system: Optional[SystemSpec] = None
        if parsed.system is not None:
            system = parsed.system.to_spec()
        elif parsed.imbalance is not None:
            system = parsed.imbalance.to_spec()

        sim = parsed.simulation
        cycles_given = sim.cycles_per_replication is not None
        simulation = SimConfig(
            master_seed=sim.master_seed,
            replications=sim.replications,
            cycles_per_replication=sim.cycles_per_replication or DEFAULT_CYCLES_PER_REPLICATION,
            warmup_cycles=sim.warmup_cycles if sim.warmup_cycles is not None else DEFAULT_WARMUP_CYCLES,
            record_queue=sim.record_queue,
            keep_wait_samples=sim.keep_wait_samples,
            workers=sim.workers or env_int("POLLINGLAB_WORKERS", DEFAULT_WORKERS),
        )
        exp = parsed.experiment
        scale_long_runs = exp.scale_long_runs if exp.scale_long_runs is not None else not cycles_given
        return ExperimentConfig(
            kind=exp.kind,
            simulation=simulation,
            system=system,
            output=exp.output,
            output_format=exp.format,
            switchovers=tuple(exp.switchovers),
            arrival_scvs=tuple(exp.arrival_scvs),
            table2_arrival_scvs=tuple(exp.table2_arrival_scvs),
            imbalances=tuple(exp.imbalances),
            table2_switchover=exp.table2_switchover,
            multipliers=tuple(exp.multipliers),
            grid_size=exp.grid_size,
            points=tuple(exp.points),
            scale_long_runs=scale_long_runs,
            cross_check=exp.cross_check,
        )
    except (StabilityError, ConfigError):
        raise
    except (ValidationError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    document = load_document(path)
    cfg = build_config(document)
    logger.info("Loaded experiment config", extra={"path": str(path), "experiment": cfg.kind})
    return cfg


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    seed: Optional[int] = None,
    replications: Optional[int] = None,
    cycles: Optional[int] = None,
    workers: Optional[int] = None,
    output: Optional[str] = None,
    output_format: Optional[str] = None,
) -> ExperimentConfig:
    """Apply command-line overrides; explicit cycles switch off long-run shortening."""
    sim_changes: dict[str, Any] = {}
    if seed is not None:
        sim_changes["master_seed"] = seed
    if replications is not None:
        sim_changes["replications"] = replications
    if cycles is not None:
        sim_changes["cycles_per_replication"] = cycles
        sim_changes["warmup_cycles"] = min(cfg.simulation.warmup_cycles, max(cycles // 10, 0))
    if workers is not None:
        sim_changes["workers"] = workers
    changes: dict[str, Any] = {}
    try:
        if sim_changes:
            changes["simulation"] = replace(cfg.simulation, **sim_changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cycles is not None:
        changes["scale_long_runs"] = False
    if output is not None:
        changes["output"] = output
    if output_format is not None:
        changes["output_format"] = output_format
    return replace(cfg, **changes) if changes else cfg
