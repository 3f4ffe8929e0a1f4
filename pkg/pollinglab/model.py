"""
Polling-system parameterization and derived load quantities.

This module holds only typed models, validation and closed-form
arithmetic on them. Unstable systems are rejected at construction, so every
downstream module may assume rho < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import ClassVar, Sequence, Union

from pollinglab import distributions as dist
from pollinglab.distributions import DistributionSpec, Exponential
from pollinglab.errors import StabilityError


@dataclass(frozen=True)
class Exhaustive:
    name: ClassVar[str] = "exhaustive"


@dataclass(frozen=True)
class Gated:
    name: ClassVar[str] = "gated"


@dataclass(frozen=True)
class KLimited:
    """Serve at most k customers per visit; k = 1 is 1-limited."""

    name: ClassVar[str] = "k-limited"

    k: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")


Discipline = Union[Exhaustive, Gated, KLimited]


def is_branching(discipline: Discipline) -> bool:
    """Exhaustive and gated are branching-type; k-limited is not."""
    return isinstance(discipline, (Exhaustive, Gated))


def describe_discipline(discipline: Discipline) -> str:
    if isinstance(discipline, KLimited):
        return f"{discipline.k}-limited"
    return discipline.name


class VisitOrder(Enum):
    CYCLIC = "cyclic"
    LONGEST_QUEUE = "longest-queue"


@dataclass(frozen=True)
class QueueSpec:
    """
    One queue: renewal arrival stream, service law and discipline.

    interarrival None means the queue receives no arrivals (lambda_i = 0).
    """

    interarrival: DistributionSpec | None
    service: DistributionSpec
    discipline: Discipline = field(default_factory=Exhaustive)

    def __post_init__(self) -> None:
        if self.interarrival is not None and dist.mean(self.interarrival) <= 0:
            raise ValueError("interarrival mean must be > 0")
        if dist.mean(self.service) <= 0:
            raise ValueError("service mean must be > 0")

    @property
    def arrival_rate(self) -> float:
        if self.interarrival is None:
            return 0.0
        return 1.0 / dist.mean(self.interarrival)

    @property
    def mean_service(self) -> float:
        return dist.mean(self.service)

    @property
    def service_second_moment(self) -> float:
        return dist.moments(self.service).second_moment

    @property
    def load(self) -> float:
        return self.arrival_rate * self.mean_service

    @property
    def is_poisson(self) -> bool:
        return self.interarrival is None or isinstance(self.interarrival, Exponential)


@dataclass(frozen=True)
class DerivedLoads:
    loads: tuple[float, ...]
    rho: float
    mean_total_switchover: float
    mean_cycle: float


@dataclass(frozen=True)
class SystemSpec:
    """
    N queues, N switch-over laws (S_i from Q_i to Q_{i+1}) and a visit order.

    Immutable after construction; safe to share across workers.
    """

    queues: tuple[QueueSpec, ...]
    switchovers: tuple[DistributionSpec, ...]
    visit_order: VisitOrder = VisitOrder.CYCLIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "queues", tuple(self.queues))
        object.__setattr__(self, "switchovers", tuple(self.switchovers))
        if not self.queues:
            raise ValueError("queues must contain at least one queue")
        if len(self.switchovers) != len(self.queues):
            raise ValueError("switchovers must have one entry per queue")
        rho = self.rho
        if rho >= 1.0:
            raise StabilityError(f"system is unstable: rho={rho:.6g} >= 1")
        mean_cycle = self.mean_cycle
        for index, queue in enumerate(self.queues):
            if isinstance(queue.discipline, KLimited):
                services_per_cycle = queue.arrival_rate * mean_cycle
                if services_per_cycle >= queue.discipline.k:
                    raise StabilityError(
                        f"queue {index} is unstable under {queue.discipline.k}-limited service: "
                        f"lambda*E[S]/(1-rho)={services_per_cycle:.6g} >= k"
                    )

    @property
    def n(self) -> int:
        return len(self.queues)

    @property
    def arrival_rates(self) -> tuple[float, ...]:
        return tuple(q.arrival_rate for q in self.queues)

    @property
    def mean_service_times(self) -> tuple[float, ...]:
        return tuple(q.mean_service for q in self.queues)

    @property
    def loads(self) -> tuple[float, ...]:
        return tuple(q.load for q in self.queues)

    @property
    def rho(self) -> float:
        return math.fsum(self.loads)

    @property
    def mean_total_switchover(self) -> float:
        return math.fsum(dist.mean(s) for s in self.switchovers)

    @property
    def total_switchover_second_moment(self) -> float:
        """E[S^2] for the independent sum S of the switch-over times."""
        var = math.fsum(dist.variance(s) for s in self.switchovers)
        return var + self.mean_total_switchover**2

    @property
    def mean_cycle(self) -> float:
        return self.mean_total_switchover / (1.0 - self.rho)

    @property
    def is_poisson(self) -> bool:
        return all(q.is_poisson for q in self.queues)

    @property
    def is_branching(self) -> bool:
        return all(is_branching(q.discipline) for q in self.queues)

    @property
    def has_deterministic_switchovers(self) -> bool:
        return all(isinstance(s, dist.Deterministic) for s in self.switchovers)

    def with_switchover_scale(self, factor: float) -> "SystemSpec":
        """Return a copy with every switch-over law multiplied by factor (> 0)."""
        if not (factor > 0 and math.isfinite(factor)):
            raise ValueError("factor must be a finite value > 0")
        scaled = []
        for s in self.switchovers:
            if isinstance(s, dist.Deterministic) and s.value == 0:
                scaled.append(s)
            else:
                scaled.append(dist.scaled(s, factor))
        return replace(self, switchovers=tuple(scaled))


def derived_loads(spec: SystemSpec) -> DerivedLoads:
    """Per-queue loads, total load, E[S] and the mean cycle time E[S]/(1-rho)."""
    rho = spec.rho
    if rho >= 1.0:
        raise StabilityError(f"system is unstable: rho={rho:.6g} >= 1")
    return DerivedLoads(
        loads=spec.loads,
        rho=rho,
        mean_total_switchover=spec.mean_total_switchover,
        mean_cycle=spec.mean_cycle,
    )


@dataclass(frozen=True)
class ImbalanceParams:
    """Load and imbalance ratios for an asymmetric N-queue system."""

    n: int
    rho: float
    imbalance_arrival: float = 1.0
    imbalance_service: float = 1.0
    scv_arrival: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")
        if self.imbalance_arrival < 1.0:
            raise ValueError("imbalance_arrival must be >= 1")
        if self.imbalance_service < 1.0:
            raise ValueError("imbalance_service must be >= 1")
        if self.scv_arrival <= 0.0:
            raise ValueError("scv_arrival must be > 0")


def rates_from_imbalance(p: ImbalanceParams) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """
    Arrival rates and mean service times realising the requested imbalance.

    lambda_i decreases arithmetically from lambda_1 with lambda_1/lambda_N = I_A and
    mean 1; E[B_i] increases arithmetically from E[B_1] with E[B_N]/E[B_1] = I_B, scaled
    so that sum(lambda_i * E[B_i]) = rho.
    """
    n = p.n
    if n == 1:
        if p.imbalance_arrival != 1.0 or p.imbalance_service != 1.0:
            raise ValueError("a single queue admits no imbalance other than 1")
        return (1.0,), (p.rho,)

    ia, ib = p.imbalance_arrival, p.imbalance_service
    first = 2.0 * ia / (1.0 + ia)
    last = 2.0 / (1.0 + ia)
    step = (first - last) / (n - 1)
    rates = tuple(first - i * step for i in range(n))
    weights = tuple(1.0 + i * (ib - 1.0) / (n - 1) for i in range(n))
    base = p.rho / math.fsum(r * w for r, w in zip(rates, weights))
    means = tuple(base * w for w in weights)
    if min(rates) <= 0 or min(means) <= 0:
        raise ValueError("imbalance parameters admit no positive solution")
    return rates, means


def symmetric_system(
    n: int,
    *,
    interarrival: DistributionSpec | None,
    service: DistributionSpec,
    switchover: DistributionSpec,
    discipline: Discipline | None = None,
    visit_order: VisitOrder = VisitOrder.CYCLIC,
) -> SystemSpec:
    """N identical queues with identical switch-over laws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    queue = QueueSpec(
        interarrival=interarrival,
        service=service,
        discipline=discipline if discipline is not None else Exhaustive(),
    )
    return SystemSpec(
        queues=tuple(queue for _ in range(n)),
        switchovers=tuple(switchover for _ in range(n)),
        visit_order=visit_order,
    )


def system_from_imbalance(
    params: ImbalanceParams,
    *,
    switchover: DistributionSpec,
    service_scv: float = 1.0,
    discipline: Discipline | None = None,
    visit_order: VisitOrder = VisitOrder.CYCLIC,
) -> SystemSpec:
    """Build a system whose rates follow rates_from_imbalance, with fitted laws."""
    rates, means = rates_from_imbalance(params)
    chosen = discipline if discipline is not None else Exhaustive()
    queues = tuple(
        QueueSpec(
            interarrival=dist.fit_phase_type(1.0 / rate, params.scv_arrival),
            service=dist.fit_phase_type(mean, service_scv),
            discipline=chosen,
        )
        for rate, mean in zip(rates, means)
    )
    return SystemSpec(
        queues=queues,
        switchovers=tuple(switchover for _ in range(params.n)),
        visit_order=visit_order,
    )


def describe_system(spec: SystemSpec) -> str:
    """Compact, stable text form used in logs and CSV parameter columns."""
    parts: Sequence[str] = [
        f"Q{i + 1}[{dist.describe(q.interarrival)};{dist.describe(q.service)};"
        f"{describe_discipline(q.discipline)};S={dist.describe(s)}]"
        for i, (q, s) in enumerate(zip(spec.queues, spec.switchovers))
    ]
    return f"{spec.visit_order.value}:" + "|".join(parts)
