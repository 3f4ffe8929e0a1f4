"""
Exact moment analytics for branching-type polling systems with Poisson arrivals.

The joint queue length at visit epochs is a multi-type branching process with
immigration: during a visit to Q_i each customer present at its start is replaced by
an i.i.d. offspring population (PGF h_i), and during the switch-over S_i Poisson
arrivals immigrate. Differentiating both steps once and twice at z = 1 gives affine
maps on (mean vector, covariance matrix); composing the 2N steps of a cycle and
iterating to the fixed point yields the moments at polling instants.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy import stats as sps

from pollinglab import distributions as dist
from pollinglab.config import MOMENT_MAX_CYCLES, MOMENT_TOLERANCE
from pollinglab.errors import NotBranchingError, NumericalError
from pollinglab.model import Exhaustive, Gated, SystemSpec, VisitOrder, describe_discipline

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BusyPeriodMoments:
    mean: float
    second_moment: float


@dataclass(frozen=True)
class OffspringMoments:
    """
    First and second derivatives at z = 1 of the offspring PGF h_i of one queue.

    first[j] is the mean number of type-j offspring per customer served at Q_i;
    second[j, l] is the second mixed derivative.
    """

    queue: int
    first: np.ndarray
    second: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return self.second + np.diag(self.first) - np.outer(self.first, self.first)

    @property
    def exhaustiveness(self) -> float:
        return 1.0 - float(self.first[self.queue])


@dataclass(frozen=True)
class MomentSolution:
    """Mean and covariance of the joint queue length at polling instants of one queue."""

    mean: np.ndarray
    covariance: np.ndarray
    queue: int = 0
    iterations: int = 0

    @property
    def scv(self) -> float:
        m = float(self.mean[self.queue])
        if m == 0:
            return math.nan
        return float(self.covariance[self.queue, self.queue]) / (m * m)

    @property
    def scv_at_q1(self) -> float:
        m = float(self.mean[0])
        if m == 0:
            return math.nan
        return float(self.covariance[0, 0]) / (m * m)


@dataclass(frozen=True)
class LimitLaw:
    """
    Limit of W_i / S as deterministic switch-over times grow: scale * U with U uniform
    on [support_low, support_high].
    """

    scale: float
    support_low: float
    support_high: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if not 0.0 <= self.support_low < self.support_high:
            raise ValueError("support must satisfy 0 <= low < high")

    @property
    def lower(self) -> float:
        return self.scale * self.support_low

    @property
    def upper(self) -> float:
        return self.scale * self.support_high

    @property
    def mean(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def variance(self) -> float:
        return (self.upper - self.lower) ** 2 / 12.0

    @property
    def scv(self) -> float:
        low, high = self.support_low, self.support_high
        return (high - low) ** 2 / (3.0 * (high + low) ** 2)

    def cdf(self, x: float | np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower), 0.0, 1.0)

    def distribution(self) -> "sps.rv_continuous":
        return sps.uniform(loc=self.lower, scale=self.upper - self.lower)


def _require_branching(spec: SystemSpec, i: int) -> None:
    if not 0 <= i < spec.n:
        raise ValueError(f"queue index must be in [0, {spec.n})")
    discipline = spec.queues[i].discipline
    if not isinstance(discipline, (Exhaustive, Gated)):
        raise NotBranchingError(
            f"queue {i} has {describe_discipline(discipline)} service, which is not branching-type"
        )


def _require_poisson(spec: SystemSpec) -> None:
    if not spec.is_poisson:
        raise ValueError("branching analysis requires Poisson arrivals at every queue")


def _require_cyclic(spec: SystemSpec) -> None:
    if spec.visit_order is not VisitOrder.CYCLIC:
        raise ValueError("branching analysis requires the cyclic visit order")


def busy_period_moments(spec: SystemSpec, i: int) -> BusyPeriodMoments:
    """M/G/1 busy-period moments of Q_i in isolation."""
    queue = spec.queues[i]
    rest = 1.0 - queue.load
    return BusyPeriodMoments(
        mean=queue.mean_service / rest,
        second_moment=queue.service_second_moment / rest**3,
    )


def exhaustiveness(spec: SystemSpec, i: int) -> float:
    """Phi_i = 1 - dh_i/dz_i at z = 1: 1 for exhaustive, 1 - rho_i for gated."""
    _require_branching(spec, i)
    if isinstance(spec.queues[i].discipline, Exhaustive):
        return 1.0
    return 1.0 - spec.queues[i].load


def offspring_moments(spec: SystemSpec, i: int) -> OffspringMoments:
    """Derivatives of h_i at z = 1 from the service (gated) or busy-period (exhaustive) moments."""
    _require_branching(spec, i)
    _require_poisson(spec)
    lam = np.asarray(spec.arrival_rates, dtype=float)
    queue = spec.queues[i]
    if isinstance(queue.discipline, Gated):
        first = lam * queue.mean_service
        second = np.outer(lam, lam) * queue.service_second_moment
    else:
        busy = busy_period_moments(spec, i)
        others = lam.copy()
        others[i] = 0.0
        first = others * busy.mean
        second = np.outer(others, others) * busy.second_moment
    return OffspringMoments(queue=i, first=first, second=second)


def _visit_matrix(offspring: OffspringMoments, n: int) -> np.ndarray:
    matrix = np.eye(n)
    matrix[:, offspring.queue] = offspring.first
    return matrix


class _CycleMap:
    """The 2N affine steps of one cycle, starting at the visit start of Q_1."""

    def __init__(self, spec: SystemSpec) -> None:
        n = spec.n
        self.n = n
        self.lam = np.asarray(spec.arrival_rates, dtype=float)
        offspring = [offspring_moments(spec, i) for i in range(n)]
        self.visit_matrices = [_visit_matrix(o, n) for o in offspring]
        self.offspring_cov = [o.covariance for o in offspring]
        self.switch_mean = [dist.mean(s) for s in spec.switchovers]
        self.switch_var = [dist.variance(s) for s in spec.switchovers]
        lam_outer = np.outer(self.lam, self.lam)
        self.immigration_cov = [
            np.diag(self.lam * m) + lam_outer * v for m, v in zip(self.switch_mean, self.switch_var)
        ]

    def visit(self, i: int, mean: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        matrix = self.visit_matrices[i]
        new_mean = matrix @ mean
        new_cov = matrix @ cov @ matrix.T + mean[i] * self.offspring_cov[i]
        return new_mean, new_cov

    def switch(self, i: int, mean: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return mean + self.lam * self.switch_mean[i], cov + self.immigration_cov[i]

    def cycle(
        self, mean: np.ndarray, cov: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        """Apply one cycle; also return the moments at every visit start on the way."""
        starts = []
        for i in range(self.n):
            starts.append((mean, cov))
            mean, cov = self.visit(i, mean, cov)
            mean, cov = self.switch(i, mean, cov)
        return mean, 0.5 * (cov + cov.T), starts

    def mean_matrix(self) -> np.ndarray:
        composite = np.eye(self.n)
        for matrix in self.visit_matrices:
            composite = matrix @ composite
        return composite


def _iterate(
    cycle_map: _CycleMap,
    start: np.ndarray | None,
    tol: float,
    max_cycles: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    n = cycle_map.n
    mean = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    cov = np.zeros((n, n))
    for iteration in range(1, max_cycles + 1):
        new_mean, new_cov, _ = cycle_map.cycle(mean, cov)
        change = max(np.max(np.abs(new_mean - mean)), np.max(np.abs(new_cov - cov)))
        magnitude = max(1.0, np.max(np.abs(new_mean)), np.max(np.abs(new_cov)))
        mean, cov = new_mean, new_cov
        if change <= tol * magnitude:
            return mean, cov, iteration
    raise NumericalError(f"moment recursion did not converge within {max_cycles} cycles")


def _solve_direct(cycle_map: _CycleMap) -> tuple[np.ndarray, np.ndarray]:
    n = cycle_map.n
    a = cycle_map.mean_matrix()
    offset, _, _ = cycle_map.cycle(np.zeros(n), np.zeros((n, n)))
    try:
        mean = np.linalg.solve(np.eye(n) - a, offset)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("mean fixed point is singular") from exc
    _, forcing, _ = cycle_map.cycle(mean, np.zeros((n, n)))
    cov = linalg.solve_discrete_lyapunov(a, forcing)
    return mean, 0.5 * (cov + cov.T)


def polling_moments(
    spec: SystemSpec,
    *,
    method: str = "iterate",
    start: Sequence[float] | None = None,
    tol: float = MOMENT_TOLERANCE,
    max_cycles: int = MOMENT_MAX_CYCLES,
) -> MomentSolution:
    """
    Mean vector and covariance of the joint queue length at Q_1 polling instants.

    method "iterate" runs the per-step recursion to its fixed point (relative max-norm
    change below tol); "direct" solves the mean as a linear system and the covariance
    as a discrete Lyapunov equation.
    """
    _require_cyclic(spec)
    for i in range(spec.n):
        _require_branching(spec, i)
    _require_poisson(spec)

    cycle_map = _CycleMap(spec)
    if method == "iterate":
        mean, cov, iterations = _iterate(cycle_map, start, tol, max_cycles)
    elif method == "direct":
        mean, cov = _solve_direct(cycle_map)
        iterations = 0
    else:
        raise ValueError("method must be 'iterate' or 'direct'")
    logger.debug(
        "Polling moments solved",
        extra={"method": method, "iterations": iterations, "queues": spec.n},
    )
    return MomentSolution(mean=mean, covariance=cov, queue=0, iterations=iterations)


def visit_start_moments(spec: SystemSpec) -> tuple[MomentSolution, ...]:
    """Fixed-point moments at the visit start of every queue (index i: polling instant of Q_i)."""
    solution = polling_moments(spec)
    cycle_map = _CycleMap(spec)
    _, _, starts = cycle_map.cycle(solution.mean, solution.covariance)
    return tuple(
        MomentSolution(mean=m, covariance=0.5 * (c + c.T), queue=i, iterations=solution.iterations)
        for i, (m, c) in enumerate(starts)
    )


def mean_waiting_times(spec: SystemSpec) -> tuple[float, ...]:
    """
    Exact E[W_i] from the visit-start queue lengths.

    The queue length X_i at a Q_i visit start counts the Poisson arrivals during the
    preceding intervisit time (exhaustive) or cycle (gated), so its factorial moments
    give the first two moments of that period. Queues without arrivals get nan.
    """
    starts = visit_start_moments(spec)
    waits = []
    for i, queue in enumerate(spec.queues):
        lam = queue.arrival_rate
        if lam == 0:
            waits.append(math.nan)
            continue
        m = float(starts[i].mean[i])
        factorial = float(starts[i].covariance[i, i]) + m * m - m
        first = m / lam
        second = factorial / (lam * lam)
        residual = second / (2.0 * first)
        if isinstance(queue.discipline, Exhaustive):
            waits.append(residual + lam * queue.service_second_moment / (2.0 * (1.0 - queue.load)))
        else:
            waits.append((1.0 + queue.load) * residual)
    return tuple(waits)


def limit_law(spec: SystemSpec, i: int) -> LimitLaw:
    """Uniform limit of W_i / S for deterministic switch-over times growing without bound."""
    _require_branching(spec, i)
    if not spec.has_deterministic_switchovers:
        raise ValueError("the limit law requires deterministic switch-over times")
    if spec.mean_total_switchover <= 0:
        raise ValueError("the limit law requires E[S] > 0")
    phi = exhaustiveness(spec, i)
    return LimitLaw(
        scale=(1.0 - spec.queues[i].load) / (1.0 - spec.rho),
        support_low=(1.0 - phi) / phi,
        support_high=1.0 / phi,
    )


def scv_decay_ratio(spec: SystemSpec, scale_factors: Sequence[float]) -> list[float]:
    """SCV at Q_1 polling instants after multiplying every switch-over time by each factor."""
    if not spec.has_deterministic_switchovers:
        raise ValueError("scv_decay_ratio requires deterministic switch-over times")
    return [polling_moments(spec.with_switchover_scale(f)).scv_at_q1 for f in scale_factors]


def truncated_pgf(spec: SystemSpec, z: Sequence[float], depth: int = 200) -> float:
    """
    Diagnostic: F_1(z) at a real point of [0, 1]^N by truncating the iterated product.

    Walks the cycle backwards (switch-over factor, then offspring substitution) depth
    times and replaces the remaining F_1 factor by 1.
    """
    from pollinglab.twoqueue import busy_period_lst

    _require_cyclic(spec)
    for i in range(spec.n):
        _require_branching(spec, i)
    _require_poisson(spec)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    w = np.asarray(z, dtype=float).copy()
    if w.shape != (spec.n,) or np.any(w < 0) or np.any(w > 1):
        raise ValueError("z must be a point of [0, 1]^N")

    lam = np.asarray(spec.arrival_rates, dtype=float)
    product = 1.0
    for _ in range(depth):
        for i in reversed(range(spec.n)):
            product *= float(np.real(dist.lst(spec.switchovers[i], float(lam @ (1.0 - w)))))
            queue = spec.queues[i]
            if isinstance(queue.discipline, Gated):
                h = dist.lst(queue.service, float(lam @ (1.0 - w)))
            else:
                others = lam @ (1.0 - w) - lam[i] * (1.0 - w[i])
                h = busy_period_lst(float(others), queue.service, queue.arrival_rate)
            w[i] = float(np.real(h))
    return product
