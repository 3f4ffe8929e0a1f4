"""
Transform machinery for two-queue polling systems with a 1-limited second queue.

- E/1-L: exact evaluation of the joint PGF F_1(z1, z2) at Q_1 polling instants through
  the substitution z1 = g(z2), with g(z2) = pi_1(lambda_2 (1 - z2)) by default.
- G/1-L: residual of the functional equation for a supplied (e.g. empirical) F_1.
- Pseudo-conservation law for mixes of exhaustive, gated and 1-limited queues.

All transforms accept complex arguments in the closed unit (bi)disk.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from pollinglab import distributions as dist
from pollinglab.config import (
    BUSY_PERIOD_MAX_ITERATIONS,
    BUSY_PERIOD_TOLERANCE,
    CONSTANT_AGREEMENT_TOLERANCE,
    DERIVATIVE_STEP,
    PSI_NEAR_ONE_RADIUS,
    RICHARDSON_BASE_STEP,
    RICHARDSON_LEVELS,
)
from pollinglab.distributions import DistributionSpec
from pollinglab.errors import (
    InsufficientSamplesError,
    NotBranchingError,
    NumericalError,
    StabilityError,
    TransformDomainError,
)
from pollinglab.model import (
    Exhaustive,
    Gated,
    KLimited,
    QueueSpec,
    SystemSpec,
    VisitOrder,
    describe_discipline,
)
from pollinglab.simulate import SimResult

logger = logging.getLogger(__name__)

Number = Union[float, complex]
PGF = Callable[[Number, Number], Number]

_DISK_TOLERANCE = 1e-12
MIN_PGF_SAMPLES = 10


def busy_period_lst(
    s: Number,
    service: DistributionSpec,
    arrival_rate: float,
    *,
    tol: float = BUSY_PERIOD_TOLERANCE,
    max_iterations: int = BUSY_PERIOD_MAX_ITERATIONS,
) -> Number:
    """LST of the M/G/1 busy period: the fixed point pi = beta(s + lambda (1 - pi)), from pi = 1."""
    if arrival_rate * dist.mean(service) >= 1.0:
        raise StabilityError("busy period is defective: rho_1 >= 1")
    if np.real(s) < -_DISK_TOLERANCE:
        raise TransformDomainError("busy-period LST needs Re(s) >= 0")
    pi: Number = 1.0
    for _ in range(max_iterations):
        new = dist.lst(service, s + arrival_rate * (1.0 - pi))
        if abs(new - pi) <= tol:
            return new
        pi = new
    raise NumericalError(f"busy-period LST did not converge within {max_iterations} iterations")


def busy_period_lst_derivative(s: Number, service: DistributionSpec, arrival_rate: float) -> Number:
    """pi'(s) = beta'(x) / (1 + lambda beta'(x)) with x = s + lambda (1 - pi(s))."""
    pi = busy_period_lst(s, service, arrival_rate)
    slope = dist.lst_derivative(service, s + arrival_rate * (1.0 - pi))
    return slope / (1.0 + arrival_rate * slope)


@dataclass(frozen=True)
class TwoQueueSpec:
    """Q1 exhaustive or gated, Q2 1-limited, Poisson arrivals, cyclic order."""

    q1: QueueSpec
    q2: QueueSpec
    switchovers: tuple[DistributionSpec, DistributionSpec]

    def __post_init__(self) -> None:
        object.__setattr__(self, "switchovers", tuple(self.switchovers))
        if len(self.switchovers) != 2:
            raise ValueError("switchovers must hold exactly (S_1, S_2)")
        if not isinstance(self.q1.discipline, (Exhaustive, Gated)):
            raise ValueError("q1 must have exhaustive or gated service")
        if not (isinstance(self.q2.discipline, KLimited) and self.q2.discipline.k == 1):
            raise ValueError("q2 must have 1-limited service")
        if not (self.q1.is_poisson and self.q2.is_poisson):
            raise ValueError("two-queue transforms require Poisson arrivals")
        if self.rho >= 1.0:
            raise StabilityError(f"system is unstable: rho={self.rho:.6g} >= 1")
        if self.lam2 * self.mean_total_switchover >= 1.0 - self.rho:
            raise StabilityError("1-limited queue is unstable: lambda_2 E[S] >= 1 - rho")

    @classmethod
    def from_system(cls, spec: SystemSpec) -> "TwoQueueSpec":
        if spec.n != 2:
            raise ValueError("a two-queue spec needs exactly 2 queues")
        if spec.visit_order is not VisitOrder.CYCLIC:
            raise ValueError("a two-queue spec needs the cyclic visit order")
        return cls(q1=spec.queues[0], q2=spec.queues[1], switchovers=spec.switchovers)  # type: ignore[arg-type]

    def to_system(self) -> SystemSpec:
        return SystemSpec(queues=(self.q1, self.q2), switchovers=self.switchovers)

    @property
    def lam1(self) -> float:
        return self.q1.arrival_rate

    @property
    def lam2(self) -> float:
        return self.q2.arrival_rate

    @property
    def rho1(self) -> float:
        return self.q1.load

    @property
    def rho2(self) -> float:
        return self.q2.load

    @property
    def rho(self) -> float:
        return self.rho1 + self.rho2

    @property
    def mean_total_switchover(self) -> float:
        return dist.mean(self.switchovers[0]) + dist.mean(self.switchovers[1])

    def argument(self, z1: Number, z2: Number) -> Number:
        """lambda_1 (1 - z1) + lambda_2 (1 - z2): the LST argument behind beta_i(z1, z2), sigma_i(z1, z2)."""
        return self.lam1 * (1.0 - z1) + self.lam2 * (1.0 - z2)


@dataclass(frozen=True)
class TransformPoint:
    z1: Number
    z2: Number

    def __post_init__(self) -> None:
        if abs(self.z1) > 1.0 + _DISK_TOLERANCE or abs(self.z2) > 1.0 + _DISK_TOLERANCE:
            raise TransformDomainError(f"point ({self.z1}, {self.z2}) lies outside the closed unit bidisk")


@dataclass(frozen=True)
class VisitPGF:
    """g(z2): PGF of the Q2 population that replaces one Q1 customer, and its derivative."""

    value: Callable[[Number], Number]
    derivative: Callable[[Number], Number]

    @property
    def mean(self) -> float:
        return float(np.real(self.derivative(1.0)))


def busy_period_visit_pgf(spec: TwoQueueSpec, rate: Optional[float] = None) -> VisitPGF:
    """
    g(z2) = pi_1(rate (1 - z2)); rate defaults to lambda_2.

    A different rate models Q2 arrivals with rate lambda_2* while the server is at Q1.
    """
    during = spec.lam2 if rate is None else rate
    if during < 0:
        raise ValueError("rate must be >= 0")
    service, lam1 = spec.q1.service, spec.lam1

    def value(z2: Number) -> Number:
        return busy_period_lst(during * (1.0 - z2), service, lam1)

    def derivative(z2: Number) -> Number:
        return -during * busy_period_lst_derivative(during * (1.0 - z2), service, lam1)

    return VisitPGF(value=value, derivative=derivative)


def _visit_pgf(spec: TwoQueueSpec, g: Optional[VisitPGF]) -> VisitPGF:
    if g is not None:
        return g
    if not isinstance(spec.q1.discipline, Exhaustive):
        raise ValueError("the default g(z2) requires exhaustive service at Q1")
    return busy_period_visit_pgf(spec)


def _ratio(spec: TwoQueueSpec, g: VisitPGF, z2: Number) -> tuple[Number, Number]:
    """psi(z2) / C and its derivative, for z2 away from 1."""
    b2, s1, s2 = spec.q2.service, spec.switchovers[0], spec.switchovers[1]
    lam1, lam2 = spec.lam1, spec.lam2
    u, du = g.value(z2), g.derivative(z2)
    s = spec.argument(u, z2)
    s0 = spec.argument(u, 0.0)
    ds = -lam1 * du - lam2
    ds0 = -lam1 * du

    beta, dbeta = dist.lst(b2, s), dist.lst_derivative(b2, s)
    sig1, dsig1 = dist.lst(s1, s), dist.lst_derivative(s1, s)
    sig2, dsig2 = dist.lst(s2, s), dist.lst_derivative(s2, s)
    sig1_0, dsig1_0 = dist.lst(s1, s0), dist.lst_derivative(s1, s0)

    excess = z2 - beta
    num = sig1_0 * sig2 * excess
    dnum = (
        dsig1_0 * ds0 * sig2 * excess
        + sig1_0 * dsig2 * ds * excess
        + sig1_0 * sig2 * (1.0 - dbeta * ds)
    )
    product = beta * sig2 * sig1
    dproduct = (dbeta * sig2 * sig1 + beta * dsig2 * sig1 + beta * sig2 * dsig1) * ds
    den = z2 - product
    dden = 1.0 - dproduct
    if den == 0:
        raise NumericalError(f"psi denominator vanishes at z2={z2}")
    return num / den, (dnum * den - num * dden) / (den * den)


def _richardson_limit(values: Sequence[Number], steps: Sequence[float]) -> Number:
    """Neville extrapolation of values(h) to h = 0."""
    table = list(values)
    for level in range(1, len(table)):
        for k in range(len(table) - level):
            h_near, h_far = steps[k], steps[k + level]
            table[k] = (h_near * table[k + 1] - h_far * table[k]) / (h_near - h_far)
    return table[0]


def e1l_constant_C(
    spec: TwoQueueSpec,
    *,
    g: Optional[VisitPGF] = None,
    method: str = "analytic",
) -> float:
    """
    C = F_1(g(0), 0), fixed by the normalization psi(1) = F_1(1, 1) = 1.

    "analytic" applies L'Hopital to psi(z2) = C N(z2)/D(z2) at z2 = 1; "numerical"
    Richardson-extrapolates N/D along z2 = 1 - h.
    """
    visit = _visit_pgf(spec, g)
    if method == "analytic":
        b2_mean = dist.mean(spec.q2.service)
        slope = spec.lam1 * visit.mean + spec.lam2
        numerator = 1.0 - (b2_mean + spec.mean_total_switchover) * slope
        denominator = float(np.real(dist.lst(spec.switchovers[0], spec.lam2))) * (1.0 - b2_mean * slope)
        if denominator == 0:
            raise NumericalError("normalization limit degenerates")
        constant = numerator / denominator
    elif method == "numerical":
        steps = [RICHARDSON_BASE_STEP / 2**k for k in range(RICHARDSON_LEVELS)]
        ratios = [float(np.real(_ratio(spec, visit, 1.0 - h)[0])) for h in steps]
        limit = float(np.real(_richardson_limit(ratios, steps)))
        if limit == 0:
            raise NumericalError("normalization limit degenerates")
        constant = 1.0 / limit
    else:
        raise ValueError("method must be 'analytic' or 'numerical'")
    if not 0.0 < constant <= 1.0 + 1e-12:
        raise NumericalError(f"normalization constant C={constant:.6g} outside (0, 1]")
    return constant


def check_constant_agreement(spec: TwoQueueSpec, *, g: Optional[VisitPGF] = None) -> float:
    """Return the analytic C after checking it against the numerical limit."""
    analytic = e1l_constant_C(spec, g=g, method="analytic")
    numerical = e1l_constant_C(spec, g=g, method="numerical")
    if abs(analytic - numerical) > CONSTANT_AGREEMENT_TOLERANCE:
        raise NumericalError(
            f"analytic C={analytic:.12g} and numerical C={numerical:.12g} disagree"
        )
    logger.debug("Normalization constant", extra={"analytic": analytic, "numerical": numerical})
    return analytic


def _psi(spec: TwoQueueSpec, g: VisitPGF, z2: Number, c: float) -> Number:
    """
    C N(z2)/D(z2), with psi(1) = 1.

    Near z2 = 1 both N and D vanish, so the value there comes from the quadratic
    through psi(1) = 1 and the ratio one and two radii below 1.
    """
    radius = PSI_NEAR_ONE_RADIUS
    if abs(z2 - 1.0) >= radius:
        return c * _ratio(spec, g, z2)[0]
    near = c * _ratio(spec, g, 1.0 - radius)[0]
    far = c * _ratio(spec, g, 1.0 - 2.0 * radius)[0]
    t = (1.0 - z2) / radius
    return 0.5 * (t - 1.0) * (t - 2.0) - t * (t - 2.0) * near + 0.5 * t * (t - 1.0) * far


def e1l_psi(spec: TwoQueueSpec, z2: Number, *, g: Optional[VisitPGF] = None, constant: Optional[float] = None) -> Number:
    """psi(z2) = F_1(g(z2), z2)."""
    TransformPoint(0.0, z2)
    visit = _visit_pgf(spec, g)
    c = e1l_constant_C(spec, g=visit) if constant is None else constant
    return _psi(spec, visit, z2, c)


def e1l_eval(
    spec: TwoQueueSpec,
    z1: Number,
    z2: Number,
    *,
    g: Optional[VisitPGF] = None,
    constant: Optional[float] = None,
) -> Number:
    """
    F_1(z1, z2) of the E/1-L system at Q_1 polling instants.

    At z2 = 0 the removable singularity is resolved by differentiating the bracket,
    whose value vanishes there because psi(0) = C.
    """
    TransformPoint(z1, z2)
    visit = _visit_pgf(spec, g)
    c = e1l_constant_C(spec, g=visit) if constant is None else constant
    b2, s1, s2 = spec.q2.service, spec.switchovers[0], spec.switchovers[1]
    s = spec.argument(z1, z2)
    s10 = spec.argument(z1, 0.0)
    beta, sig1, sig2 = dist.lst(b2, s), dist.lst(s1, s), dist.lst(s2, s)
    sig1_0 = dist.lst(s1, s10)

    if z2 == 0:
        ratio, dratio = _ratio(spec, visit, 0.0)
        psi0, dpsi0 = c * ratio, c * dratio
        dsig1 = dist.lst_derivative(s1, s10) * (-spec.lam2)
        bracket_slope = dsig1 * psi0 + sig1_0 * dpsi0
        return beta * sig2 * bracket_slope + c * sig2 * sig1_0

    psi = _psi(spec, visit, z2, c)
    return beta * sig2 / z2 * (sig1 * psi - c * sig1_0) + c * sig2 * sig1_0


def e1l_residual(
    spec: TwoQueueSpec,
    z1: Number,
    z2: Number,
    *,
    g: Optional[VisitPGF] = None,
) -> float:
    """|LHS - RHS| of the combined functional equation with F_1 = e1l_eval on both sides."""
    if z2 == 0:
        raise TransformDomainError("the functional equation is singular at z2 = 0")
    visit = _visit_pgf(spec, g)
    c = e1l_constant_C(spec, g=visit)

    def evaluator(a: Number, b: Number) -> Number:
        return e1l_eval(spec, a, b, g=visit, constant=c)

    return g1l_residual(evaluator, spec, z1, z2, h1=lambda _z1, z2_: visit.value(z2_)).value


def e1l_mean_queue_lengths(
    spec: TwoQueueSpec,
    *,
    g: Optional[VisitPGF] = None,
    step: float = DERIVATIVE_STEP,
) -> tuple[float, float]:
    """(dF_1/dz1, dF_1/dz2) at (1, 1) by second-order one-sided differences."""
    visit = _visit_pgf(spec, g)
    c = e1l_constant_C(spec, g=visit)

    def f(a: float, b: float) -> float:
        return float(np.real(e1l_eval(spec, a, b, g=visit, constant=c)))

    centre = f(1.0, 1.0)
    d1 = (3.0 * centre - 4.0 * f(1.0 - step, 1.0) + f(1.0 - 2 * step, 1.0)) / (2.0 * step)
    d2 = (3.0 * centre - 4.0 * f(1.0, 1.0 - step) + f(1.0, 1.0 - 2 * step)) / (2.0 * step)
    return d1, d2


class EmpiricalPGF:
    """
    Sample-mean estimate of F_1 from simulated joint queue lengths at Q_1 polling instants.

    Standard errors come from a delete-one-group jackknife; groups are replications
    (or contiguous batches of a single replication).
    """

    def __init__(self, vectors: np.ndarray, groups: Optional[np.ndarray] = None, *, batches: int = 20) -> None:
        samples = np.asarray(vectors)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ValueError("vectors must have shape (m, 2)")
        if samples.shape[0] < MIN_PGF_SAMPLES:
            raise InsufficientSamplesError(f"need at least {MIN_PGF_SAMPLES} polling instants")
        if groups is None or len(np.unique(groups)) < 2:
            groups = np.repeat(np.arange(batches), int(math.ceil(samples.shape[0] / batches)))[
                : samples.shape[0]
            ]
        labels = np.asarray(groups)
        if labels.shape[0] != samples.shape[0]:
            raise ValueError("groups must label every sample")
        self._n1 = samples[:, 0].astype(np.int64)
        self._n2 = samples[:, 1].astype(np.int64)
        _, self._group_index = np.unique(labels, return_inverse=True)
        self._group_count = int(self._group_index.max()) + 1
        if self._group_count < 2:
            raise InsufficientSamplesError("need at least 2 groups for jackknife errors")

    @classmethod
    def from_result(cls, result: SimResult) -> "EmpiricalPGF":
        vectors, labels = result.polling_vectors()
        return cls(vectors[:, :2], labels)

    @property
    def size(self) -> int:
        return int(self._n1.shape[0])

    def _kernel(self, terms: Sequence[tuple[Number, Number, Number]]) -> np.ndarray:
        """Per-sample values of sum_k w_k x_k^n1 y_k^n2 (real when every input is real)."""
        real = all(np.isreal(v) for term in terms for v in term)
        cast = (lambda v: float(np.real(v))) if real else complex
        total = np.zeros(self.size, dtype=float if real else complex)
        for weight, x, y in terms:
            total += cast(weight) * np.power(cast(x), self._n1) * np.power(cast(y), self._n2)
        return total

    def combination(self, terms: Sequence[tuple[Number, Number, Number]]) -> tuple[Number, float]:
        """Estimate of sum_k w_k F(x_k, y_k) with its jackknife standard error."""
        kernel = self._kernel(terms)
        sums = np.bincount(self._group_index, weights=kernel.real, minlength=self._group_count) + 1j * np.bincount(
            self._group_index, weights=kernel.imag, minlength=self._group_count
        )
        counts = np.bincount(self._group_index, minlength=self._group_count)
        total, n = sums.sum(), counts.sum()
        leave_out = (total - sums) / (n - counts)
        g = self._group_count
        spread = np.abs(leave_out - leave_out.mean()) ** 2
        se = math.sqrt((g - 1) / g * float(spread.sum()))
        value = total / n
        if not np.iscomplexobj(kernel):
            return float(np.real(value)), se
        return complex(value), se

    def __call__(self, z1: Number, z2: Number) -> Number:
        return self.combination([(1.0, z1, z2)])[0]

    def standard_error(self, z1: Number, z2: Number) -> float:
        return self.combination([(1.0, z1, z2)])[1]


@dataclass(frozen=True)
class Residual:
    value: float
    standard_error: float


def g1l_residual(
    pgf: Union[EmpiricalPGF, PGF],
    spec: TwoQueueSpec,
    z1: Number,
    z2: Number,
    *,
    h1: Optional[Callable[[Number, Number], Number]] = None,
) -> Residual:
    """
    |LHS - RHS| of the two-queue functional equation for a candidate F_1.

    h1 defaults to beta_1(z1, z2) (gated Q1). For an EmpiricalPGF the residual is a
    linear functional of the sample, so its jackknife standard error is reported too.
    """
    TransformPoint(z1, z2)
    if z2 == 0:
        raise TransformDomainError("the functional equation is singular at z2 = 0")
    if h1 is None:
        if not isinstance(spec.q1.discipline, Gated):
            raise NotBranchingError(
                f"default h1 = beta_1 needs gated Q1, got {describe_discipline(spec.q1.discipline)}"
            )
        service1 = spec.q1.service

        def h1(a: Number, b: Number) -> Number:
            return dist.lst(service1, spec.argument(a, b))

    b2, s1, s2 = spec.q2.service, spec.switchovers[0], spec.switchovers[1]
    s = spec.argument(z1, z2)
    s10 = spec.argument(z1, 0.0)
    beta, sig1, sig2 = dist.lst(b2, s), dist.lst(s1, s), dist.lst(s2, s)
    sig1_0 = dist.lst(s1, s10)
    inner = h1(z1, z2)
    inner0 = h1(z1, 0.0)
    front = beta * sig2 / z2
    # F(z1,z2) - front*sig1*F(inner,z2) + (front*sig1_0 - sig2*sig1_0)*F(inner0,0)
    terms = [
        (1.0, z1, z2),
        (-front * sig1, inner, z2),
        (front * sig1_0 - sig2 * sig1_0, inner0, 0.0),
    ]
    if isinstance(pgf, EmpiricalPGF):
        if pgf.size < MIN_PGF_SAMPLES:
            raise InsufficientSamplesError("too few polling instants for a residual")
        value, se = pgf.combination(terms)
        return Residual(value=float(abs(value)), standard_error=se)
    total = sum(w * pgf(x, y) for w, x, y in terms)
    return Residual(value=float(abs(total)), standard_error=math.nan)


@dataclass(frozen=True)
class PclReport:
    lhs: float
    rhs: float
    relative_gap: float


def pseudo_conservation(spec: SystemSpec, mean_waits: Sequence[float]) -> PclReport:
    """
    Pseudo-conservation law for exhaustive, gated and 1-limited queues with Poisson arrivals.

    sum_{E,G} rho_i E[W_i] + sum_{1-L} rho_i (1 - lambda_i E[S]/(1-rho)) E[W_i]
      = rho sum lambda_i E[B_i^2] / (2(1-rho)) + rho E[S^2] / (2 E[S])
        + E[S] / (2(1-rho)) (rho^2 - sum rho_i^2) + E[S]/(1-rho) sum_{G,1-L} rho_i^2
    """
    if len(mean_waits) != spec.n:
        raise ValueError("mean_waits must have one entry per queue")
    if not spec.is_poisson:
        raise ValueError("the pseudo-conservation law requires Poisson arrivals")
    rho = spec.rho
    es = spec.mean_total_switchover
    es2 = spec.total_switchover_second_moment
    lhs = 0.0
    rhs = rho * math.fsum(q.arrival_rate * q.service_second_moment for q in spec.queues) / (2.0 * (1.0 - rho))
    rhs += rho * es2 / (2.0 * es) if es > 0 else 0.0
    rhs += es / (2.0 * (1.0 - rho)) * (rho * rho - math.fsum(q.load**2 for q in spec.queues))
    for queue, wait in zip(spec.queues, mean_waits):
        discipline = queue.discipline
        if isinstance(discipline, KLimited):
            if discipline.k != 1:
                raise ValueError("no exact pseudo-conservation law for k-limited service with k > 1")
            coefficient = 1.0 - queue.arrival_rate * es / (1.0 - rho)
            if coefficient <= 0:
                raise StabilityError("1-limited queue is unstable: lambda_i E[S] >= 1 - rho")
            lhs += queue.load * coefficient * wait
            rhs += es / (1.0 - rho) * queue.load**2
        else:
            lhs += queue.load * wait
            if isinstance(discipline, Gated):
                rhs += es / (1.0 - rho) * queue.load**2
    gap = abs(lhs - rhs) / rhs if rhs != 0 else abs(lhs - rhs)
    return PclReport(lhs=lhs, rhs=rhs, relative_gap=gap)


def pcl_g1l(spec: TwoQueueSpec, mean_w1: float, mean_w2: float) -> PclReport:
    """Pseudo-conservation law of the G/1-L system (Q1 gated, Q2 1-limited)."""
    if not isinstance(spec.q1.discipline, Gated):
        raise ValueError("pcl_g1l requires gated service at Q1")
    return pseudo_conservation(spec.to_system(), (mean_w1, mean_w2))
