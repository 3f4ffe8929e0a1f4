"""
Test Plan
- Partitions: busy-period LST, TwoQueueSpec validation, visit PGF g, constant C (analytic,
  numerical), E/1-L evaluation and residual, EmpiricalPGF, G/1-L residual,
  pseudo-conservation (general and G/1-L)
- Boundaries: F(1, 1) = 1; z2 = 0 resolved by the limit form; real inputs stay real
- Failure modes: unstable busy period, Re(s) < 0, points outside the bidisk, z2 = 0 in
  the residual, default g with gated Q1, default h1 with exhaustive Q1, too few samples,
  k-limited with k > 1 in the conservation law
"""

import math

import numpy as np
import pytest

from pollinglab import distributions as dist
from pollinglab import simulate, twoqueue
from pollinglab.errors import (
    InsufficientSamplesError,
    NotBranchingError,
    StabilityError,
    TransformDomainError,
)
from pollinglab.model import Exhaustive, Gated, KLimited, QueueSpec, SystemSpec, symmetric_system
from pollinglab.simulate import SimConfig
from pollinglab.twoqueue import EmpiricalPGF, TwoQueueSpec

EXPECTED_C = 0.2 * math.exp(0.2)


def _spec(first=None) -> TwoQueueSpec:
    return TwoQueueSpec(
        q1=QueueSpec(dist.Exponential(0.3), dist.Exponential(1.0), first if first is not None else Exhaustive()),
        q2=QueueSpec(dist.Exponential(0.2), dist.Exponential(1.0), KLimited(1)),
        switchovers=(dist.Deterministic(1.0), dist.Deterministic(1.0)),
    )


def test_busy_period_lst_matches_mm1_closed_form() -> None:
    """Validation: M/M/1 busy period with lambda = 0.5, mu = 1."""
    s = 0.3
    total = 0.5 + 1.0 + s
    expected = (total - math.sqrt(total * total - 4 * 0.5 * 1.0)) / (2 * 0.5)
    assert twoqueue.busy_period_lst(s, dist.Exponential(1.0), 0.5) == pytest.approx(expected, rel=1e-10)
    assert twoqueue.busy_period_lst(0.0, dist.Exponential(1.0), 0.5) == pytest.approx(1.0)


def test_busy_period_derivative_gives_mean() -> None:
    """Validation: -pi'(0) = E[B] / (1 - rho)."""
    slope = twoqueue.busy_period_lst_derivative(0.0, dist.Exponential(1.0), 0.5)
    assert -slope == pytest.approx(2.0, rel=1e-10)


def test_busy_period_errors() -> None:
    """Failure mode: rho_1 >= 1 and Re(s) < 0."""
    with pytest.raises(StabilityError, match="defective"):
        twoqueue.busy_period_lst(0.0, dist.Exponential(1.0), 1.0)
    with pytest.raises(TransformDomainError, match="Re"):
        twoqueue.busy_period_lst(-1.0, dist.Exponential(1.0), 0.5)


def test_two_queue_spec_validation() -> None:
    """Failure mode: Q2 must be 1-limited and stable; round trip with SystemSpec."""
    spec = _spec()
    assert spec.rho == pytest.approx(0.5)
    assert spec.mean_total_switchover == pytest.approx(2.0)
    assert TwoQueueSpec.from_system(spec.to_system()) == spec
    with pytest.raises(ValueError, match="1-limited"):
        TwoQueueSpec(
            q1=spec.q1,
            q2=QueueSpec(dist.Exponential(0.2), dist.Exponential(1.0), Exhaustive()),
            switchovers=spec.switchovers,
        )
    with pytest.raises(StabilityError, match="1-limited"):
        TwoQueueSpec(q1=spec.q1, q2=spec.q2, switchovers=(dist.Deterministic(2.0), dist.Deterministic(2.0)))
    with pytest.raises(ValueError, match="2 queues"):
        TwoQueueSpec.from_system(
            symmetric_system(
                3,
                interarrival=dist.Exponential(0.1),
                service=dist.Exponential(1.0),
                switchover=dist.Deterministic(1.0),
            )
        )


def test_visit_pgf_mean() -> None:
    """Validation: g'(1) = lambda_2 E[B_1] / (1 - rho_1)."""
    g = twoqueue.busy_period_visit_pgf(_spec())
    assert g.value(1.0) == pytest.approx(1.0)
    assert g.mean == pytest.approx(0.2 / 0.7, rel=1e-10)
    with pytest.raises(ValueError, match="rate"):
        twoqueue.busy_period_visit_pgf(_spec(), rate=-1.0)


@pytest.mark.parametrize("method", ["analytic", "numerical"])
def test_constant_c(method: str) -> None:
    """Validation: C equals P(Q2 empty at its polling) / sigma_1(lambda_2) = 0.2 e^0.2."""
    assert twoqueue.e1l_constant_C(_spec(), method=method) == pytest.approx(EXPECTED_C, abs=1e-7)


def test_constant_methods_agree() -> None:
    """Validation: analytic and extrapolated constants agree to 1e-6."""
    analytic = twoqueue.check_constant_agreement(_spec())
    assert analytic == pytest.approx(EXPECTED_C, rel=1e-10)
    with pytest.raises(ValueError, match="method"):
        twoqueue.e1l_constant_C(_spec(), method="guess")


def test_default_g_needs_exhaustive_q1() -> None:
    """Failure mode: the busy-period g only describes an exhaustive Q1."""
    with pytest.raises(ValueError, match="exhaustive"):
        twoqueue.e1l_constant_C(_spec(Gated()))


def test_e1l_eval_normalisation_and_boundary() -> None:
    """Boundary: F(1, 1) = 1 and F(g(0), 0) = C through the z2 = 0 limit form."""
    spec = _spec()
    assert twoqueue.e1l_eval(spec, 1.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    g0 = twoqueue.busy_period_visit_pgf(spec).value(0.0)
    assert twoqueue.e1l_eval(spec, g0, 0.0) == pytest.approx(EXPECTED_C, abs=1e-9)
    assert twoqueue.e1l_psi(spec, 0.0) == pytest.approx(EXPECTED_C, abs=1e-9)
    assert twoqueue.e1l_psi(spec, 1.0) == 1.0


def test_e1l_eval_is_continuous_at_zero() -> None:
    """Boundary: the limit form at z2 = 0 matches nearby points."""
    spec = _spec()
    at_zero = twoqueue.e1l_eval(spec, 0.5, 0.0)
    near = twoqueue.e1l_eval(spec, 0.5, 1e-6)
    assert at_zero == pytest.approx(near, abs=1e-5)


@pytest.mark.parametrize("gap", [1e-13, 1e-10, 1e-7, 5e-5])
def test_e1l_psi_is_accurate_just_below_one(gap: float) -> None:
    """Boundary: psi(1 - gap) stays within the slope bound of psi(1) = 1 where N/D is 0/0."""
    spec = _spec()
    c = twoqueue.e1l_constant_C(spec)
    mean1, mean2 = twoqueue.e1l_mean_queue_lengths(spec)
    slope = mean1 * twoqueue.busy_period_visit_pgf(spec).mean + mean2
    value = twoqueue.e1l_psi(spec, 1.0 - gap, constant=c)
    assert value == pytest.approx(1.0 - slope * gap, abs=1e-6 * gap + 10 * gap * gap + 1e-12)


def test_e1l_psi_is_continuous_across_the_near_one_radius() -> None:
    """Boundary: the interpolated and the direct ratio agree where they meet."""
    spec = _spec()
    c = twoqueue.e1l_constant_C(spec)
    inside = twoqueue.e1l_psi(spec, 1.0 - (1e-4 - 1e-12), constant=c)
    outside = twoqueue.e1l_psi(spec, 1.0 - (1e-4 + 1e-12), constant=c)
    assert inside == pytest.approx(outside, abs=1e-10)


def test_e1l_eval_is_a_pgf_on_the_real_square() -> None:
    """Validation: values in [0, 1], nondecreasing in each argument."""
    spec = _spec()
    c = twoqueue.e1l_constant_C(spec)
    grid = np.linspace(0.0, 1.0, 6)
    values = np.array([[float(np.real(twoqueue.e1l_eval(spec, a, b, constant=c))) for b in grid] for a in grid])
    assert values.min() >= -1e-12
    assert values.max() <= 1.0 + 1e-12
    assert np.all(np.diff(values, axis=0) >= -1e-12)
    assert np.all(np.diff(values, axis=1) >= -1e-12)


def test_e1l_residual_vanishes_on_grid() -> None:
    """Validation: the exact PGF satisfies the functional equation."""
    spec = _spec()
    for z1 in (0.0, 0.3, 0.7, 1.0):
        for z2 in np.linspace(0.05, 1.0, 20):
            assert twoqueue.e1l_residual(spec, z1, float(z2)) <= 1e-10


def test_e1l_accepts_complex_points() -> None:
    """Validation: complex arguments inside the bidisk; the residual stays tiny."""
    spec = _spec()
    value = twoqueue.e1l_eval(spec, 0.5j, 0.6)
    assert abs(value) <= 1.0 + 1e-12
    assert twoqueue.e1l_residual(spec, 0.5j, 0.6 + 0.2j) <= 1e-10


def test_e1l_domain_errors() -> None:
    """Failure mode: points outside the bidisk; residual at z2 = 0."""
    spec = _spec()
    with pytest.raises(TransformDomainError, match="bidisk"):
        twoqueue.e1l_eval(spec, 1.5, 0.5)
    with pytest.raises(TransformDomainError, match="z2 = 0"):
        twoqueue.e1l_residual(spec, 0.5, 0.0)


def test_e1l_mean_queue_lengths() -> None:
    """Validation: E[X_1] = lambda_1 (E[S] + E[B_2] P(Q2 nonempty)) = 0.3 * 2.8."""
    mean1, mean2 = twoqueue.e1l_mean_queue_lengths(_spec())
    assert mean1 == pytest.approx(0.84, abs=1e-6)
    assert mean2 > 0


def test_empirical_pgf_of_known_sample() -> None:
    """Validation: sample means of z1^n1 z2^n2; zero vectors give 1 with zero error."""
    n1 = np.tile([0, 1, 2], 20)
    vectors = np.column_stack([n1, np.zeros_like(n1)])
    pgf = EmpiricalPGF(vectors)
    assert pgf.size == 60
    assert pgf(0.5, 0.3) == pytest.approx((1 + 0.5 + 0.25) / 3)
    assert isinstance(pgf(0.5, 0.3), float)
    assert isinstance(pgf(0.5j, 0.3), complex)
    zeros = EmpiricalPGF(np.zeros((40, 2), dtype=int))
    assert zeros(0.0, 0.0) == pytest.approx(1.0)
    assert zeros.standard_error(0.0, 0.0) == pytest.approx(0.0)


def test_empirical_pgf_errors() -> None:
    """Failure mode: wrong shape, too few samples, unlabelled groups."""
    with pytest.raises(ValueError, match="shape"):
        EmpiricalPGF(np.zeros((20, 3)))
    with pytest.raises(InsufficientSamplesError):
        EmpiricalPGF(np.zeros((5, 2)))
    with pytest.raises(ValueError, match="label"):
        EmpiricalPGF(np.zeros((20, 2)), np.array([0, 1] * 5))


def test_g1l_residual_defaults_and_errors() -> None:
    """Boundary: residual of any sample is 0 at (1, 1); default h1 needs gated Q1."""
    gated = _spec(Gated())
    pgf = EmpiricalPGF(np.column_stack([np.arange(30) % 4, np.arange(30) % 3]))
    at_one = twoqueue.g1l_residual(pgf, gated, 1.0, 1.0)
    assert at_one.value == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(NotBranchingError, match="gated"):
        twoqueue.g1l_residual(pgf, _spec(), 0.5, 0.5)
    with pytest.raises(TransformDomainError):
        twoqueue.g1l_residual(pgf, gated, 0.5, 0.0)
    callable_residual = twoqueue.g1l_residual(lambda a, b: 1.0, gated, 0.5, 0.5)
    assert math.isnan(callable_residual.standard_error)


def test_pcl_g1l_right_hand_side() -> None:
    """Validation: rhs = 0.5 + 0.5 + 0.24 + 0.52 = 1.76; lhs weights the 1-limited wait."""
    report = twoqueue.pcl_g1l(_spec(Gated()), 1.0, 1.0)
    assert report.rhs == pytest.approx(1.76)
    assert report.lhs == pytest.approx(0.3 + 0.2 * 0.2)
    with pytest.raises(ValueError, match="gated"):
        twoqueue.pcl_g1l(_spec(), 1.0, 1.0)


def test_pseudo_conservation_errors() -> None:
    """Failure mode: k > 1, renewal arrivals, wrong number of waits."""
    two_limited = SystemSpec(
        queues=(
            QueueSpec(dist.Exponential(0.3), dist.Exponential(1.0), Exhaustive()),
            QueueSpec(dist.Exponential(0.2), dist.Exponential(1.0), KLimited(2)),
        ),
        switchovers=(dist.Deterministic(1.0), dist.Deterministic(1.0)),
    )
    with pytest.raises(ValueError, match="k-limited"):
        twoqueue.pseudo_conservation(two_limited, (1.0, 1.0))
    with pytest.raises(ValueError, match="one entry per queue"):
        twoqueue.pseudo_conservation(two_limited, (1.0,))
    renewal = symmetric_system(
        2,
        interarrival=dist.Erlang(2, 0.5),
        service=dist.Exponential(1.0),
        switchover=dist.Deterministic(1.0),
    )
    with pytest.raises(ValueError, match="Poisson"):
        twoqueue.pseudo_conservation(renewal, (1.0, 1.0))


@pytest.mark.slow
def test_simulated_e1l_means_match_transform() -> None:
    """Validation: simulated polling-instant means agree with the transform derivatives."""
    spec = _spec()
    result = simulate.run(spec.to_system(), SimConfig(master_seed=31, replications=10, cycles_per_replication=5_000, warmup_cycles=200))
    vectors, _ = result.polling_vectors()
    mean1, mean2 = twoqueue.e1l_mean_queue_lengths(spec)
    assert vectors[:, 0].mean() == pytest.approx(mean1, abs=0.03)
    assert vectors[:, 1].mean() == pytest.approx(mean2, rel=0.05, abs=0.03)


@pytest.mark.slow
def test_simulated_g1l_satisfies_equation() -> None:
    """Validation: the empirical G/1-L PGF solves the functional equation within its error."""
    spec = _spec(Gated())
    result = simulate.run(spec.to_system(), SimConfig(master_seed=37, replications=10, cycles_per_replication=5_000, warmup_cycles=200))
    pgf = EmpiricalPGF.from_result(result)
    residual = twoqueue.g1l_residual(pgf, spec, 0.5, 0.5)
    assert residual.value <= 5 * residual.standard_error + 0.01


@pytest.mark.slow
def test_simulated_g1l_waits_balance_conservation_law() -> None:
    """Validation: simulated G/1-L mean waits meet the pseudo-conservation law to 1%."""
    spec = _spec(Gated())
    config = SimConfig(master_seed=41, replications=20, cycles_per_replication=50_000, warmup_cycles=1_000)
    result = simulate.run(spec.to_system(), config)
    report = twoqueue.pcl_g1l(spec, result.waits[0].mean, result.waits[1].mean)
    assert report.rhs == pytest.approx(1.76, rel=1e-12)
    assert report.relative_gap <= 0.01
