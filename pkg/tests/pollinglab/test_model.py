"""
Test Plan
- Partitions: disciplines, SystemSpec derived loads, imbalance rates, switch-over scaling
- Boundaries: lambda = 0 queue (no interarrival law); single queue imbalance of 1
- Failure modes: rho >= 1, k-limited overload, invalid k, imbalance < 1, mismatched lengths
"""

import pytest

from pollinglab import distributions as dist
from pollinglab.errors import StabilityError
from pollinglab.model import (
    Exhaustive,
    Gated,
    ImbalanceParams,
    KLimited,
    QueueSpec,
    SystemSpec,
    derived_loads,
    describe_system,
    is_branching,
    rates_from_imbalance,
    symmetric_system,
    system_from_imbalance,
)


def _table_system(switchover: float = 1.0) -> SystemSpec:
    return symmetric_system(
        3,
        interarrival=dist.Exponential(1.0),
        service=dist.Exponential(4.0),
        switchover=dist.Deterministic(switchover),
    )


def test_derived_loads_of_symmetric_system() -> None:
    """Validation: rho = 0.75, E[S] = 3, E[C] = 12."""
    loads = derived_loads(_table_system())
    assert loads.loads == pytest.approx((0.25, 0.25, 0.25))
    assert loads.rho == pytest.approx(0.75)
    assert loads.mean_total_switchover == pytest.approx(3.0)
    assert loads.mean_cycle == pytest.approx(12.0)


def test_total_switchover_second_moment_adds_variances() -> None:
    """Validation: E[S^2] = Var[S] + E[S]^2 for independent switch-overs."""
    spec = symmetric_system(
        2,
        interarrival=dist.Exponential(0.25),
        service=dist.Exponential(1.0),
        switchover=dist.Exponential(1.0),
    )
    assert spec.total_switchover_second_moment == pytest.approx(2.0 + 4.0)


def test_unstable_system_raises() -> None:
    """Failure mode: rho >= 1 is rejected at construction."""
    with pytest.raises(StabilityError, match="unstable"):
        symmetric_system(
            2,
            interarrival=dist.Exponential(1.0),
            service=dist.Exponential(2.0),
            switchover=dist.Deterministic(1.0),
        )


def test_k_limited_overload_raises() -> None:
    """Failure mode: lambda_i * E[C] >= k is unstable under k-limited service."""
    queues = (
        QueueSpec(dist.Exponential(0.3), dist.Exponential(1.0), Exhaustive()),
        QueueSpec(dist.Exponential(0.2), dist.Exponential(1.0), KLimited(1)),
    )
    with pytest.raises(StabilityError, match="1-limited"):
        SystemSpec(queues=queues, switchovers=(dist.Deterministic(2.0), dist.Deterministic(2.0)))
    # Same loads with shorter switch-overs: 0.2 * 1 / 0.5 < 1.
    SystemSpec(queues=queues, switchovers=(dist.Deterministic(0.5), dist.Deterministic(0.5)))


def test_invalid_inputs_raise() -> None:
    """Failure mode: k < 1, empty system, mismatched switch-over count."""
    with pytest.raises(ValueError, match="k must be"):
        KLimited(0)
    with pytest.raises(ValueError, match="at least one queue"):
        SystemSpec(queues=(), switchovers=())
    queue = QueueSpec(dist.Exponential(1.0), dist.Exponential(4.0))
    with pytest.raises(ValueError, match="one entry per queue"):
        SystemSpec(queues=(queue, queue), switchovers=(dist.Deterministic(1.0),))


def test_queue_without_arrivals_has_zero_rate() -> None:
    """Boundary: interarrival None means lambda = 0 and counts as Poisson."""
    queue = QueueSpec(None, dist.Exponential(1.0), Gated())
    assert queue.arrival_rate == 0.0
    assert queue.load == 0.0
    assert queue.is_poisson


def test_is_branching() -> None:
    """Validation: exhaustive and gated are branching-type, k-limited is not."""
    assert is_branching(Exhaustive())
    assert is_branching(Gated())
    assert not is_branching(KLimited(2))


def test_rates_from_imbalance_arrival_ratio() -> None:
    """Validation: I_A = 3 gives rates 1.5, 1, 0.5 and equal mean service times."""
    rates, means = rates_from_imbalance(ImbalanceParams(n=3, rho=0.75, imbalance_arrival=3.0))
    assert rates == pytest.approx((1.5, 1.0, 0.5))
    assert means == pytest.approx((0.25, 0.25, 0.25))


def test_rates_from_imbalance_service_ratio() -> None:
    """Validation: I_B = 3 gives mean service times in ratio 1:2:3 with total load rho."""
    rates, means = rates_from_imbalance(ImbalanceParams(n=3, rho=0.75, imbalance_service=3.0))
    assert rates == pytest.approx((1.0, 1.0, 1.0))
    assert means == pytest.approx((0.125, 0.25, 0.375))
    assert sum(r * m for r, m in zip(rates, means)) == pytest.approx(0.75)


def test_imbalance_params_validation() -> None:
    """Failure mode: imbalance below 1 and a single queue with imbalance."""
    with pytest.raises(ValueError, match="imbalance_arrival"):
        ImbalanceParams(n=3, rho=0.5, imbalance_arrival=0.5)
    with pytest.raises(ValueError, match="rho"):
        ImbalanceParams(n=3, rho=1.0)
    with pytest.raises(ValueError, match="single queue"):
        rates_from_imbalance(ImbalanceParams(n=1, rho=0.5, imbalance_arrival=2.0))


def test_system_from_imbalance_fits_arrival_scv() -> None:
    """Validation: arrival laws carry the requested scv and mean 1/lambda_i."""
    spec = system_from_imbalance(
        ImbalanceParams(n=3, rho=0.75, imbalance_arrival=3.0, scv_arrival=2.0),
        switchover=dist.Deterministic(1.0),
    )
    assert spec.arrival_rates == pytest.approx((1.5, 1.0, 0.5))
    for queue in spec.queues:
        assert dist.moments(queue.interarrival).scv == pytest.approx(2.0)
    assert spec.rho == pytest.approx(0.75)
    assert not spec.is_poisson


def test_with_switchover_scale_keeps_zero_switchovers() -> None:
    """Boundary: zero switch-overs stay zero; others scale."""
    spec = SystemSpec(
        queues=_table_system().queues,
        switchovers=(dist.Deterministic(1.0), dist.Deterministic(0.0), dist.Exponential(1.0)),
    )
    scaled = spec.with_switchover_scale(10.0)
    assert scaled.switchovers[1] == dist.Deterministic(0.0)
    assert scaled.mean_total_switchover == pytest.approx(20.0)
    with pytest.raises(ValueError, match="factor"):
        spec.with_switchover_scale(-1.0)


def test_describe_system() -> None:
    """Validation: stable text form lists each queue."""
    text = describe_system(_table_system())
    assert text.startswith("cyclic:")
    assert text.count("Q") == 3
    assert "exhaustive" in text
