"""
Test Plan
- Partitions: run_next success, failure, no handler, empty queue; run_until_empty FIFO;
  built-in handlers (polling-moments, limit-law, simulate, e1l-summary)
- Boundaries: empty queue returns None; stop_on_failure leaves later cells queued
- Failure modes: handler exception -> FAILED with the original exception re-raised
"""

from datetime import datetime, timezone

import pytest

from pollinglab import distributions as dist
from pollinglab.job_queue import InMemoryCellQueue
from pollinglab.jobs import JobStatus
from pollinglab.model import Exhaustive, KLimited, QueueSpec, symmetric_system
from pollinglab.simulate import SimConfig
from pollinglab.twoqueue import TwoQueueSpec
from pollinglab.worker import Worker, default_handlers


def _fixed_now() -> datetime:
    return datetime(2026, 3, 1, 9, 0, 0, tzinfo=timezone.utc)


def _table_system():
    return symmetric_system(
        3,
        interarrival=dist.Exponential(1.0),
        service=dist.Exponential(4.0),
        switchover=dist.Deterministic(1.0),
    )


def test_run_next_success() -> None:
    """Validation: handler result stored, cell DONE at the given time."""
    queue = InMemoryCellQueue()
    job = queue.submit("custom", {"x": 1})
    worker = Worker(queue, handlers={"custom": lambda j: {"ok": j.params["x"]}})
    assert worker.run_next(now=_fixed_now()) is job
    assert job.status == JobStatus.DONE
    assert job.result == {"ok": 1}
    assert job.finished_at == _fixed_now()


def test_run_next_failure_keeps_exception() -> None:
    """Failure mode: handler raises -> FAILED with message and exception."""

    def boom(_job):
        raise ValueError("boom")

    queue = InMemoryCellQueue()
    job = queue.submit("custom")
    Worker(queue, handlers={"custom": boom}).run_next(now=_fixed_now())
    assert job.status == JobStatus.FAILED
    assert isinstance(job.exception, ValueError)
    assert "boom" in (job.error or "")


def test_run_next_without_handler_fails() -> None:
    """Failure mode: unknown cell type -> FAILED with a LookupError."""
    queue = InMemoryCellQueue()
    job = queue.submit("unknown")
    Worker(queue).run_next(now=_fixed_now())
    assert job.status == JobStatus.FAILED
    assert isinstance(job.exception, LookupError)
    assert "No handler registered for cell type: unknown" in (job.error or "")


def test_run_next_empty_queue_returns_none() -> None:
    """Boundary: nothing queued."""
    assert Worker(InMemoryCellQueue(), default_handlers()).run_next() is None


def test_run_until_empty_fifo() -> None:
    """Validation: every cell processed in submission order."""
    queue = InMemoryCellQueue()
    jobs = [queue.submit("custom", {"i": i}) for i in range(3)]
    done = Worker(queue, handlers={"custom": lambda j: {"i": j.params["i"]}}).run_until_empty(now=_fixed_now())
    assert done == jobs
    assert [j.result["i"] for j in done] == [0, 1, 2]


def test_stop_on_failure_reraises_and_leaves_rest_queued() -> None:
    """Failure mode: first failure re-raised; later cells untouched."""

    def handler(job):
        if job.params["fail"]:
            raise ArithmeticError("diverged")
        return {}

    queue = InMemoryCellQueue()
    queue.submit("custom", {"fail": True})
    later = queue.submit("custom", {"fail": False})
    with pytest.raises(ArithmeticError, match="diverged"):
        Worker(queue, handlers={"custom": handler}).run_until_empty(stop_on_failure=True)
    assert later.status == JobStatus.QUEUED
    assert len(queue) == 1


def test_default_handlers_analytic_cells() -> None:
    """Validation: polling-moments and limit-law handlers return their results."""
    queue = InMemoryCellQueue()
    moments = queue.submit("polling-moments", {"spec": _table_system(), "method": "direct"})
    law = queue.submit("limit-law", {"spec": _table_system()})
    Worker(queue, default_handlers()).run_until_empty(stop_on_failure=True)
    assert moments.result["moments"].mean[0] == pytest.approx(9.0)
    assert law.result["law"].scale == pytest.approx(3.0)


def test_default_simulate_handler() -> None:
    """Validation: simulate handler returns a SimResult for the given config."""
    queue = InMemoryCellQueue()
    cfg = SimConfig(master_seed=4, replications=2, cycles_per_replication=40, warmup_cycles=5)
    job = queue.submit("simulate", {"spec": _table_system(), "config": cfg})
    Worker(queue, default_handlers()).run_until_empty(stop_on_failure=True)
    assert job.result["sim"].config == cfg
    assert len(job.result["sim"].replications) == 2


def test_default_e1l_summary_handler() -> None:
    """Validation: summary carries C, its numerical twin, means and F(1, 1)."""
    spec = TwoQueueSpec(
        q1=QueueSpec(dist.Exponential(0.3), dist.Exponential(1.0), Exhaustive()),
        q2=QueueSpec(dist.Exponential(0.2), dist.Exponential(1.0), KLimited(1)),
        switchovers=(dist.Deterministic(1.0), dist.Deterministic(1.0)),
    )
    queue = InMemoryCellQueue()
    job = queue.submit("e1l-summary", {"spec": spec})
    Worker(queue, default_handlers()).run_until_empty(stop_on_failure=True)
    assert job.result["constant"] == pytest.approx(job.result["numerical_constant"], abs=1e-6)
    assert job.result["normalization"] == pytest.approx(1.0)
    assert job.result["mean_queue_lengths"][0] == pytest.approx(0.84, abs=1e-6)
