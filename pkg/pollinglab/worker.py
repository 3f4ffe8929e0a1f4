"""
Cell worker: run queued cells via registered handlers.

Single-threaded loop; parallelism lives inside the simulate handler (replication
pool). Handler exceptions become FAILED cells that keep the original exception.
"""

from __future__ import annotations

import logging
from datetime import datetime, timezone
from typing import Callable, Optional

from pollinglab import branching, simulate, twoqueue
from pollinglab.job_queue import InMemoryCellQueue
from pollinglab.jobs import CellJob, JobStatus

logger = logging.getLogger(__name__)

# Handler for a cell type: receives the cell, returns its result dict.
CellHandler = Callable[[CellJob], dict]


def _simulate_handler(job: CellJob) -> dict:
    """Expects params: spec (SystemSpec), config (SimConfig)."""
    return {"sim": simulate.run(job.params["spec"], job.params["config"])}


def _polling_moments_handler(job: CellJob) -> dict:
    """Expects params: spec; optional method ("iterate" | "direct")."""
    method = job.params.get("method", "iterate")
    return {"moments": branching.polling_moments(job.params["spec"], method=method)}


def _limit_law_handler(job: CellJob) -> dict:
    """Expects params: spec; optional queue (default 0)."""
    return {"law": branching.limit_law(job.params["spec"], int(job.params.get("queue", 0)))}


def _e1l_summary_handler(job: CellJob) -> dict:
    """Expects params: spec (TwoQueueSpec with exhaustive Q1)."""
    spec = job.params["spec"]
    analytic = twoqueue.check_constant_agreement(spec)
    return {
        "constant": analytic,
        "numerical_constant": twoqueue.e1l_constant_C(spec, method="numerical"),
        "mean_queue_lengths": twoqueue.e1l_mean_queue_lengths(spec),
        "normalization": complex(twoqueue.e1l_eval(spec, 1.0, 1.0)).real,
    }


def default_handlers() -> dict[str, CellHandler]:
    """Built-in handlers. Register with Worker(queue, default_handlers())."""
    return {
        "simulate": _simulate_handler,
        "polling-moments": _polling_moments_handler,
        "limit-law": _limit_law_handler,
        "e1l-summary": _e1l_summary_handler,
    }


class Worker:
    """
    Runs queued cells using a handler per cell type.

    run_next processes one cell; run_until_empty processes all, optionally
    re-raising the first failure.
    """

    def __init__(self, queue: InMemoryCellQueue, handlers: Optional[dict[str, CellHandler]] = None) -> None:
        self.queue = queue
        self.handlers = handlers if handlers is not None else {}

    def run_next(self, *, now: Optional[datetime] = None) -> Optional[CellJob]:
        """Dequeue one cell, run its handler, update status/result/exception; None if empty."""
        job = self.queue.dequeue()
        if job is None:
            return None
        job.start(now or datetime.now(timezone.utc))
        handler = self.handlers.get(job.type)
        if handler is None:
            job.fail(LookupError(f"No handler registered for cell type: {job.type}"), now or datetime.now(timezone.utc))
            return job
        try:
            result = handler(job)
            job.succeed(result, now or datetime.now(timezone.utc))
        except Exception as exc:
            job.fail(exc, now or datetime.now(timezone.utc))
            logger.warning(
                "Cell failed",
                extra={"cell": job.index, "cell_type": job.type, "error": job.error},
            )
        else:
            logger.debug(
                "Cell done",
                extra={"cell": job.index, "cell_type": job.type, "elapsed_seconds": job.elapsed_seconds},
            )
        return job

    def run_until_empty(self, *, now: Optional[datetime] = None, stop_on_failure: bool = False) -> list[CellJob]:
        """
        Repeatedly run_next until the queue is empty.

        With stop_on_failure the first FAILED cell's original exception is raised
        and the remaining cells stay queued.
        """
        done: list[CellJob] = []
        while True:
            job = self.run_next(now=now)
            if job is None:
                break
            done.append(job)
            if stop_on_failure and job.status == JobStatus.FAILED and job.exception is not None:
                raise job.exception
        return done
