"""
In-memory cell queue: create, enqueue, dequeue, lookup.

FIFO order, no duplicates on enqueue. Cells are created in row order, so FIFO
processing yields rows in a deterministic order.
"""

from __future__ import annotations

from collections import deque
from typing import Any, Optional

from pollinglab.jobs import CellJob, JobStatus


class InMemoryCellQueue:
    """Cells stored by id; queue order kept separately."""

    def __init__(self) -> None:
        self._jobs: dict[str, CellJob] = {}
        self._queue: deque[str] = deque()
        self._queued_ids: set[str] = set()
        self._next_index = 0

    def create_job(self, job_type: str, params: Optional[dict[str, Any]] = None) -> CellJob:
        """Create a QUEUED cell with the next row index and store it (not enqueued)."""
        job = CellJob(type=job_type, index=self._next_index, params=params if params is not None else {})
        self._next_index += 1
        self._jobs[job.id] = job
        return job

    def submit(self, job_type: str, params: Optional[dict[str, Any]] = None) -> CellJob:
        """create_job followed by enqueue."""
        job = self.create_job(job_type, params)
        self.enqueue(job)
        return job

    def enqueue(self, job: CellJob) -> None:
        self._jobs[job.id] = job
        if job.id in self._queued_ids:
            return
        self._queued_ids.add(job.id)
        self._queue.append(job.id)

    def dequeue(self) -> Optional[CellJob]:
        """Pop the next cell FIFO; status is left to the worker."""
        if not self._queue:
            return None
        job_id = self._queue.popleft()
        self._queued_ids.discard(job_id)
        return self._jobs.get(job_id)

    def get(self, job_id: str) -> Optional[CellJob]:
        return self._jobs.get(job_id)

    def __len__(self) -> int:
        return len(self._queue)

    def list_jobs(self, status: Optional[JobStatus] = None) -> list[CellJob]:
        """All cells in row order, optionally filtered by status."""
        jobs = sorted(self._jobs.values(), key=lambda j: j.index)
        if status is not None:
            jobs = [j for j in jobs if j.status == status]
        return jobs
