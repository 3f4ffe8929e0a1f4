"""
Cell job model and states for experiment dispatch.

One table cell (or sweep point) is one CellJob: status lifecycle
(QUEUED -> RUNNING -> DONE/FAILED), its params and either a result or the
exception that failed it. No queue or worker logic in this module.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional


class JobStatus(Enum):
    """Cell job lifecycle states."""

    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass
class CellJob:
    """
    A single experiment cell.

    type: handler key (e.g. "simulate", "polling-moments").
    index: position of the cell in the experiment's row order.
    params: handler inputs (specs, SimConfig, sweep coordinates).
    result: handler output on success.
    exception: the original exception on failure; error holds its message.
    """

    type: str
    index: int = 0
    id: str = field(default_factory=lambda: str(uuid.uuid4()))
    status: JobStatus = JobStatus.QUEUED
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    started_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None
    error: Optional[str] = None
    exception: Optional[BaseException] = field(default=None, repr=False)
    result: Optional[dict[str, Any]] = None
    params: dict[str, Any] = field(default_factory=dict)

    def start(self, now: datetime) -> None:
        self.status = JobStatus.RUNNING
        self.started_at = now

    def succeed(self, result: dict[str, Any], now: datetime) -> None:
        """Mark done, store result, clear any error."""
        self.status = JobStatus.DONE
        self.finished_at = now
        self.result = result
        self.error = None
        self.exception = None

    def fail(self, exc: BaseException, now: datetime) -> None:
        """Mark failed and keep the exception; result stays None."""
        self.status = JobStatus.FAILED
        self.finished_at = now
        self.error = str(exc) or type(exc).__name__
        self.exception = exc

    @property
    def elapsed_seconds(self) -> Optional[float]:
        if self.started_at is None or self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()
