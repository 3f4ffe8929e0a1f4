"""
Discrete-event simulation of an N-queue polling system.

One simpy process plays the server: it alternates visits and switch-overs and applies
the queue's discipline during each visit. Arrival streams are renewal processes whose
epochs are generated lazily and admitted into the FIFO queues whenever the server
looks at them; an arrival at the same epoch as a server event is processed after it.

Replications are independent, each with its own substream spawned from the master
seed, so results do not depend on how replications are spread over workers.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
import simpy

from pollinglab import distributions as dist
from pollinglab.config import (
    DEFAULT_CYCLES_PER_REPLICATION,
    DEFAULT_MASTER_SEED,
    DEFAULT_REPLICATIONS,
    DEFAULT_WARMUP_CYCLES,
)
from pollinglab.distributions import VariateStream
from pollinglab.errors import InsufficientSamplesError
from pollinglab.model import Gated, KLimited, SystemSpec, VisitOrder, describe_system
from pollinglab.stats import (
    DEFAULT_BATCHES,
    MeanEstimate,
    SampleSummary,
    ScvEstimate,
    estimate_mean,
    estimate_scv,
    pool,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """Run lengths, seeding and what to keep from a simulation."""

    master_seed: int = DEFAULT_MASTER_SEED
    replications: int = DEFAULT_REPLICATIONS
    cycles_per_replication: int = DEFAULT_CYCLES_PER_REPLICATION
    warmup_cycles: int = DEFAULT_WARMUP_CYCLES
    record_queue: int = 0
    keep_wait_samples: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.warmup_cycles < 0:
            raise ValueError("warmup_cycles must be >= 0")
        if self.cycles_per_replication <= self.warmup_cycles:
            raise ValueError("cycles_per_replication must be greater than warmup_cycles")
        if self.record_queue < 0:
            raise ValueError("record_queue must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class VisitRecord:
    """What happened during one visit; handed to an optional observer."""

    queue: int
    start: float
    end: float
    present_at_start: int
    served: int
    remaining_at_end: int


VisitObserver = Callable[[VisitRecord], None]


@dataclass(frozen=True)
class ReplicationResult:
    """
    Post-warmup output of one replication.

    wait_batches[i] holds contiguous batch summaries of the waits at queue i (pooled
    they give the replication summary); polling_vectors holds the joint queue-length
    vector at every polling instant of the recorded queue.
    """

    index: int
    wait_batches: tuple[tuple[SampleSummary, ...], ...]
    polling_batches: tuple[SampleSummary, ...]
    cycle_batches: tuple[SampleSummary, ...]
    polling_vectors: np.ndarray
    served: tuple[int, ...]
    cycles: int
    wait_samples: Optional[np.ndarray] = None

    @property
    def waits(self) -> tuple[SampleSummary, ...]:
        return tuple(pool(batches) for batches in self.wait_batches)

    @property
    def polling(self) -> SampleSummary:
        return pool(self.polling_batches)

    @property
    def cycle_time(self) -> SampleSummary:
        return pool(self.cycle_batches)


@dataclass(frozen=True)
class QueueWaitStats:
    queue: int
    count: int
    mean: float
    mean_half_width: float
    scv: float
    scv_half_width: float


@dataclass(frozen=True)
class SimResult:
    """
    Aggregated estimates over replications.

    The scaled polling statistics divide the queue length by E[S]; the scaled SCV is the
    raw SCV itself.
    """

    spec: SystemSpec
    config: SimConfig
    waits: tuple[QueueWaitStats, ...]
    polling_mean: MeanEstimate
    polling_scv: ScvEstimate
    cycle_time: MeanEstimate
    mean_total_switchover: float
    replications: tuple[ReplicationResult, ...] = field(repr=False)

    @property
    def scaled_polling_mean(self) -> Optional[MeanEstimate]:
        s = self.mean_total_switchover
        if s <= 0:
            return None
        return MeanEstimate(
            mean=self.polling_mean.mean / s,
            half_width=self.polling_mean.half_width / s,
            count=self.polling_mean.count,
        )

    @property
    def scaled_polling_scv(self) -> ScvEstimate:
        return self.polling_scv

    def polling_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """All polling-instant vectors and the replication index of each row."""
        blocks = [r.polling_vectors for r in self.replications]
        labels = [np.full(len(r.polling_vectors), r.index) for r in self.replications]
        return np.concatenate(blocks, axis=0), np.concatenate(labels)

    def wait_samples(self) -> np.ndarray:
        """Raw waits of the recorded queue (requires keep_wait_samples)."""
        if any(r.wait_samples is None for r in self.replications):
            raise ValueError("wait samples were not kept; set keep_wait_samples=True")
        return np.concatenate([r.wait_samples for r in self.replications])  # type: ignore[misc]


class _ArrivalProcess:
    """Lazy renewal stream: epochs are admitted into a queue once the server passes them."""

    def __init__(self, spec: dist.DistributionSpec | None, rng: np.random.Generator) -> None:
        if spec is None:
            self._gaps: Optional[Iterator[float]] = None
            self.next_epoch = math.inf
        else:
            self._gaps = VariateStream(spec, rng)
            self.next_epoch = next(self._gaps)

    def admit_before(self, epoch: float, queue: deque[float]) -> None:
        gaps = self._gaps
        if gaps is None:
            return
        next_epoch = self.next_epoch
        while next_epoch < epoch:
            queue.append(next_epoch)
            next_epoch += next(gaps)
        self.next_epoch = next_epoch


class PollingSimulation:
    """
    Single replication of the polling system.

    Warmup and run length are counted in completed cycles, i.e. visits divided by N
    (for cyclic order this is the number of returns to Q_1).
    """

    def __init__(
        self,
        spec: SystemSpec,
        cfg: SimConfig,
        seed: np.random.SeedSequence,
        *,
        observer: VisitObserver | None = None,
    ) -> None:
        if cfg.record_queue >= spec.n:
            raise ValueError(f"record_queue must be < {spec.n}")
        zero_switch = all(
            isinstance(s, dist.Deterministic) and s.value == 0 for s in spec.switchovers
        )
        if zero_switch and all(q.interarrival is None for q in spec.queues):
            raise ValueError("a system without arrivals and without switch-over time never advances")
        self.spec = spec
        self.cfg = cfg
        self.observer = observer
        self._zero_switchover = zero_switch

        n = spec.n
        children = seed.spawn(3 * n)
        rngs = [np.random.default_rng(child) for child in children]
        self._arrivals = [_ArrivalProcess(q.interarrival, rngs[i]) for i, q in enumerate(spec.queues)]
        self._services = [VariateStream(q.service, rngs[n + i]) for i, q in enumerate(spec.queues)]
        self._switches = [VariateStream(s, rngs[2 * n + i]) for i, s in enumerate(spec.switchovers)]
        self._queues: list[deque[float]] = [deque() for _ in range(n)]

        self.env = simpy.Environment()
        self.visits = 0
        self._waits: list[list[float]] = [[] for _ in range(n)]
        self._polling: list[tuple[int, ...]] = []
        self._cycle_times: list[float] = []
        self._served = [0] * n
        self._last_poll: Optional[float] = None

    @property
    def cycles(self) -> int:
        return self.visits // self.spec.n

    @property
    def measuring(self) -> bool:
        return self.cycles >= self.cfg.warmup_cycles

    def _admit(self, index: int, epoch: float) -> None:
        self._arrivals[index].admit_before(epoch, self._queues[index])

    def _admit_all(self, epoch: float) -> None:
        for index in range(self.spec.n):
            self._admit(index, epoch)

    def _visit_limit(self, index: int, present: int) -> Optional[int]:
        discipline = self.spec.queues[index].discipline
        if isinstance(discipline, Gated):
            return present
        if isinstance(discipline, KLimited):
            return discipline.k
        return None

    def _record_polling_instant(self, now: float) -> None:
        self._polling.append(tuple(len(q) for q in self._queues))
        if self._last_poll is not None:
            self._cycle_times.append(now - self._last_poll)
        self._last_poll = now

    def _next_queue(self, index: int) -> int:
        n = self.spec.n
        if self.spec.visit_order is VisitOrder.CYCLIC:
            return (index + 1) % n
        lengths = [len(q) for q in self._queues]
        # Ties go to the lowest index; the current queue is eligible.
        return max(range(n), key=lambda j: (lengths[j], -j))

    def _server(self) -> Iterator[simpy.events.Event]:
        env = self.env
        record = self.cfg.record_queue
        target = self.cfg.cycles_per_replication
        position = 0
        while True:
            start = env.now
            self._admit_all(start)
            measuring = self.measuring
            if position == record and measuring:
                self._record_polling_instant(start)

            queue = self._queues[position]
            present = len(queue)
            limit = self._visit_limit(position, present)
            served = 0
            while queue and (limit is None or served < limit):
                arrival = queue.popleft()
                if measuring:
                    self._waits[position].append(env.now - arrival)
                    self._served[position] += 1
                served += 1
                yield env.timeout(next(self._services[position]))
                self._admit(position, env.now)

            if self.observer is not None:
                self.observer(
                    VisitRecord(
                        queue=position,
                        start=start,
                        end=env.now,
                        present_at_start=present,
                        served=served,
                        remaining_at_end=len(queue),
                    )
                )
            self.visits += 1
            if self.cycles >= target:
                return

            if self.spec.visit_order is VisitOrder.LONGEST_QUEUE:
                self._admit_all(env.now)
            following = self._next_queue(position)

            if self._zero_switchover:
                self._admit_all(env.now)
                if not any(self._queues):
                    next_arrival = min(a.next_epoch for a in self._arrivals)
                    yield env.timeout(next_arrival - env.now)
                    # The arrival that ends the idle period is present at the next visit.
                    self._admit_all(math.nextafter(max(env.now, next_arrival), math.inf))
            else:
                switch = next(self._switches[position])
                if switch > 0:
                    yield env.timeout(switch)
            position = following

    def run(self, index: int = 0) -> ReplicationResult:
        process = self.env.process(self._server())
        self.env.run(until=process)
        n = self.spec.n
        wait_batches = tuple(_batches(self._waits[i]) for i in range(n))
        record = self.cfg.record_queue
        vectors = (
            np.asarray(self._polling, dtype=np.int64)
            if self._polling
            else np.zeros((0, n), dtype=np.int64)
        )
        return ReplicationResult(
            index=index,
            wait_batches=wait_batches,
            polling_batches=_batches(vectors[:, record].astype(float)),
            cycle_batches=_batches(self._cycle_times),
            polling_vectors=vectors,
            served=tuple(self._served),
            cycles=self.cycles - self.cfg.warmup_cycles,
            wait_samples=(
                np.asarray(self._waits[record], dtype=float) if self.cfg.keep_wait_samples else None
            ),
        )


def _batches(values: list[float] | np.ndarray) -> tuple[SampleSummary, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return (SampleSummary(),)
    return tuple(SampleSummary.from_samples(chunk) for chunk in np.array_split(arr, min(DEFAULT_BATCHES, arr.size)))


def replication_seeds(master_seed: int, replications: int) -> list[np.random.SeedSequence]:
    """Independent per-replication seed sequences derived from the master seed."""
    return np.random.SeedSequence(master_seed).spawn(replications)


def run_replication(spec: SystemSpec, cfg: SimConfig, index: int) -> ReplicationResult:
    seed = replication_seeds(cfg.master_seed, cfg.replications)[index]
    started = time.perf_counter()
    result = PollingSimulation(spec, cfg, seed).run(index)
    logger.debug(
        "Replication complete",
        extra={"replication": index, "elapsed_seconds": time.perf_counter() - started},
    )
    return result


def _groups(replications: tuple[ReplicationResult, ...], pick: Callable[[ReplicationResult], tuple[SampleSummary, ...]]) -> list[SampleSummary]:
    """Replication summaries, or the batches of a lone replication."""
    if len(replications) >= 2:
        return [pool(pick(r)) for r in replications]
    return list(pick(replications[0]))


def _safe_mean(groups: list[SampleSummary]) -> MeanEstimate:
    nonempty = [g for g in groups if g.count > 0]
    if len(nonempty) >= 2:
        return estimate_mean(nonempty)
    total = pool(groups)
    return MeanEstimate(mean=total.mean if total.count else math.nan, half_width=math.nan, count=total.count)


def _safe_scv(groups: list[SampleSummary]) -> ScvEstimate:
    nonempty = [g for g in groups if g.count > 0]
    if len(nonempty) >= 2:
        return estimate_scv(nonempty)
    total = pool(groups)
    return ScvEstimate(
        scv=total.scv if total.count else math.nan,
        half_width=math.nan,
        mean=total.mean,
        replications=len(nonempty),
        count=total.count,
        defined=total.count > 0 and total.mean != 0,
    )


def aggregate(spec: SystemSpec, cfg: SimConfig, replications: tuple[ReplicationResult, ...]) -> SimResult:
    """Deterministic reduction of replication results, ordered by replication index."""
    ordered = tuple(sorted(replications, key=lambda r: r.index))
    polling_groups = _groups(ordered, lambda r: r.polling_batches)
    if sum(g.count for g in polling_groups) == 0:
        raise InsufficientSamplesError("no post-warmup polling instants were recorded")

    waits = []
    for i in range(spec.n):
        groups = _groups(ordered, lambda r, i=i: r.wait_batches[i])
        mean_est = _safe_mean(groups)
        scv_est = _safe_scv(groups)
        waits.append(
            QueueWaitStats(
                queue=i,
                count=mean_est.count,
                mean=mean_est.mean,
                mean_half_width=mean_est.half_width,
                scv=scv_est.scv,
                scv_half_width=scv_est.half_width,
            )
        )

    return SimResult(
        spec=spec,
        config=cfg,
        waits=tuple(waits),
        polling_mean=_safe_mean(polling_groups),
        polling_scv=_safe_scv(polling_groups),
        cycle_time=_safe_mean(_groups(ordered, lambda r: r.cycle_batches)),
        mean_total_switchover=spec.mean_total_switchover,
        replications=ordered,
    )


def run(
    spec: SystemSpec,
    cfg: SimConfig,
    *,
    observer: VisitObserver | None = None,
) -> SimResult:
    """
    Simulate cfg.replications independent replications and aggregate them.

    Replications run in a process pool when cfg.workers > 1; an observer requires a
    single worker.
    """
    if cfg.record_queue >= spec.n:
        raise ValueError(f"record_queue must be < {spec.n}")
    if observer is not None and cfg.workers > 1:
        raise ValueError("observer requires workers == 1")

    started = time.perf_counter()
    indices = range(cfg.replications)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool_executor:
            results = tuple(
                pool_executor.map(run_replication, [spec] * cfg.replications, [cfg] * cfg.replications, indices)
            )
    else:
        seeds = replication_seeds(cfg.master_seed, cfg.replications)
        results = tuple(
            PollingSimulation(spec, cfg, seeds[i], observer=observer).run(i) for i in indices
        )

    result = aggregate(spec, cfg, results)
    logger.info(
        "Simulation complete",
        extra={
            "system": describe_system(spec),
            "replications": cfg.replications,
            "cycles": cfg.cycles_per_replication,
            "workers": cfg.workers,
            "elapsed_seconds": time.perf_counter() - started,
        },
    )
    return result
