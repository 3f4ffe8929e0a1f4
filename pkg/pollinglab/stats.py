"""
Replication-level estimators for simulation output.

Pure functions over sample summaries: pooled means and SCVs, t-intervals over
replication means, delete-one-replication jackknife for the SCV, and the KS distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import stats as sps

from pollinglab.config import CONFIDENCE_LEVEL
from pollinglab.errors import InsufficientSamplesError

DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class SampleSummary:
    """Count, mean and sum of squared deviations (m2) of one sample."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.m2 < 0:
            object.__setattr__(self, "m2", 0.0)

    @classmethod
    def from_samples(cls, samples: Sequence[float] | np.ndarray) -> "SampleSummary":
        values = np.asarray(samples, dtype=float)
        if values.size == 0:
            return cls()
        centre = float(values.mean())
        return cls(count=int(values.size), mean=centre, m2=float(((values - centre) ** 2).sum()))

    def merge(self, other: "SampleSummary") -> "SampleSummary":
        """Combine two summaries (pairwise update, stable for large counts)."""
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        total = self.count + other.count
        delta = other.mean - self.mean
        merged_mean = self.mean + delta * other.count / total
        merged_m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / total
        return SampleSummary(count=total, mean=merged_mean, m2=merged_m2)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def scv(self) -> float:
        """Variance over squared mean; nan when the mean is zero."""
        if self.mean == 0:
            return math.nan
        return self.variance / (self.mean * self.mean)


def pool(summaries: Sequence[SampleSummary]) -> SampleSummary:
    total = SampleSummary()
    for summary in summaries:
        total = total.merge(summary)
    return total


def t_half_width(values: Sequence[float] | np.ndarray, level: float = CONFIDENCE_LEVEL) -> float:
    """Half-width of the t-interval for the mean of `values`."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise InsufficientSamplesError("a confidence interval needs at least 2 replications")
    quantile = sps.t.ppf(0.5 + level / 2.0, df=arr.size - 1)
    return float(quantile * arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    half_width: float
    count: int


@dataclass(frozen=True)
class ScvEstimate:
    """
    Pooled SCV with its jackknife half-width.

    defined is False when the pooled mean is zero; scv and half_width are then nan.
    """

    scv: float
    half_width: float
    mean: float
    replications: int
    count: int
    defined: bool = True


def _as_groups(
    data: Union[Sequence[SampleSummary], np.ndarray, Sequence[float]],
    batches: int,
) -> list[SampleSummary]:
    if isinstance(data, np.ndarray) or (
        len(data) > 0 and not isinstance(data[0], SampleSummary)  # type: ignore[index]
    ):
        values = np.asarray(data, dtype=float)
        if values.size < 2 * batches:
            raise InsufficientSamplesError(
                f"need at least {2 * batches} raw samples for {batches} batches"
            )
        return [SampleSummary.from_samples(chunk) for chunk in np.array_split(values, batches)]
    return list(data)  # type: ignore[arg-type]


def estimate_mean(
    data: Union[Sequence[SampleSummary], np.ndarray, Sequence[float]],
    *,
    batches: int = DEFAULT_BATCHES,
    level: float = CONFIDENCE_LEVEL,
) -> MeanEstimate:
    """Pooled mean with the t-interval over replication (or batch) means."""
    groups = [g for g in _as_groups(data, batches) if g.count > 0]
    if len(groups) < 2:
        raise InsufficientSamplesError("need at least 2 non-empty replications")
    pooled = pool(groups)
    return MeanEstimate(
        mean=pooled.mean,
        half_width=t_half_width([g.mean for g in groups], level),
        count=pooled.count,
    )


def estimate_scv(
    data: Union[Sequence[SampleSummary], np.ndarray, Sequence[float]],
    *,
    batches: int = DEFAULT_BATCHES,
    level: float = CONFIDENCE_LEVEL,
) -> ScvEstimate:
    """
    Pooled SCV = variance / mean^2 with a delete-one-replication jackknife half-width.

    Accepts replication summaries or raw samples; raw samples are split into
    contiguous batches that play the role of replications.
    """
    groups = [g for g in _as_groups(data, batches) if g.count > 0]
    if len(groups) < 2:
        raise InsufficientSamplesError("need at least 2 non-empty replications")
    pooled = pool(groups)
    if pooled.mean == 0:
        return ScvEstimate(
            scv=math.nan,
            half_width=math.nan,
            mean=0.0,
            replications=len(groups),
            count=pooled.count,
            defined=False,
        )

    r = len(groups)
    # Prefix/suffix pooling keeps the leave-one-out pass linear in r.
    prefix = [SampleSummary()]
    for g in groups:
        prefix.append(prefix[-1].merge(g))
    suffix = [SampleSummary()]
    for g in reversed(groups):
        suffix.append(suffix[-1].merge(g))
    suffix.reverse()
    leave_one_out = np.array([prefix[k].merge(suffix[k + 1]).scv for k in range(r)])
    if np.any(~np.isfinite(leave_one_out)):
        half_width = math.nan
    else:
        spread = leave_one_out - leave_one_out.mean()
        jack_var = (r - 1) / r * float((spread * spread).sum())
        quantile = sps.t.ppf(0.5 + level / 2.0, df=r - 1)
        half_width = float(quantile * math.sqrt(jack_var))
    return ScvEstimate(
        scv=pooled.scv,
        half_width=half_width,
        mean=pooled.mean,
        replications=r,
        count=pooled.count,
    )


def ks_distance(samples: Sequence[float] | np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of samples and cdf."""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise InsufficientSamplesError("KS distance needs at least one sample")
    return float(sps.kstest(values, cdf).statistic)
