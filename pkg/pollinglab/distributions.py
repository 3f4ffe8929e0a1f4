"""
Closed family of interarrival / service / switch-over laws.

Every variant has closed-form first two moments, a closed-form LST, and a vectorised
sampler driven by an explicit numpy Generator. Specs are immutable values; callers own
their random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from pollinglab.config import VARIATE_BATCH_SIZE

Number = Union[float, complex]

_UNIT_SCV_TOLERANCE = 1e-12
_INTEGER_PHASE_TOLERANCE = 1e-9


def _check_rate(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a finite value > 0")


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1]")


@dataclass(frozen=True)
class Deterministic:
    """Point mass at `value`."""

    kind: ClassVar[str] = "deterministic"

    value: float

    def __post_init__(self) -> None:
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ValueError("value must be a finite value >= 0")


@dataclass(frozen=True)
class Exponential:
    kind: ClassVar[str] = "exponential"

    rate: float

    def __post_init__(self) -> None:
        _check_rate("rate", self.rate)


@dataclass(frozen=True)
class Erlang:
    kind: ClassVar[str] = "erlang"

    phases: int
    rate: float

    def __post_init__(self) -> None:
        if self.phases < 1:
            raise ValueError("phases must be >= 1")
        _check_rate("rate", self.rate)


@dataclass(frozen=True)
class MixedErlang:
    """Erlang(phases_low) with probability prob_low, else Erlang(phases_high); common rate."""

    kind: ClassVar[str] = "mixed-erlang"

    phases_low: int
    phases_high: int
    prob_low: float
    rate: float

    def __post_init__(self) -> None:
        if self.phases_low < 1:
            raise ValueError("phases_low must be >= 1")
        if self.phases_high != self.phases_low + 1:
            raise ValueError("phases_high must equal phases_low + 1")
        _check_probability("prob_low", self.prob_low)
        _check_rate("rate", self.rate)


@dataclass(frozen=True)
class Hyperexp2:
    kind: ClassVar[str] = "hyperexp2"

    prob1: float
    rate1: float
    rate2: float

    def __post_init__(self) -> None:
        _check_probability("prob1", self.prob1)
        _check_rate("rate1", self.rate1)
        _check_rate("rate2", self.rate2)


DistributionSpec = Union[Deterministic, Exponential, Erlang, MixedErlang, Hyperexp2]

DISTRIBUTION_KINDS: dict[str, type] = {
    cls.kind: cls for cls in (Deterministic, Exponential, Erlang, MixedErlang, Hyperexp2)
}


@dataclass(frozen=True)
class MomentPair:
    """First two moments of a nonnegative law."""

    mean: float
    scv: float
    second_moment: float

    def __post_init__(self) -> None:
        if self.mean < 0:
            raise ValueError("mean must be >= 0")
        if self.scv < 0:
            raise ValueError("scv must be >= 0")

    @classmethod
    def from_raw(cls, mean: float, second_moment: float) -> "MomentPair":
        if mean == 0:
            return cls(mean=0.0, scv=0.0, second_moment=second_moment)
        # Clamp roundoff below zero for point masses.
        scv = max(second_moment / (mean * mean) - 1.0, 0.0)
        return cls(mean=mean, scv=scv, second_moment=second_moment)

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean * self.mean


def moments(spec: DistributionSpec) -> MomentPair:
    """Closed-form first two moments."""
    if isinstance(spec, Deterministic):
        return MomentPair(mean=spec.value, scv=0.0, second_moment=spec.value**2)
    if isinstance(spec, Exponential):
        mean = 1.0 / spec.rate
        return MomentPair(mean=mean, scv=1.0, second_moment=2.0 * mean * mean)
    if isinstance(spec, Erlang):
        k, mu = spec.phases, spec.rate
        return MomentPair.from_raw(k / mu, k * (k + 1) / (mu * mu))
    if isinstance(spec, MixedErlang):
        p, k, mu = spec.prob_low, spec.phases_high, spec.rate
        first = (k - p) / mu
        second = (p * (k - 1) * k + (1.0 - p) * k * (k + 1)) / (mu * mu)
        return MomentPair.from_raw(first, second)
    if isinstance(spec, Hyperexp2):
        p, mu1, mu2 = spec.prob1, spec.rate1, spec.rate2
        first = p / mu1 + (1.0 - p) / mu2
        second = 2.0 * p / (mu1 * mu1) + 2.0 * (1.0 - p) / (mu2 * mu2)
        return MomentPair.from_raw(first, second)
    raise TypeError(f"Unsupported distribution spec: {spec!r}")


def mean(spec: DistributionSpec) -> float:
    return moments(spec).mean


def variance(spec: DistributionSpec) -> float:
    return moments(spec).variance


def fit_phase_type(mean: float, scv: float) -> DistributionSpec:
    """
    Fit a phase-type law on the first two moments.

    - scv == 0: Deterministic(mean)
    - scv == 1: Exponential
    - scv < 1: Erlang(k) when scv == 1/k, otherwise a mixture of Erlang(k-1) and
      Erlang(k) with a common rate, where 1/k < scv < 1/(k-1)
    - scv > 1: two-phase hyperexponential with balanced means
    """
    if not (mean > 0 and math.isfinite(mean)):
        raise ValueError("mean must be a finite value > 0")
    if scv < 0 or not math.isfinite(scv):
        raise ValueError("scv must be a finite value >= 0")
    if scv == 0:
        return Deterministic(mean)
    if abs(scv - 1.0) <= _UNIT_SCV_TOLERANCE:
        return Exponential(1.0 / mean)
    if scv < 1.0:
        inverse = 1.0 / scv
        nearest = round(inverse)
        if abs(inverse - nearest) <= _INTEGER_PHASE_TOLERANCE * inverse:
            return Erlang(phases=int(nearest), rate=nearest / mean)
        k = math.ceil(inverse)
        radicand = max(k * (1.0 + scv) - k * k * scv, 0.0)
        p = (k * scv - math.sqrt(radicand)) / (1.0 + scv)
        return MixedErlang(phases_low=k - 1, phases_high=k, prob_low=p, rate=(k - p) / mean)
    root = math.sqrt((scv - 1.0) / (scv + 1.0))
    p1 = 0.5 * (1.0 + root)
    p2 = 0.5 * (1.0 - root)
    return Hyperexp2(prob1=p1, rate1=2.0 * p1 / mean, rate2=2.0 * p2 / mean)


def scaled(spec: DistributionSpec, factor: float) -> DistributionSpec:
    """Return the law of factor * X."""
    if not (factor > 0 and math.isfinite(factor)):
        raise ValueError("factor must be a finite value > 0")
    if isinstance(spec, Deterministic):
        return Deterministic(spec.value * factor)
    if isinstance(spec, Exponential):
        return Exponential(spec.rate / factor)
    if isinstance(spec, Erlang):
        return Erlang(spec.phases, spec.rate / factor)
    if isinstance(spec, MixedErlang):
        return MixedErlang(spec.phases_low, spec.phases_high, spec.prob_low, spec.rate / factor)
    if isinstance(spec, Hyperexp2):
        return Hyperexp2(spec.prob1, spec.rate1 / factor, spec.rate2 / factor)
    raise TypeError(f"Unsupported distribution spec: {spec!r}")


def lst(spec: DistributionSpec, s: Number) -> Number:
    """Laplace-Stieltjes transform E[exp(-s X)] for Re(s) >= 0."""
    if isinstance(spec, Deterministic):
        return np.exp(-s * spec.value)
    if isinstance(spec, Exponential):
        return spec.rate / (spec.rate + s)
    if isinstance(spec, Erlang):
        return (spec.rate / (spec.rate + s)) ** spec.phases
    if isinstance(spec, MixedErlang):
        r = spec.rate / (spec.rate + s)
        return spec.prob_low * r**spec.phases_low + (1.0 - spec.prob_low) * r**spec.phases_high
    if isinstance(spec, Hyperexp2):
        p = spec.prob1
        return p * spec.rate1 / (spec.rate1 + s) + (1.0 - p) * spec.rate2 / (spec.rate2 + s)
    raise TypeError(f"Unsupported distribution spec: {spec!r}")


def lst_derivative(spec: DistributionSpec, s: Number) -> Number:
    """First derivative of the LST with respect to s."""
    if isinstance(spec, Deterministic):
        return -spec.value * np.exp(-s * spec.value)
    if isinstance(spec, Exponential):
        return -spec.rate / (spec.rate + s) ** 2
    if isinstance(spec, Erlang):
        r = spec.rate / (spec.rate + s)
        return -spec.phases * r**spec.phases / (spec.rate + s)
    if isinstance(spec, MixedErlang):
        r = spec.rate / (spec.rate + s)
        low = spec.phases_low * r**spec.phases_low
        high = spec.phases_high * r**spec.phases_high
        return -(spec.prob_low * low + (1.0 - spec.prob_low) * high) / (spec.rate + s)
    if isinstance(spec, Hyperexp2):
        p = spec.prob1
        return -p * spec.rate1 / (spec.rate1 + s) ** 2 - (1.0 - p) * spec.rate2 / (
            spec.rate2 + s
        ) ** 2
    raise TypeError(f"Unsupported distribution spec: {spec!r}")


def sample_many(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` independent variates as a float64 array."""
    if size < 0:
        raise ValueError("size must be >= 0")
    if isinstance(spec, Deterministic):
        return np.full(size, spec.value, dtype=float)
    if isinstance(spec, Exponential):
        return rng.exponential(1.0 / spec.rate, size)
    if isinstance(spec, Erlang):
        return rng.gamma(spec.phases, 1.0 / spec.rate, size)
    if isinstance(spec, MixedErlang):
        shapes = np.where(rng.random(size) < spec.prob_low, spec.phases_low, spec.phases_high)
        return rng.gamma(shapes, 1.0 / spec.rate)
    if isinstance(spec, Hyperexp2):
        rates = np.where(rng.random(size) < spec.prob1, spec.rate1, spec.rate2)
        return rng.exponential(1.0 / rates)
    raise TypeError(f"Unsupported distribution spec: {spec!r}")


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    """Draw a single variate."""
    return float(sample_many(spec, rng, 1)[0])


class VariateStream:
    """
    Buffered iterator of variates from one law and one private Generator.

    Draws in fixed-size batches, so the sequence depends only on the seed and the law.
    """

    def __init__(
        self,
        spec: DistributionSpec,
        rng: np.random.Generator,
        batch_size: int = VARIATE_BATCH_SIZE,
    ) -> None:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.spec = spec
        self._rng = rng
        self._batch_size = batch_size
        self._buffer: list[float] = []
        self._pos = 0

    def __iter__(self) -> "VariateStream":
        return self

    def __next__(self) -> float:
        if self._pos >= len(self._buffer):
            self._buffer = sample_many(self.spec, self._rng, self._batch_size).tolist()
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value


def _num(value: float) -> str:
    """Shortest text that parses back to the same float; integral values drop '.0'."""
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def describe(spec: DistributionSpec | None) -> str:
    """Compact, stable text form used in CSV parameter columns."""
    if spec is None:
        return "none"
    if isinstance(spec, Deterministic):
        return f"det({_num(spec.value)})"
    if isinstance(spec, Exponential):
        return f"exp({_num(spec.rate)})"
    if isinstance(spec, Erlang):
        return f"erlang({spec.phases},{_num(spec.rate)})"
    if isinstance(spec, MixedErlang):
        return f"mixed-erlang({spec.phases_low},{spec.phases_high},{_num(spec.prob_low)},{_num(spec.rate)})"
    if isinstance(spec, Hyperexp2):
        return f"h2({_num(spec.prob1)},{_num(spec.rate1)},{_num(spec.rate2)})"
    raise TypeError(f"Unsupported distribution spec: {spec!r}")
