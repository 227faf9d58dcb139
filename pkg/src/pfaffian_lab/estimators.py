"""Single-pass mean/variance accumulation and the verification record."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable, Optional

from .errors import NoReplicates


class Accumulator:
    """Welford running mean and sum of squared deviations.

    Partial accumulators merge associatively (Chan et al.), so replicate
    batches can be reduced in any grouping.
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self, count: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def extend(self, xs: Iterable[float]) -> "Accumulator":
        for x in xs:
            self.push(float(x))
        return self

    def merge(self, other: "Accumulator") -> "Accumulator":
        n = self.count + other.count
        if n == 0:
            return Accumulator()
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Accumulator(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else 0.0

    def result(self, name: str, predicted: Optional[float] = None) -> "EstimatorResult":
        if self.count == 0:
            raise NoReplicates(f"{name}: no replicates accumulated")
        return EstimatorResult.build(name, self.mean, self.stderr, self.count, predicted)


@dataclass(frozen=True)
class EstimatorResult:
    name: str
    estimate: float
    stderr: float
    n_reps: int
    predicted: Optional[float] = None
    z_score: Optional[float] = None

    @classmethod
    def build(cls, name: str, estimate: float, stderr: float, n_reps: int,
              predicted: Optional[float] = None) -> "EstimatorResult":
        z = None
        if predicted is not None and stderr > 0:
            z = (estimate - predicted) / stderr
        return cls(name, float(estimate), float(stderr), int(n_reps),
                   None if predicted is None else float(predicted), z)

    def within(self, sigmas: float = 3.0) -> bool:
        if self.predicted is None:
            return True
        if self.z_score is None:
            return self.estimate == self.predicted
        return abs(self.z_score) <= sigmas

    def as_dict(self) -> dict:
        return asdict(self)


def two_sample_z(a: EstimatorResult, b: EstimatorResult, name: str) -> EstimatorResult:
    """Difference ``a - b`` of independent estimates, predicted to be zero."""
    se = math.hypot(a.stderr, b.stderr)
    return EstimatorResult.build(name, a.estimate - b.estimate, se, min(a.n_reps, b.n_reps), 0.0)
