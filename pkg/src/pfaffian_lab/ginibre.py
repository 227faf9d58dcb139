"""Real eigenvalues of the real Ginibre ensemble.

In the large-``n`` limit the real eigenvalues form the same Pfaffian point
process as annihilating Brownian motions at time ``t = 1/2``: one-point
density ``1/sqrt(2 pi)`` and two-point density ``rho([x, y], 1/2, annihilating)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy import integrate

from . import rng as rngmod
from .errors import EigensolverFailure, InsufficientStatistics
from .estimators import Accumulator, EstimatorResult
from .formulas import Model, rho
from .simulate import pair_density_normalizer, pair_gap_counts

BULK_DENSITY = 1.0 / math.sqrt(2.0 * math.pi)
MIN_PAIR_COUNT = 100
# annihilating time at which the particle kernel matches the Ginibre kernel
MATCHING_TIME = 0.5


@dataclass(frozen=True)
class GinibreSample:
    n: int
    real_eigenvalues: np.ndarray
    tolerance_used: float

    @property
    def count(self) -> int:
        return int(self.real_eigenvalues.size)


def real_eigenvalues_of(m: np.ndarray, tol: float = 1e-8) -> GinibreSample:
    n = m.shape[0]
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    keep = np.abs(ev.imag) <= tol * math.sqrt(n)
    return GinibreSample(n, np.sort(ev.real[keep]), tol)


def sample_real_eigenvalues(n: int, rng: np.random.Generator, tol: float = 1e-8) -> GinibreSample:
    """Real eigenvalues of one ``n x n`` matrix of independent standard normals."""
    if n < 1:
        raise ValueError("n must be positive")
    return real_eigenvalues_of(rng.standard_normal((n, n)), tol)


def samples(n: int, reps: int, seed: int, tol: float = 1e-8) -> Iterator[GinibreSample]:
    """``reps`` independent samples; sample ``i`` uses the stream keyed by ``(seed, i)``."""
    for i in range(reps):
        yield sample_real_eigenvalues(n, rngmod.stream(seed, i, rngmod.EXTRA), tol)


def expected_real_count(n: int) -> float:
    """Exact mean number of real eigenvalues of an ``n x n`` real Ginibre matrix
    (Edelman, Kostlan and Shub).  Grows like ``sqrt(2n/pi) + 1/2``."""
    # ratio (4k-1)!!/(4k)!! built incrementally to stay in floating range
    if n % 2 == 0:
        total, r = 0.0, 1.0
        for k in range(n // 2):
            if k > 0:
                r *= (4 * k - 3) * (4 * k - 1) / ((4 * k - 2) * (4 * k))
            total += r
        return math.sqrt(2.0) * total
    total, r = 0.0, 1.0
    for k in range(1, (n - 1) // 2 + 1):
        r *= (4 * k - 3) / (4 * k - 2) if k == 1 else (4 * k - 5) * (4 * k - 3) / ((4 * k - 4) * (4 * k - 2))
        total += r
    return 1.0 + math.sqrt(2.0) * total


@dataclass(frozen=True)
class HistogramRow:
    bin_left: float
    bin_right: float
    count: int
    density: float
    predicted: float


@dataclass(frozen=True)
class DensityResult:
    histogram: list
    bulk_density: EstimatorResult
    real_count: EstimatorResult


def rr_density(n: int, reps: int, bins: int, seed: int, tol: float = 1e-8) -> DensityResult:
    """Histogram of real eigenvalues plus the bulk (``|x| <= sqrt(n)/2``) density."""
    if reps < 1:
        raise ValueError("reps must be positive")
    half = math.sqrt(n) / 2.0
    edges = np.linspace(-math.sqrt(n) * 1.25, math.sqrt(n) * 1.25, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    bulk = Accumulator()
    total = Accumulator()
    for s in samples(n, reps, seed, tol):
        x = s.real_eigenvalues
        counts += np.histogram(x, edges)[0]
        bulk.push(np.count_nonzero(np.abs(x) <= half) / (2.0 * half))
        total.push(s.count)
    width = np.diff(edges)
    rows = []
    for k in range(bins):
        mid = 0.5 * (edges[k] + edges[k + 1])
        pred = BULK_DENSITY if abs(mid) <= math.sqrt(n) else 0.0
        rows.append(HistogramRow(float(edges[k]), float(edges[k + 1]), int(counts[k]),
                                 float(counts[k] / (reps * width[k])), pred))
    return DensityResult(rows, bulk.result(f"ginibre-bulk-density-n{n}", BULK_DENSITY),
                         total.result(f"ginibre-real-count-n{n}", expected_real_count(n)))


@dataclass(frozen=True)
class CorrelationRow:
    gap_lo: float
    gap_hi: float
    pair_count: int
    empirical: float      # two-point density, eigenvalue units
    predicted: float      # annihilating two-point density at t = 1/2
    unfolded: float       # empirical / (empirical bulk density)**2
    unfolded_predicted: float
    relative_deviation: float

    @property
    def sufficient(self) -> bool:
        return self.pair_count >= MIN_PAIR_COUNT


def predicted_pair_density(edges: np.ndarray, window: float) -> np.ndarray:
    """Bin averages of the annihilating two-point density over pairs in ``[-window, window]``."""
    L = 2.0 * window
    norm = pair_density_normalizer(-window, window, edges)
    out = np.empty(len(edges) - 1)
    for k in range(len(edges) - 1):
        a, b = edges[k], min(edges[k + 1], L)
        val = integrate.quad(lambda g: rho([0.0, g], MATCHING_TIME, Model.ANNIHILATING) * (L - g),
                             a, b)[0] if b > a else 0.0
        out[k] = val / norm[k] if norm[k] > 0 else 0.0
    return out


def kernel_correspondence(n: int, reps: int, pair_bins: Sequence[float], seed: int,
                          tol: float = 1e-8) -> list[CorrelationRow]:
    """Empirical bulk two-point correlation of real eigenvalues against the
    annihilating-particle prediction, per gap bin.

    Bins with fewer than 100 pairs are reported but flagged insufficient.
    """
    edges = np.asarray(pair_bins, dtype=float)
    half = math.sqrt(n) / 2.0
    norm = pair_density_normalizer(-half, half, edges)
    pairs = np.zeros(len(edges) - 1, dtype=np.int64)
    bulk = Accumulator()
    for s in samples(n, reps, seed, tol):
        x = s.real_eigenvalues
        pairs += pair_gap_counts(x, -half, half, edges)
        bulk.push(np.count_nonzero(np.abs(x) <= half) / (2.0 * half))
    if not np.any(pairs >= MIN_PAIR_COUNT):
        raise InsufficientStatistics(f"no gap bin reached {MIN_PAIR_COUNT} pairs")
    pred = predicted_pair_density(edges, half)
    rho1 = bulk.mean
    rows = []
    for k in range(len(edges) - 1):
        emp = pairs[k] / (reps * norm[k]) if norm[k] > 0 else 0.0
        unf = emp / rho1 ** 2
        unf_pred = pred[k] / BULK_DENSITY ** 2
        dev = unf / unf_pred - 1.0 if unf_pred > 0 else math.inf
        rows.append(CorrelationRow(float(edges[k]), float(edges[k + 1]), int(pairs[k]),
                                   float(emp), float(pred[k]), float(unf), float(unf_pred), float(dev)))
    return rows


def matrix_bm_trajectory(n: int, times: Sequence[float], rng: np.random.Generator,
                         tol: float = 1e-8) -> list[GinibreSample]:
    """Real eigenvalues of matrix Brownian motion ``M_t`` (``M_0 = 0``) at each time."""
    ts = [float(t) for t in times]
    if not ts or ts[0] <= 0 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("times must be increasing and positive")
    m = np.zeros((n, n))
    prev = 0.0
    out = []
    for t in ts:
        m = m + math.sqrt(t - prev) * rng.standard_normal((n, n))
        prev = t
        out.append(real_eigenvalues_of(m, tol))
    return out
