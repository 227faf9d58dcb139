"""Monte Carlo engine for instantly coalescing / annihilating Brownian particles.

Time stepping is Euler with exact Gaussian increments.  Collisions that
happen between grid times are recovered with the Brownian-bridge hitting
probability of the gap process: two standard Brownian particles with gaps
``a`` before and ``b`` after a step of length ``dt`` met during the step with
probability ``exp(-a * b / dt)``.

When two coalescing particles meet, the left one survives and keeps its own
path; killing either partner at the meeting time is an exact construction of
coalescing Brownian motions, whereas averaging the two endpoints would shrink
the survivor's diffusivity.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

import numba
import numpy as np

from . import rng as rngmod
from .errors import (
    EmptyWindow,
    InsufficientBuffer,
    InvalidProbability,
    NonpositiveStep,
    OddCount,
    PfaffianLabError,
)
from .estimators import Accumulator, EstimatorResult, two_sample_z
from .formulas import Model, as_model, as_test_function

THREADS_ENV = "PFAFFIAN_LAB_THREADS"


# --- state -----------------------------------------------------------------

@dataclass(frozen=True)
class ParticleSystem:
    model: Model
    positions: np.ndarray
    time: float = 0.0
    extinct_at: Optional[float] = None

    def __post_init__(self):
        x = np.array(self.positions, dtype=float).reshape(-1)
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("positions must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "model", as_model(self.model))
        if x.size == 0 and self.extinct_at is None:
            object.__setattr__(self, "extinct_at", float(self.time))

    @property
    def count(self) -> int:
        return int(self.positions.size)

    def count_in(self, a: float, b: float) -> int:
        """Number of particles in the open interval ``(a, b)``."""
        x = self.positions
        return int(np.searchsorted(x, b, side="left") - np.searchsorted(x, a, side="right"))


# --- initial conditions ----------------------------------------------------

def _window(window) -> tuple[float, float]:
    a, b = (float(v) for v in window)
    if not b > a:
        raise EmptyWindow(f"window [{a}, {b}] is empty")
    return a, b


@dataclass(frozen=True)
class ExplicitList:
    points: tuple

    def sample(self, rng: np.random.Generator, thin_rng=None) -> np.ndarray:
        return np.unique(np.asarray(self.points, dtype=float))


@dataclass(frozen=True)
class Poisson:
    intensity: float
    window: tuple

    def __post_init__(self):
        _window(self.window)
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")

    def sample(self, rng: np.random.Generator, thin_rng=None) -> np.ndarray:
        a, b = _window(self.window)
        n = rng.poisson(self.intensity * (b - a))
        return np.unique(rng.uniform(a, b, size=n))


@dataclass(frozen=True)
class Lattice:
    spacing: float
    window: tuple

    def __post_init__(self):
        _window(self.window)
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    def sample(self, rng: np.random.Generator, thin_rng=None) -> np.ndarray:
        a, b = _window(self.window)
        k = int(math.floor((b - a) / self.spacing + 1e-9))
        return a + self.spacing * np.arange(k + 1)


@dataclass(frozen=True)
class Thinned:
    """Independent ``p``-thinning of another initial condition (own substream)."""

    base: object
    p: float = 0.5

    def sample(self, rng: np.random.Generator, thin_rng=None) -> np.ndarray:
        x = self.base.sample(rng)
        keep = (thin_rng if thin_rng is not None else rng).random(x.size) < self.p
        return x[keep]


InitialCondition = Union[ExplicitList, Poisson, Lattice, Thinned]


def init(ic, model, rng: np.random.Generator, thin_rng: Optional[np.random.Generator] = None) -> ParticleSystem:
    return ParticleSystem(as_model(model), ic.sample(rng, thin_rng), 0.0)


# --- stepping kernels ------------------------------------------------------

@numba.njit(nogil=True, cache=True)
def _advance(old, new, n, coalescing, dt, gen):
    """One step in place.  ``old[:n]`` holds the sorted positions; on return
    ``new[:m]`` holds the survivors and ``m`` is returned."""
    sd = math.sqrt(dt)
    for i in range(n):
        new[i] = old[i] + sd * gen.standard_normal()
    m = 0
    for i in range(n):
        co = old[i]
        cn = new[i]
        alive = True
        while m > 0:
            so = old[m - 1]
            sn = new[m - 1]
            b = cn - sn
            if b > 0.0:
                a = co - so
                if gen.random() >= math.exp(-a * b / dt):
                    break
            # the left particle survives a coalescence and keeps its own path
            alive = False
            if not coalescing:
                m -= 1
            break
        if alive:
            old[m] = co
            new[m] = cn
            m += 1
    return m


@numba.njit(nogil=True, cache=True)
def _evolve(x0, coalescing, dt, nsteps, gen):
    n = x0.size
    old = x0.copy()
    new = np.empty(max(n, 1))
    extinct_step = -1
    for s in range(nsteps):
        if n == 0:
            break
        n = _advance(old, new, n, coalescing, dt, gen)
        for i in range(n):
            old[i] = new[i]
        if n == 0:
            extinct_step = s + 1
    return old[:n].copy(), extinct_step


def step(sys: ParticleSystem, dt: float, rng: np.random.Generator) -> ParticleSystem:
    """Advance a system by one step of length ``dt``."""
    if not dt > 0:
        raise NonpositiveStep(f"dt must be positive, got {dt}")
    if sys.count == 0:
        return replace(sys, time=sys.time + dt)
    old = sys.positions.copy()
    new = np.empty_like(old)
    m = _advance(old, new, old.size, sys.model is Model.COALESCING, float(dt), rng)
    t = sys.time + dt
    return ParticleSystem(sys.model, new[:m].copy(), t, t if m == 0 else None)


def evolve(sys: ParticleSystem, duration: float, dt: float, rng: np.random.Generator) -> ParticleSystem:
    """Run ``sys`` forward for ``duration`` using ``round(duration/dt)`` equal steps."""
    if not dt > 0:
        raise NonpositiveStep(f"dt must be positive, got {dt}")
    nsteps = max(1, int(round(duration / dt)))
    h = duration / nsteps
    if sys.count == 0:
        return replace(sys, time=sys.time + duration)
    x, ext = _evolve(np.ascontiguousarray(sys.positions, dtype=float),
                     sys.model is Model.COALESCING, h, nsteps, rng)
    extinct_at = sys.time + ext * h if ext >= 0 else None
    return ParticleSystem(sys.model, x, sys.time + duration, extinct_at)


def thin(sys: ParticleSystem, p: float = 0.5, rng: Optional[np.random.Generator] = None) -> ParticleSystem:
    """Keep each particle independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"p must lie in [0, 1], got {p}")
    if p == 1.0:
        return sys
    if p == 0.0:
        return ParticleSystem(sys.model, sys.positions[:0], sys.time, sys.extinct_at)
    keep = rng.random(sys.count) < p
    return ParticleSystem(sys.model, sys.positions[keep], sys.time, sys.extinct_at)


def in_span(sys: ParticleSystem, x: float) -> bool:
    """Whether ``x`` lies in ``(p1, p2) u (p3, p4) u ...`` of the sorted positions."""
    if sys.count % 2:
        raise OddCount("the span set needs an even number of particles")
    if sys.count == 0:
        return False
    # inside an open pair interval iff an odd number of positions lie strictly below x
    k = int(np.searchsorted(sys.positions, x, side="left"))
    return bool(k % 2 == 1 and sys.positions[k] > x)


# --- runs ------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    replicates: int = 1000
    master_seed: int = 0
    observation_window: tuple = (-20.0, 20.0)
    buffer: float = 6.0
    threads: int = 0  # 0: take PFAFFIAN_LAB_THREADS or 1

    def __post_init__(self):
        if not self.dt > 0:
            raise NonpositiveStep("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.buffer < 0:
            raise ValueError("buffer must be nonnegative")
        object.__setattr__(self, "observation_window", tuple(float(v) for v in self.observation_window))

    @property
    def worker_count(self) -> int:
        if self.threads > 0:
            return self.threads
        return max(1, int(os.environ.get(THREADS_ENV, "1")))


def run_replicate(ic, model, cfg: RunConfig, r: int, t_end: Optional[float] = None) -> ParticleSystem:
    streams = rngmod.replicate_streams(cfg.master_seed, r)
    sys0 = init(ic, model, streams["init"], streams["thinning"])
    try:
        return evolve(sys0, cfg.t_end if t_end is None else t_end, cfg.dt, streams["motion"])
    except Exception as exc:  # pragma: no cover - diagnostics path
        raise PfaffianLabError(f"replicate {r} (seed {cfg.master_seed}) failed: {exc}") from exc


def run(ic, model, cfg: RunConfig, t_end: Optional[float] = None) -> Iterator[ParticleSystem]:
    """Final state of each replicate, in replicate order.

    Replicate ``r`` draws only from streams keyed by ``(master_seed, r)``, so
    the output is the same for any thread count.
    """
    model = as_model(model)
    workers = cfg.worker_count
    if workers <= 1:
        for r in range(cfg.replicates):
            yield run_replicate(ic, model, cfg, r, t_end)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunk = 256
        for start in range(0, cfg.replicates, chunk):
            idx = range(start, min(start + chunk, cfg.replicates))
            yield from pool.map(lambda r: run_replicate(ic, model, cfg, r, t_end), idx)


# --- event functionals -----------------------------------------------------

def _pairs(endpoints) -> list[tuple[float, float]]:
    a = [float(v) for v in endpoints]
    if len(a) % 2:
        raise ValueError("need an even number of endpoints")
    return list(zip(a[0::2], a[1::2]))


@dataclass(frozen=True)
class EmptyIntervals:
    """1 if ``(a1, a2), (a3, a4), ...`` hold no particles."""
    endpoints: tuple

    def __call__(self, sys: ParticleSystem) -> float:
        return float(all(sys.count_in(a, b) == 0 for a, b in _pairs(self.endpoints)))


@dataclass(frozen=True)
class Parity:
    """``(-1)**N(I_1 u I_3 u ...)``."""
    endpoints: tuple

    def __call__(self, sys: ParticleSystem) -> float:
        n = sum(sys.count_in(a, b) for a, b in _pairs(self.endpoints))
        return -1.0 if n % 2 else 1.0


@dataclass(frozen=True)
class Count:
    a: float
    b: float

    def __call__(self, sys: ParticleSystem) -> float:
        return float(sys.count_in(self.a, self.b))


@dataclass(frozen=True)
class ProductG:
    """``prod g(X_i)``; 1 for an empty system."""
    g: object

    def __call__(self, sys: ParticleSystem) -> float:
        g = as_test_function(self.g)
        out = 1.0
        for x in sys.positions:
            out *= g(float(x))
        return out


@dataclass(frozen=True)
class ExtinctBy:
    t: float

    def __call__(self, sys: ParticleSystem) -> float:
        return float(sys.extinct_at is not None and sys.extinct_at <= self.t)


@dataclass(frozen=True)
class MissesSpan:
    """1 if none of ``points`` lies in the span set of the (annihilating) system."""
    points: tuple

    def __call__(self, sys: ParticleSystem) -> float:
        return float(not any(in_span(sys, x) for x in self.points))


@dataclass(frozen=True)
class SpanParity:
    """``(-1)**|S_t n points|``."""
    points: tuple

    def __call__(self, sys: ParticleSystem) -> float:
        k = sum(in_span(sys, x) for x in self.points)
        return -1.0 if k % 2 else 1.0


@dataclass(frozen=True)
class IntervalPattern:
    """Indicator of one of the interval patterns on ``I_k = (x_k, x_k+1)``."""
    endpoints: tuple
    pattern: str

    def __call__(self, sys: ParticleSystem) -> float:
        x = [float(v) for v in self.endpoints]
        counts = [sys.count_in(x[k], x[k + 1]) for k in range(len(x) - 1)]
        odd_k = counts[0::2]   # I_1, I_3, ...
        even_k = counts[1::2]  # I_2, I_4, ...
        p = self.pattern
        if p == "alternate-empty":
            ok = all(c == 0 for c in odd_k)
        elif p == "all-occupied":
            ok = all(c > 0 for c in counts)
        elif p == "all-odd":
            ok = all(c % 2 == 1 for c in counts)
        elif p == "alternate-occupied":
            ok = all(c > 0 for c in odd_k)
        elif p == "empty-occupied-mixed":
            ok = all(c == 0 for c in odd_k) and all(c > 0 for c in even_k)
        else:
            raise ValueError(f"unknown pattern {p!r}")
        return float(ok)


def estimate(event: Callable[[ParticleSystem], float], runs: Iterable[ParticleSystem],
             predicted: Optional[float] = None, name: Optional[str] = None) -> EstimatorResult:
    acc = Accumulator()
    for sys in runs:
        acc.push(event(sys))
    return acc.result(name or type(event).__name__, predicted)


def estimate_many(events: Mapping[str, Callable], runs: Iterable[ParticleSystem],
                  predicted: Optional[Mapping[str, float]] = None) -> dict[str, EstimatorResult]:
    """Several functionals over one pass of the same replicates."""
    accs = {k: Accumulator() for k in events}
    for sys in runs:
        for k, ev in events.items():
            accs[k].push(ev(sys))
    predicted = predicted or {}
    return {k: accs[k].result(k, predicted.get(k)) for k in events}


# --- experiments -----------------------------------------------------------

def derive_seed(master_seed: int, *tags: int) -> int:
    seq = np.random.SeedSequence(entropy=int(master_seed) & rngmod.MASK64, spawn_key=tags)
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DualityResult:
    left: EstimatorResult
    right: EstimatorResult
    difference: EstimatorResult


def duality_check(forward_ic: Sequence[float], dual_endpoints: Sequence[float], t: float,
                  cfg: RunConfig, kind: str = "coalescing") -> DualityResult:
    """Monte Carlo comparison of the two sides of a time-reversal duality.

    ``kind="coalescing"``: P(coalescing from forward_ic leaves I_1, I_3, ... empty)
    against P(annihilating span from dual_endpoints misses forward_ic).
    ``kind="annihilating"``: E[(-1)**N(I_1 u I_3 ...)] for annihilating from
    forward_ic against E[(-1)**|S_t n forward_ic|].
    """
    fwd = tuple(float(v) for v in forward_ic)
    dual = tuple(float(v) for v in dual_endpoints)
    cfg_l = replace(cfg, master_seed=derive_seed(cfg.master_seed, 1))
    cfg_r = replace(cfg, master_seed=derive_seed(cfg.master_seed, 2))
    if kind == "coalescing":
        left_model, left_ev, right_ev = Model.COALESCING, EmptyIntervals(dual), MissesSpan(fwd)
    elif kind == "annihilating":
        left_model, left_ev, right_ev = Model.ANNIHILATING, Parity(dual), SpanParity(fwd)
    else:
        raise ValueError(f"unknown duality kind {kind!r}")
    left = estimate(left_ev, run(ExplicitList(fwd), left_model, cfg_l, t), name=f"{kind}-duality-forward")
    right = estimate(right_ev, run(ExplicitList(dual), Model.ANNIHILATING, cfg_r, t),
                     name=f"{kind}-duality-dual")
    return DualityResult(left, right, two_sample_z(left, right, f"{kind}-duality-difference"))


def entrance_initial_condition(cfg: RunConfig, model, intensity: float = 10.0, t: float = 1.0):
    """Poisson start approximating the maximal entrance law on the padded window.

    Annihilating systems start from the 1/2-thinned coalescing start.
    """
    lo, hi = cfg.observation_window
    if cfg.buffer < 3.0 * math.sqrt(t):
        raise InsufficientBuffer(f"buffer {cfg.buffer} < 3 sqrt(t) = {3 * math.sqrt(t):.3g}")
    if cfg.buffer < 6.0 * math.sqrt(t):
        warnings.warn(f"buffer {cfg.buffer} is below 6 sqrt(t); edge effects may bias estimates",
                      stacklevel=2)
    window = (lo - cfg.buffer, hi + cfg.buffer)
    if as_model(model) is Model.COALESCING:
        return Poisson(intensity, window)
    return Thinned(Poisson(intensity, window), 0.5)


def finite_intensity_density(intensity: float, t: float) -> float:
    """Exact one-point density at time ``t`` of coalescing particles started from
    a Poisson field of the given intensity on the whole line.

    By duality the density is ``(pi t)**-0.5 * (1 - E[exp(-intensity * G)])``
    where ``G`` is the time-``t`` gap of a surviving pair (a Brownian meander with
    density ``g/(2t) exp(-g**2/(4t))``).  Tends to ``(pi t)**-0.5`` as the
    intensity grows; used to report the residual bias of Poisson starts.
    """
    from scipy import integrate

    lap = integrate.quad(lambda g: g / (2 * t) * math.exp(-g * g / (4 * t) - intensity * g),
                         0.0, math.inf)[0]
    return (1.0 - lap) / math.sqrt(math.pi * t)


def entrance_estimates(cfg: RunConfig, t: float, model, events: Mapping[str, Callable],
                       predicted: Optional[Mapping[str, float]] = None,
                       intensity: float = 10.0) -> dict[str, EstimatorResult]:
    ic = entrance_initial_condition(cfg, model, intensity, t)
    return estimate_many(events, run(ic, model, cfg, t), predicted)


def entrance_density_experiment(cfg: RunConfig, t: float, model, intensity: float = 10.0) -> EstimatorResult:
    """One-point density on the observation window against ``1/sqrt(pi t)``
    (coalescing) or half of it (annihilating)."""
    model = as_model(model)
    lo, hi = cfg.observation_window
    pred = 1.0 / math.sqrt(math.pi * t)
    if model is Model.ANNIHILATING:
        pred *= 0.5
    width = hi - lo

    def density(sys: ParticleSystem) -> float:
        return sys.count_in(lo, hi) / width

    name = f"{model.value}-density"
    return entrance_estimates(cfg, t, model, {name: density}, {name: pred}, intensity)[name]


def pair_gap_counts(positions: np.ndarray, lo: float, hi: float, edges: np.ndarray) -> np.ndarray:
    """Histogram of ``x_j - x_i`` over pairs ``i < j`` with both points in ``[lo, hi]``."""
    x = positions[(positions >= lo) & (positions <= hi)]
    if x.size < 2:
        return np.zeros(len(edges) - 1, dtype=np.int64)
    i, j = np.triu_indices(x.size, 1)
    return np.histogram(np.abs(x[j] - x[i]), edges)[0]


def pair_density_normalizer(lo: float, hi: float, edges: np.ndarray) -> np.ndarray:
    """Lebesgue measure of ``{(x, y): lo <= x < y <= hi, y - x in bin}`` per bin."""
    L = hi - lo
    a, b = edges[:-1], np.minimum(edges[1:], L)
    return np.where(b > a, L * (b - a) - 0.5 * (b * b - a * a), 0.0)


@dataclass(frozen=True)
class PairRow:
    gap_lo: float
    gap_hi: float
    pair_count: int
    empirical: float
    stderr: float
    predicted: float


def entrance_pair_correlation(cfg: RunConfig, t: float, model, edges: Sequence[float],
                              intensity: float = 10.0) -> list[PairRow]:
    """Empirical two-point density against ``rho`` at two points, per gap bin."""
    from .formulas import rho
    from scipy import integrate

    model = as_model(model)
    edges = np.asarray(edges, dtype=float)
    lo, hi = cfg.observation_window
    ic = entrance_initial_condition(cfg, model, intensity, t)
    norm = pair_density_normalizer(lo, hi, edges)
    accs = [Accumulator() for _ in range(len(edges) - 1)]
    totals = np.zeros(len(edges) - 1, dtype=np.int64)
    for sys in run(ic, model, cfg, t):
        c = pair_gap_counts(sys.positions, lo, hi, edges)
        totals += c
        for k, acc in enumerate(accs):
            acc.push(c[k] / norm[k])
    rows = []
    L = hi - lo
    for k in range(len(edges) - 1):
        a, b = edges[k], edges[k + 1]
        pred = integrate.quad(lambda g: rho([0.0, g], t, model) * (L - g), a, b)[0] / norm[k]
        rows.append(PairRow(a, b, int(totals[k]), accs[k].mean, accs[k].stderr, pred))
    return rows


# --- distributional two-sample experiments ----------------------------------

def count_vector(sys: ParticleSystem, edges: Sequence[float]) -> tuple:
    """Particle counts in the consecutive open intervals ``(e_k, e_k+1)``."""
    return tuple(sys.count_in(edges[k], edges[k + 1]) for k in range(len(edges) - 1))


@dataclass(frozen=True)
class TwoSampleResult:
    name: str
    statistic: float
    dof: int
    p_value: float
    n_left: int
    n_right: int

    def passed(self, alpha: float = 0.01) -> bool:
        return self.p_value > alpha


def two_sample_chi2(left: Sequence[tuple], right: Sequence[tuple], name: str,
                    min_pooled: int = 10) -> TwoSampleResult:
    """Chi-square homogeneity test on categorical outcomes (e.g. count vectors).

    Categories whose pooled frequency is below ``min_pooled`` are merged into
    one residual category.
    """
    from collections import Counter
    from scipy.stats import chi2_contingency

    cl, cr = Counter(left), Counter(right)
    cats = sorted(set(cl) | set(cr))
    keep = [c for c in cats if cl[c] + cr[c] >= min_pooled]
    rare = [c for c in cats if cl[c] + cr[c] < min_pooled]
    table = [[cl[c] for c in keep], [cr[c] for c in keep]]
    if rare:
        table[0].append(sum(cl[c] for c in rare))
        table[1].append(sum(cr[c] for c in rare))
    if len(table[0]) < 2:
        return TwoSampleResult(name, 0.0, 0, 1.0, len(left), len(right))
    stat, p, dof, _ = chi2_contingency(np.array(table), correction=False)
    return TwoSampleResult(name, float(stat), int(dof), float(p), len(left), len(right))


THINNING_EDGES = (-2.5, -1.5, -0.5, 0.5, 1.5, 2.5)


def thinning_experiment(cfg: RunConfig, t: float = 1.0, intensity: float = 5.0,
                        edges: Sequence[float] = THINNING_EDGES) -> TwoSampleResult:
    """Annihilating from a 1/2-thinned Poisson(2 intensity) start against the
    1/2-thinning at time ``t`` of coalescing from Poisson(2 intensity).

    Both sides use independent streams; the count vectors over ``edges`` are
    compared with :func:`two_sample_chi2`.
    """
    lo, hi = cfg.observation_window
    window = (lo - cfg.buffer, hi + cfg.buffer)
    base = Poisson(2.0 * intensity, window)
    cfg_a = replace(cfg, master_seed=derive_seed(cfg.master_seed, 1))
    cfg_c = replace(cfg, master_seed=derive_seed(cfg.master_seed, 2))
    left = [count_vector(s, edges) for s in run(Thinned(base, 0.5), Model.ANNIHILATING, cfg_a, t)]
    right = []
    for r, s in enumerate(run(base, Model.COALESCING, cfg_c, t)):
        thinned = thin(s, 0.5, rngmod.stream(cfg_c.master_seed, r, rngmod.THINNING))
        right.append(count_vector(thinned, edges))
    return two_sample_chi2(left, right, "thinning-relation")


def scaling_experiment(cfg: RunConfig, intensity: float = 10.0, scale: float = 2.0,
                       ) -> TwoSampleResult:
    """Entrance-law scale invariance: counts on the observation window at
    ``t = 1`` against counts on the ``scale``-times wider window at
    ``t = scale**2`` (same intensity per unit of ``sqrt(t)``)."""
    lo, hi = cfg.observation_window
    big = replace(cfg, master_seed=derive_seed(cfg.master_seed, 2),
                  observation_window=(scale * lo, scale * hi), buffer=scale * cfg.buffer,
                  dt=cfg.dt * scale ** 2, t_end=cfg.t_end * scale ** 2)
    small = replace(cfg, master_seed=derive_seed(cfg.master_seed, 1))
    left = [s.count_in(lo, hi) for s in
            run(entrance_initial_condition(small, Model.COALESCING, intensity, 1.0),
                Model.COALESCING, small, 1.0)]
    right = [s.count_in(scale * lo, scale * hi) for s in
             run(entrance_initial_condition(big, Model.COALESCING, intensity / scale, scale ** 2),
                 Model.COALESCING, big, scale ** 2)]
    return two_sample_chi2(left, right, "entrance-scaling")
