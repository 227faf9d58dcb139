"""The acceptance battery: every formula against its stochastic or exact oracle.

Each criterion is a function ``(seed, scale) -> Outcome``.  Monte Carlo rows
pass when ``|z| <= 3``; deterministic checks carry their own tolerance.  All
randomness is derived from the master seed, so a suite is reproducible byte
for byte.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__, formulas, ginibre, report, rng as rngmod
from . import simulate as sim
from .estimators import EstimatorResult
from .formulas import Model, Pattern, PatternSpec, TestFunction
from .pfaffian import (
    SkewMatrix,
    det_exact,
    pf_enumerate,
    pf_expand,
    pf_stable,
    pf_sum_expand,
    pfaffian,
)

Z_LIMIT = 3.0


@dataclass(frozen=True)
class Check:
    """A deterministic comparison ``|value - expected| <= tolerance``
    (or a boolean condition when ``expected`` is None)."""

    name: str
    value: float
    expected: Optional[float]
    tolerance: float
    passed: bool

    @classmethod
    def close(cls, name: str, value, expected, rel: float = 0.0, abs_: float = 0.0) -> "Check":
        tol = max(abs_, rel * abs(float(expected)))
        ok = value == expected if tol == 0 else abs(float(value) - float(expected)) <= tol
        return cls(name, float(value), float(expected), tol, bool(ok))

    @classmethod
    def condition(cls, name: str, value: float, ok: bool) -> "Check":
        return cls(name, float(value), None, 0.0, bool(ok))

    def as_row(self) -> tuple:
        return (self.name, self.value, 0.0, None, self.expected, None)


@dataclass
class Outcome:
    name: str
    results: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    extra_csv: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        out = []
        for r in self.results:
            if r.predicted is not None and not r.within(Z_LIMIT):
                z = "n/a" if r.z_score is None else f"{r.z_score:+.2f}"
                out.append(f"{self.name}: {r.name} estimate {r.estimate:.6g} vs {r.predicted:.6g} (z = {z})")
        for c in self.checks:
            if not c.passed:
                exp = "" if c.expected is None else f" vs {c.expected:.6g} (tol {c.tolerance:.3g})"
                out.append(f"{self.name}: check {c.name} failed, value {c.value:.6g}{exp}")
        return out

    @property
    def passed(self) -> bool:
        return not self.failures

    def csv(self) -> str:
        rows = [report.result_row(r) for r in self.results] + [c.as_row() for c in self.checks]
        return report.write_rows(report.RESULT_COLUMNS, rows)


@dataclass(frozen=True)
class Scale:
    """Replicate counts per experiment."""

    name: str
    extinction_reps: int
    entrance_reps: int
    thinning_reps: int
    duality_reps: int
    ginibre_reps: int
    algebra_cases: int = 200


FAST = Scale("fast", extinction_reps=10_000, entrance_reps=2_000, thinning_reps=5_000,
             duality_reps=10_000, ginibre_reps=300)
FULL = Scale("full", extinction_reps=100_000, entrance_reps=10_000, thinning_reps=10_000,
             duality_reps=10_000, ginibre_reps=1_000)
SUITES = {"fast": FAST, "full": FULL}


# --- 1. Pfaffian algebra ------------------------------------------------------

def random_rational_skew(rng: np.random.Generator, dim: int) -> SkewMatrix:
    def entry(i, j):
        return Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 6)))
    return SkewMatrix.from_upper(dim, func=entry, field="rational")


def random_float_skew(rng: np.random.Generator, dim: int) -> SkewMatrix:
    return SkewMatrix.from_upper(dim, func=lambda i, j: float(rng.standard_normal()), field="float")


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def check_pfaffian_algebra(seed: int, scale: Scale = FULL) -> Outcome:
    out = Outcome("pfaffian-algebra")
    g = rngmod.stream(seed, 1)
    n = scale.algebra_cases
    bad_enum = bad_det = 0
    for _ in range(n):
        a = random_rational_skew(g, 2 * int(g.integers(1, 5)))
        p = pf_enumerate(a)
        bad_enum += p != pf_expand(a)
        bad_det += p * p != det_exact(a)
    out.checks.append(Check.close("rational enumerate != expand (count)", bad_enum, 0))
    out.checks.append(Check.close("rational Pf^2 != det (count)", bad_det, 0))

    worst_stable = worst_cong = worst_sum = 0.0
    for _ in range(n):
        dim = 2 * int(g.integers(2, 9))
        a = random_float_skew(g, dim)
        worst_stable = max(worst_stable, _rel(pf_stable(a), float(pf_expand(a))))
        b = g.standard_normal((dim, dim))
        worst_cong = max(worst_cong, _rel(pf_stable(a.congruence(b)),
                                          np.linalg.det(b) * pf_stable(a)))
        if dim <= 10:
            c = random_float_skew(g, dim)
            worst_sum = max(worst_sum, _rel(float(pf_sum_expand(a, c)), float(pfaffian(a + c))))
    out.checks.append(Check.close("float stable vs expand, worst relative error", worst_stable, 0.0, abs_=1e-10))
    out.checks.append(Check.close("congruence Pf(B^T A B) = det(B) Pf(A), worst relative error",
                                  worst_cong, 0.0, abs_=1e-8))
    out.checks.append(Check.close("sum expansion Pf(A+B), worst relative error", worst_sum, 0.0, abs_=1e-8))
    return out


# --- 2. J matrix and the small-separation limit --------------------------------

def check_j_matrix(seed: int = 0, scale: Scale = FULL) -> Outcome:
    out = Outcome("j-matrix")
    out.checks.append(Check.close("Pf(J) at 2 points", formulas.j_matrix(1).pfaffian, Fraction(1)))
    out.checks.append(Check.close("Pf(J) at 4 points", formulas.j_matrix(2).pfaffian, Fraction(1, 8)))
    eps = (0.1, 0.05, 0.025)
    gaps = [formulas.small_separation_check((0, 1, 2, 3), e).gap for e in eps]
    for e, gap in zip(eps, gaps):
        out.checks.append(Check.condition(f"small-separation gap at eps={e}", gap, gap > 0))
    for k in range(1, len(gaps)):
        order = math.log(gaps[k - 1] / gaps[k]) / math.log(eps[k - 1] / eps[k])
        out.checks.append(Check.condition(f"gap decreasing, eps={eps[k]}", gaps[k], gaps[k] < gaps[k - 1]))
        out.checks.append(Check.condition(f"empirical order >= 1, eps={eps[k]}", order, order >= 1.0))
    return out


# --- 3. large-time limit of the densities ---------------------------------------

def check_asymptotic_limit(seed: int = 0, scale: Scale = FULL) -> Outcome:
    out = Outcome("asymptotic-limit")
    for pts in ((0.0, 1.0), (0.0, 1.0, 2.0, 3.0)):
        n = len(pts) // 2
        limit = formulas.asymptotic_constant(n)
        ratios = [formulas.normalized_density(pts, t) for t in (1e2, 1e3, 1e4)]
        gaps = [abs(r - limit) for r in ratios]
        label = f"{len(pts)} points"
        steps = np.diff(ratios)
        out.checks.append(Check.condition(f"{label}: ratio monotone in t", ratios[-1],
                                          bool(np.all(steps > 0) or np.all(steps < 0))))
        out.checks.append(Check.condition(f"{label}: gap decreasing over t=1e2,1e3,1e4", gaps[-1],
                                          gaps[0] > gaps[1] > gaps[2]))
        out.checks.append(Check.close(f"{label}: normalized density at t=1e4",
                                      ratios[-1], limit, rel=0.01))
    return out


# --- 4 and 5. extinction and product moments of explicit starts ------------------

def _explicit_config(seed: int, reps: int) -> sim.RunConfig:
    return sim.RunConfig(dt=1e-3, t_end=1.0, replicates=reps, master_seed=seed)


def check_two_particle_extinction(seed: int, scale: Scale = FULL) -> Outcome:
    out = Outcome("two-particle-extinction")
    cfg = _explicit_config(seed, scale.extinction_reps)
    runs = sim.run(sim.ExplicitList((0.0, 1.0)), Model.ANNIHILATING, cfg)
    out.results.append(sim.estimate(sim.ExtinctBy(1.0), runs, formulas.erf_F(1.0),
                                    name="annihilating-(0,1)-extinct-by-1"))
    return out


def check_four_particles(seed: int, scale: Scale = FULL) -> Outcome:
    out = Outcome("four-particle-moments")
    cfg = _explicit_config(seed, scale.extinction_reps)
    pts = (0.0, 1.0, 2.0, 3.0)
    g = TestFunction.gaussian()
    pred = {
        "annihilating-(0,1,2,3)-extinct-by-1":
            formulas.pattern_probability(PatternSpec(pts, Pattern.ALTERNATE_EMPTY, 1.0, Model.COALESCING)),
        "annihilating-(0,1,2,3)-product-exp(-x^2)": formulas.product_moment(pts, 1.0, g),
    }
    events = {"annihilating-(0,1,2,3)-extinct-by-1": sim.ExtinctBy(1.0),
              "annihilating-(0,1,2,3)-product-exp(-x^2)": sim.ProductG(g)}
    runs = sim.run(sim.ExplicitList(pts), Model.ANNIHILATING, cfg)
    out.results.extend(sim.estimate_many(events, runs, pred).values())
    return out


# --- 6 and 7. entrance law -----------------------------------------------------

def _entrance_config(seed: int, reps: int) -> sim.RunConfig:
    return sim.RunConfig(dt=1e-3, t_end=1.0, replicates=reps, master_seed=seed,
                         observation_window=(-20.0, 20.0), buffer=6.0)


def check_entrance_law(seed: int, scale: Scale = FULL, intensity: float = 10.0) -> Outcome:
    """One-point densities of both models plus the empty-interval pattern,
    all from entrance-law approximating runs."""
    out = Outcome("entrance-law")
    t = 1.0
    lo, hi = -20.0, 20.0
    width = hi - lo
    empty = (0.0, 1.0, 2.0, 3.0)

    def density(s: sim.ParticleSystem) -> float:
        return s.count_in(lo, hi) / width

    cfg = _entrance_config(sim.derive_seed(seed, 1), scale.entrance_reps)
    pred_c = 1.0 / math.sqrt(math.pi * t)
    res = sim.entrance_estimates(
        cfg, t, Model.COALESCING,
        {"coalescing-density": density, "coalescing-empty-(0,1),(2,3)": sim.EmptyIntervals(empty)},
        {"coalescing-density": pred_c,
         "coalescing-empty-(0,1),(2,3)": formulas.pattern_probability(
             PatternSpec(empty, Pattern.ALTERNATE_EMPTY, t, Model.COALESCING))},
        intensity)
    out.results.extend(res.values())
    # same estimate against the exact density of the finite-intensity start (diagnostic)
    d = res["coalescing-density"]
    out.results.append(EstimatorResult.build("coalescing-density-vs-finite-intensity", d.estimate,
                                             d.stderr, d.n_reps,
                                             sim.finite_intensity_density(intensity, t)))

    cfg = _entrance_config(sim.derive_seed(seed, 2), scale.entrance_reps)
    res = sim.entrance_estimates(cfg, t, Model.ANNIHILATING, {"annihilating-density": density},
                                 {"annihilating-density": 0.5 * pred_c}, intensity)
    out.results.extend(res.values())
    return out


# --- 8. thinning relation --------------------------------------------------------

def check_thinning(seed: int, scale: Scale = FULL) -> Outcome:
    out = Outcome("thinning-relation")
    cfg = sim.RunConfig(dt=1e-3, t_end=1.0, replicates=scale.thinning_reps, master_seed=seed,
                        observation_window=(-3.0, 3.0), buffer=6.0)
    res = sim.thinning_experiment(cfg, 1.0, intensity=5.0)
    out.checks.append(Check.condition(f"chi-square two-sample p-value > 0.01 (dof {res.dof})",
                                      res.p_value, res.passed(0.01)))
    return out


# --- 9. duality ---------------------------------------------------------------

def check_duality(seed: int, scale: Scale = FULL) -> Outcome:
    out = Outcome("duality")
    cases = (((0.5,), (0.0, 1.0), 1.0, "coalescing"),
             ((0.3, 0.7), (0.0, 1.0), 0.5, "annihilating"))
    for k, (fwd, dual, t, kind) in enumerate(cases):
        cfg = sim.RunConfig(dt=1e-3, t_end=t, replicates=scale.duality_reps,
                            master_seed=sim.derive_seed(seed, k))
        d = sim.duality_check(fwd, dual, t, cfg, kind)
        out.results.extend([d.left, d.right, d.difference])
    return out


# --- 10. real Ginibre correspondence --------------------------------------------

GINIBRE_N = 100
GINIBRE_PAIR_EDGES = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)


def check_ginibre(seed: int, scale: Scale = FULL) -> Outcome:
    out = Outcome("ginibre")
    dens = ginibre.rr_density(GINIBRE_N, scale.ginibre_reps, 40, seed)
    out.results.extend([dens.bulk_density, dens.real_count])
    b = dens.bulk_density
    out.checks.append(Check.close("bulk density within 5% of 1/sqrt(2 pi)", b.estimate,
                                  ginibre.BULK_DENSITY, rel=0.05))
    rows = ginibre.kernel_correspondence(GINIBRE_N, scale.ginibre_reps, GINIBRE_PAIR_EDGES, seed)
    for r in rows:
        if r.sufficient:
            out.checks.append(Check.close(
                f"unfolded pair correlation, gap [{r.gap_lo:g},{r.gap_hi:g}) ({r.pair_count} pairs)",
                r.unfolded, r.unfolded_predicted, rel=0.10))
    out.extra_csv["ginibre-histogram"] = report.histogram_csv(dens.histogram)
    return out


CRITERIA: dict[str, Callable[[int, Scale], Outcome]] = {
    "pfaffian-algebra": check_pfaffian_algebra,
    "j-matrix": check_j_matrix,
    "asymptotic-limit": check_asymptotic_limit,
    "two-particle-extinction": check_two_particle_extinction,
    "four-particle-moments": check_four_particles,
    "entrance-law": check_entrance_law,
    "thinning-relation": check_thinning,
    "duality": check_duality,
    "ginibre": check_ginibre,
}


def suite_echo(suite: str, seed: int, threads: int) -> str:
    s = SUITES[suite]
    cfg = {"verify.suite": suite, "verify.seed": str(seed), "verify.threads": str(threads),
           "verify.extinction_reps": str(s.extinction_reps),
           "verify.entrance_reps": str(s.entrance_reps),
           "verify.thinning_reps": str(s.thinning_reps),
           "verify.duality_reps": str(s.duality_reps),
           "verify.ginibre_reps": str(s.ginibre_reps)}
    from .config import echo
    return echo(cfg)


def run_suite(suite: str = "fast", seed: int = 0, out_dir: Optional[str | Path] = None,
              only: Optional[list[str]] = None, log: Callable[[str], None] = print,
              threads: int = 0) -> tuple[list[Outcome], report.RunManifest]:
    """Run the battery, writing ``<name>.csv`` per experiment and ``manifest.json``."""
    import os

    scale = SUITES[suite]
    if threads:
        os.environ[sim.THREADS_ENV] = str(threads)
    manifest = report.RunManifest(__version__, seed, suite_echo(suite, seed, threads))
    outdir = Path(out_dir) if out_dir else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    outcomes: list[Outcome] = []
    try:
        for k, (name, fn) in enumerate(CRITERIA.items()):
            if only and name not in only:
                continue
            oc = fn(sim.derive_seed(seed, 100 + k), scale)
            outcomes.append(oc)
            manifest.add_results(oc.results, experiment=name)
            manifest.checks.extend({"experiment": name, "name": c.name, "value": c.value,
                                    "expected": c.expected, "tolerance": c.tolerance,
                                    "passed": c.passed} for c in oc.checks)
            log(f"{'PASS' if oc.passed else 'FAIL'} {name}")
            for f in oc.failures:
                log(f"  {f}")
            if outdir:
                (outdir / f"{name}.csv").write_text(oc.csv())
                for extra, text in oc.extra_csv.items():
                    (outdir / f"{extra}.csv").write_text(text)
        manifest.passed = all(o.passed for o in outcomes)
    except Exception as exc:
        manifest.error = f"{type(exc).__name__}: {exc}"
        manifest.passed = False
        raise
    finally:
        manifest.wall_time_s = time.perf_counter() - start
        if outdir:
            manifest.write(outdir / "manifest.json")
    return outcomes, manifest
