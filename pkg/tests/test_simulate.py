import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfcx

from pfaffian_lab import rng as rngmod
from pfaffian_lab import simulate as sim
from pfaffian_lab.errors import (
    EmptyWindow,
    InsufficientBuffer,
    InvalidProbability,
    NonpositiveStep,
    NoReplicates,
    OddCount,
)
from pfaffian_lab.estimators import Accumulator, EstimatorResult, two_sample_z
from pfaffian_lab.formulas import Model, TestFunction, erf_F, pair_moment

F_AT_1 = 0.479500122186953462317


def cfg(**kw):
    base = dict(dt=1e-3, t_end=1.0, replicates=2000, master_seed=12345)
    base.update(kw)
    return sim.RunConfig(**base)


def within(res: EstimatorResult, k: float = 3.0) -> bool:
    return abs(res.estimate - res.predicted) <= k * res.stderr


# --- initial conditions --------------------------------------------------------

def test_explicit_list():
    s = sim.init(sim.ExplicitList((3, 0, 1, 2)), "annihilating", rngmod.stream(0, 0))
    assert s.positions.tolist() == [0, 1, 2, 3]
    assert s.time == 0.0 and s.extinct_at is None


def test_lattice():
    s = sim.init(sim.Lattice(0.5, (0, 2)), "coalescing", rngmod.stream(0, 0))
    np.testing.assert_allclose(s.positions, [0, 0.5, 1.0, 1.5, 2.0])


def test_poisson_mean_count():
    g = rngmod.stream(7, 0)
    ic = sim.Poisson(10.0, (0.0, 10.0))
    counts = [ic.sample(g).size for _ in range(10_000)]
    assert abs(np.mean(counts) - 100) <= 3 * math.sqrt(100 / 10_000)


@pytest.mark.parametrize("window", [(1.0, 1.0), (2.0, 1.0)])
def test_empty_window(window):
    with pytest.raises(EmptyWindow):
        sim.Poisson(1.0, window)
    with pytest.raises(EmptyWindow):
        sim.Lattice(0.1, window)


def test_positions_must_increase():
    with pytest.raises(ValueError):
        sim.ParticleSystem(Model.COALESCING, [1.0, 0.0])


# --- stepping -------------------------------------------------------------------

def test_nonpositive_step():
    s = sim.init(sim.ExplicitList((0.0,)), "coalescing", rngmod.stream(0, 0))
    with pytest.raises(NonpositiveStep):
        sim.step(s, 0.0, rngmod.stream(0, 1))


def test_single_particle_variance():
    runs = sim.run(sim.ExplicitList((0.0,)), Model.COALESCING, cfg(replicates=4000))
    x = np.array([s.positions[0] for s in runs])
    # variance of the sample variance of N(0,1) draws is 2/(n-1)
    assert abs(x.var(ddof=1) - 1.0) <= 3 * math.sqrt(2 / (x.size - 1))
    assert abs(x.mean()) <= 3 / math.sqrt(x.size)


@pytest.mark.parametrize("model", ["coalescing", "annihilating"])
def test_invariants_every_step(model):
    g = rngmod.stream(3, 0)
    s = sim.init(sim.Poisson(5.0, (-5, 5)), model, g)
    if model == "annihilating" and s.count % 2:
        s = sim.ParticleSystem(model, s.positions[1:])
    parity = s.count % 2
    for _ in range(400):
        nxt = sim.step(s, 1e-3, g)
        assert np.all(np.diff(nxt.positions) > 0)
        assert nxt.count <= s.count
        if model == "annihilating":
            assert nxt.count % 2 == parity
        s = nxt
    assert s.time == pytest.approx(0.4)


def test_extinct_at_recorded():
    runs = list(sim.run(sim.ExplicitList((0.0, 0.05)), Model.ANNIHILATING, cfg(replicates=50)))
    for s in runs:
        if s.count == 0:
            assert 0 < s.extinct_at <= 1.0
        else:
            assert s.extinct_at is None


def test_two_particle_annihilation_frequency():
    runs = sim.run(sim.ExplicitList((0.0, 1.0)), Model.ANNIHILATING, cfg(replicates=20_000))
    res = sim.estimate(sim.ExtinctBy(1.0), runs, erf_F(1.0))
    assert within(res)


def test_two_particle_coalescence_frequency():
    runs = list(sim.run(sim.ExplicitList((0.0, 1.0)), Model.COALESCING, cfg(replicates=20_000)))
    assert {s.count for s in runs} <= {1, 2}
    res = sim.estimate(lambda s: float(s.count == 1), runs, F_AT_1)
    assert within(res)


def test_pair_moment_by_simulation():
    g = TestFunction.gaussian()
    runs = sim.run(sim.ExplicitList((0.0, 1.0)), Model.ANNIHILATING, cfg(replicates=10_000))
    res = sim.estimate(sim.ProductG(g), runs, pair_moment(0.0, 1.0, 1.0, g))
    assert within(res)


def test_dt_robustness():
    a = sim.estimate(sim.ExtinctBy(1.0), sim.run(sim.ExplicitList((0.0, 1.0)), Model.ANNIHILATING,
                                                 cfg(replicates=10_000)))
    b = sim.estimate(sim.ExtinctBy(1.0), sim.run(sim.ExplicitList((0.0, 1.0)), Model.ANNIHILATING,
                                                 cfg(replicates=10_000, dt=5e-4, master_seed=999)))
    assert abs(a.estimate - b.estimate) < 2 * math.hypot(a.stderr, b.stderr)


# --- determinism ---------------------------------------------------------------

def test_same_seed_same_positions():
    c = cfg(replicates=20)
    ic = sim.Poisson(3.0, (-4, 4))
    a = [s.positions.tobytes() for s in sim.run(ic, "coalescing", c)]
    b = [s.positions.tobytes() for s in sim.run(ic, "coalescing", c)]
    assert a == b


def test_thread_count_does_not_matter():
    ic = sim.Poisson(3.0, (-4, 4))
    a = [s.positions.tobytes() for s in sim.run(ic, "annihilating", cfg(replicates=300, threads=1))]
    b = [s.positions.tobytes() for s in sim.run(ic, "annihilating", cfg(replicates=300, threads=3))]
    assert a == b


def test_annihilating_parity_conserved_in_runs():
    runs = sim.run(sim.ExplicitList((0, 0.2, 0.5, 1.0, 1.1, 2.0)), "annihilating", cfg(replicates=300))
    assert all(s.count % 2 == 0 for s in runs)


def test_run_config_validation():
    with pytest.raises(NonpositiveStep):
        cfg(dt=0.0)
    with pytest.raises(ValueError):
        cfg(dt=2.0, t_end=1.0)
    with pytest.raises(ValueError):
        cfg(buffer=-1.0)


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv(sim.THREADS_ENV, "4")
    assert cfg().worker_count == 4
    assert cfg(threads=2).worker_count == 2


# --- thinning and spans --------------------------------------------------------------

def test_thin_edge_cases():
    s = sim.ParticleSystem(Model.COALESCING, np.arange(10.0))
    assert sim.thin(s, 1.0) is s
    assert sim.thin(s, 0.0).count == 0
    with pytest.raises(InvalidProbability):
        sim.thin(s, 1.5)


def test_thin_binomial_parity():
    s = sim.ParticleSystem(Model.COALESCING, np.arange(10.0))
    acc = Accumulator()
    for r in range(10_000):
        acc.push((-1) ** sim.thin(s, 0.5, rngmod.stream(1, r)).count)
    assert abs(acc.mean) <= 3 * acc.stderr


def test_thin_preserves_order():
    s = sim.ParticleSystem(Model.COALESCING, np.arange(50.0))
    t = sim.thin(s, 0.5, rngmod.stream(2, 0))
    assert np.all(np.diff(t.positions) > 0)
    assert set(t.positions) <= set(s.positions)


@pytest.mark.parametrize("x,expected", [(0.5, True), (1.5, False), (2.5, True), (0.0, False),
                                        (-1.0, False), (3.5, False)])
def test_in_span(x, expected):
    s = sim.ParticleSystem(Model.ANNIHILATING, [0.0, 1.0, 2.0, 3.0])
    assert sim.in_span(s, x) is expected


def test_in_span_empty_and_odd():
    assert not sim.in_span(sim.ParticleSystem(Model.ANNIHILATING, []), 0.0)
    with pytest.raises(OddCount):
        sim.in_span(sim.ParticleSystem(Model.ANNIHILATING, [0.0]), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=0, max_size=12, unique=True), st.floats(-11, 11))
def test_in_span_matches_brute_force(xs, x):
    xs = sorted(xs)
    if len(xs) % 2:
        xs = xs[:-1]
    s = sim.ParticleSystem(Model.ANNIHILATING, xs)
    brute = any(xs[2 * k] < x < xs[2 * k + 1] for k in range(len(xs) // 2))
    assert sim.in_span(s, x) == brute


# --- events and estimators ------------------------------------------------------

def test_event_functionals():
    s = sim.ParticleSystem(Model.COALESCING, [0.5, 2.5, 2.7])
    assert sim.EmptyIntervals((1, 2))(s) == 1.0
    assert sim.EmptyIntervals((0, 1, 2, 3))(s) == 0.0
    assert sim.Parity((2, 3))(s) == 1.0
    assert sim.Parity((0, 1, 2, 3))(s) == -1.0
    assert sim.Count(0, 3)(s) == 3.0
    assert sim.IntervalPattern((0, 1, 2, 3), "all-occupied")(s) == 0.0
    assert sim.IntervalPattern((0, 1, 2, 3), "alternate-occupied")(s) == 1.0
    assert sim.IntervalPattern((1, 2, 2.6, 3), "empty-occupied-mixed")(s) == 0.0


def test_product_over_empty_system_is_one():
    s = sim.ParticleSystem(Model.ANNIHILATING, [])
    assert sim.ProductG(TestFunction.zero())(s) == 1.0


def test_no_replicates():
    with pytest.raises(NoReplicates):
        sim.estimate(sim.ExtinctBy(1.0), [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60), st.integers(1, 59))
def test_accumulator_merge_matches_single_pass(xs, cut):
    cut = min(cut, len(xs) - 1)
    whole = Accumulator().extend(xs)
    merged = Accumulator().extend(xs[:cut]).merge(Accumulator().extend(xs[cut:]))
    assert merged.count == whole.count
    assert merged.mean == pytest.approx(whole.mean, rel=1e-9, abs=1e-9)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-8, abs=1e-8)
    assert whole.variance == pytest.approx(np.var(xs, ddof=1), rel=1e-8, abs=1e-8)


def test_estimator_z_score():
    r = EstimatorResult.build("x", 1.2, 0.1, 100, 1.0)
    assert r.z_score == pytest.approx(2.0)
    assert r.within(3) and not r.within(1.5)
    assert EstimatorResult.build("x", 1.0, 0.0, 1, None).z_score is None
    d = two_sample_z(r, EstimatorResult.build("y", 1.0, 0.1, 100), "d")
    assert d.predicted == 0.0 and d.stderr == pytest.approx(math.sqrt(0.02))


def test_streams_independent_of_order():
    a = rngmod.stream(5, 3, rngmod.MOTION).standard_normal(4)
    rngmod.stream(5, 2, rngmod.MOTION).standard_normal(100)
    b = rngmod.stream(5, 3, rngmod.MOTION).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    c = rngmod.stream(5, 3, rngmod.THINNING).standard_normal(4)
    assert not np.array_equal(a, c)


# --- duality ------------------------------------------------------------------------

def test_coalescing_duality():
    d = sim.duality_check((0.5,), (0.0, 1.0), 1.0, cfg(replicates=4000), "coalescing")
    assert abs(d.difference.z_score) <= 3
    # a single Brownian particle from 0.5 avoids (0, 1) with probability 1 - P(|N| < 0.5)
    assert abs(d.left.estimate - (1 - math.erf(0.5 / math.sqrt(2)))) <= 3 * d.left.stderr


def test_annihilating_duality():
    d = sim.duality_check((0.3, 0.7), (0.0, 1.0), 0.5, cfg(replicates=4000, t_end=0.5), "annihilating")
    assert abs(d.difference.z_score) <= 3


def test_duality_short_time_limit():
    c = cfg(replicates=500, dt=1e-4, t_end=1e-3)
    d = sim.duality_check((0.5,), (0.0, 1.0), 1e-3, c, "coalescing")
    assert d.left.estimate == 0.0 and d.right.estimate == 0.0


def test_unknown_duality_kind():
    with pytest.raises(ValueError):
        sim.duality_check((0.5,), (0.0, 1.0), 1.0, cfg(replicates=2), "other")


# --- entrance law ------------------------------------------------------------------

def test_entrance_buffer_checks():
    with pytest.raises(InsufficientBuffer):
        sim.entrance_initial_condition(cfg(buffer=2.0), "coalescing", t=1.0)
    with pytest.warns(UserWarning):
        sim.entrance_initial_condition(cfg(buffer=4.0), "coalescing", t=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ic = sim.entrance_initial_condition(cfg(buffer=6.0), "annihilating", t=1.0)
    assert isinstance(ic, sim.Thinned)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_finite_intensity_density_closed_form(lam):
    # lambda * exp(lambda^2 t) * erfc(lambda sqrt t)
    t = 1.3
    assert sim.finite_intensity_density(lam, t) == pytest.approx(lam * erfcx(lam * math.sqrt(t)), rel=1e-8)


def test_finite_intensity_density_limit():
    assert sim.finite_intensity_density(1e4, 1.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-6)


def test_entrance_density_small_run():
    c = cfg(replicates=600, observation_window=(-10, 10))
    res = sim.entrance_density_experiment(c, 1.0, "coalescing")
    assert abs(res.estimate - sim.finite_intensity_density(10.0, 1.0)) <= 3 * res.stderr
    res = sim.entrance_density_experiment(c, 1.0, "annihilating")
    assert within(res, 3.5)


def test_entrance_pair_correlation_small_run():
    c = cfg(replicates=300, observation_window=(-10, 10))
    rows = sim.entrance_pair_correlation(c, 1.0, "coalescing", [0.0, 0.5, 1.0, 2.0, 4.0])
    for r in rows:
        assert abs(r.empirical - r.predicted) <= 4 * r.stderr + 0.01 * r.predicted


def test_pair_density_normalizer_area():
    # total area of {lo <= x < y <= hi} is L^2 / 2
    edges = np.linspace(0, 30, 31)
    assert sim.pair_density_normalizer(-5, 5, edges).sum() == pytest.approx(50.0)


def test_thinning_relation_small():
    c = cfg(replicates=1500, observation_window=(-3, 3))
    assert sim.thinning_experiment(c).p_value > 0.01


def test_scaling_relation_small():
    c = cfg(replicates=400, observation_window=(-3, 3))
    assert sim.scaling_experiment(c).p_value > 0.01


def test_two_sample_chi2_detects_difference():
    rng = np.random.default_rng(0)
    a = [tuple(v) for v in rng.poisson(1.0, (2000, 2))]
    b = [tuple(v) for v in rng.poisson(1.3, (2000, 2))]
    assert sim.two_sample_chi2(a, b, "x").p_value < 1e-6
