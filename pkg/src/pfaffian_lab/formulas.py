"""Closed-form Pfaffian evaluators for coalescing and annihilating Brownian systems.

Particles are standard Brownian motions (variance ``t`` at time ``t``), so the
probability that two annihilating particles started a distance ``d`` apart
have met by time ``t`` is ``F(d / sqrt(t))`` with ``F(x) = erfc(x / 2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

import mpmath
import numpy as np
from scipy import integrate

from .errors import (
    DegeneratePoints,
    DimensionTooLarge,
    NonpositiveTime,
    QuadratureNonConvergence,
    UnorderedArguments,
    UnorderedPoints,
    UnsupportedPatternModelCombination,
)
from .pfaffian import RATIONAL, SkewMatrix, expand_entries, pf_expand, pfaffian

SQRT_PI = math.sqrt(math.pi)
INV_SQRT_PI = 1.0 / SQRT_PI
INV_SQRT_4PI = 1.0 / math.sqrt(4.0 * math.pi)

QUAD_TOL = 1e-8
TRUNCATE_SD = 8.0


class Model(str, enum.Enum):
    COALESCING = "coalescing"
    ANNIHILATING = "annihilating"


def as_model(model) -> Model:
    return model if isinstance(model, Model) else Model(str(model).lower())


# --- the erfc family -------------------------------------------------------

def erf_F(x):
    """``F(x) = pi**-0.5 * int_x^inf exp(-z**2/4) dz = erfc(x/2)``."""
    if np.ndim(x):
        from scipy.special import erfc
        return erfc(np.asarray(x, dtype=float) / 2.0)
    return math.erfc(x / 2.0)


def erf_dF(x):
    return -INV_SQRT_PI * np.exp(-np.square(x) / 4.0)


def phi(z):
    """``z * exp(-z**2/4)``, odd and analytic."""
    return z * np.exp(-np.square(z) / 4.0)


def erf_d2F(x):
    return INV_SQRT_4PI * phi(x)


class FValues(NamedTuple):
    F: float
    dF: float
    d2F: float
    phi: float


def f_family(x: float) -> FValues:
    """Return ``(F, F', F'', phi)`` at ``x``."""
    x = float(x)
    return FValues(erf_F(x), float(erf_dF(x)), float(erf_d2F(x)), float(phi(x)))


# --- shared validation -----------------------------------------------------

def _check_time(t: float) -> float:
    t = float(t)
    if not t > 0:
        raise NonpositiveTime(f"time must be positive, got {t}")
    return t


def ordered_points(points: Sequence[float], *, exc=UnorderedPoints) -> np.ndarray:
    x = np.asarray(points, dtype=float).reshape(-1)
    if x.size == 0:
        raise exc("need at least one point")
    if np.any(np.diff(x) <= 0):
        raise exc(f"points must be strictly increasing: {x.tolist()}")
    return x


def _vandermonde(x: np.ndarray) -> float:
    i, j = np.triu_indices(len(x), 1)
    return float(np.prod(x[j] - x[i]))


# --- kernel and densities --------------------------------------------------

class KernelBlock(NamedTuple):
    k11: float
    k12: float
    k21: float
    k22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.k11, self.k12], [self.k21, self.k22]])


def _unit_kernel(d: float) -> KernelBlock:
    """The unscaled 2x2 kernel at separation ``d = y - x``."""
    s = float(np.sign(d))
    return KernelBlock(-erf_d2F(d), -erf_dF(d), erf_dF(d), s * erf_F(abs(d)))


def kernel_k(x: float, y: float, t: float, model=Model.COALESCING) -> KernelBlock:
    """Time-``t`` kernel ``t**-0.5 * K(x/sqrt t, y/sqrt t)``, halved for annihilating."""
    t = _check_time(t)
    st = math.sqrt(t)
    scale = 1.0 / st
    if as_model(model) is Model.ANNIHILATING:
        scale *= 0.5
    k = _unit_kernel((y - x) / st)
    return KernelBlock(*(float(scale * v) for v in k))


def kernel_matrix(points: Sequence[float], t: float, model=Model.COALESCING) -> SkewMatrix:
    x = ordered_points(points)
    n = len(x)
    m = np.empty((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            m[2 * i:2 * i + 2, 2 * j:2 * j + 2] = kernel_k(x[i], x[j], t, model).as_array()
    return SkewMatrix(m)


def rho(points: Sequence[float], t: float, model=Model.COALESCING) -> float:
    """n-point density of the particle positions at time ``t`` under the maximal entrance law."""
    _check_time(t)
    return float(pfaffian(kernel_matrix(points, t, model)))


# --- interval patterns -----------------------------------------------------

class Pattern(str, enum.Enum):
    ALTERNATE_EMPTY = "alternate-empty"
    ALL_OCCUPIED = "all-occupied"
    ALL_ODD = "all-odd"
    ALTERNATE_OCCUPIED = "alternate-occupied"
    EMPTY_OCCUPIED_MIXED = "empty-occupied-mixed"


_PATTERN_MODELS = {
    Pattern.ALTERNATE_EMPTY: {Model.COALESCING, Model.ANNIHILATING},
    Pattern.ALL_OCCUPIED: {Model.COALESCING},
    Pattern.ALL_ODD: {Model.ANNIHILATING},
    Pattern.ALTERNATE_OCCUPIED: {Model.COALESCING},
    Pattern.EMPTY_OCCUPIED_MIXED: {Model.COALESCING},
}


@dataclass(frozen=True)
class PatternSpec:
    """Interval endpoints ``x_1 < ... < x_2n`` plus which event on ``I_k = (x_k, x_k+1)``.

    * alternate-empty: ``I_1, I_3, ...`` empty (for annihilating: the parity
      expectation ``E[(-1)**N(I_1 u I_3 u ...)]``, which has the same value)
    * all-occupied: every ``I_k`` occupied
    * all-odd: every ``I_k`` holds an odd number of particles
    * alternate-occupied: ``I_1, I_3, ...`` occupied
    * empty-occupied-mixed: odd ``I_k`` empty and even ``I_k`` occupied
    """

    endpoints: tuple
    pattern: Pattern
    t: float
    model: Model = Model.COALESCING

    def __post_init__(self):
        x = ordered_points(self.endpoints)
        if len(x) % 2:
            raise ValueError("a pattern needs an even number of endpoints")
        object.__setattr__(self, "endpoints", tuple(float(v) for v in x))
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        object.__setattr__(self, "model", as_model(self.model))
        _check_time(self.t)
        if self.model not in _PATTERN_MODELS[self.pattern]:
            raise UnsupportedPatternModelCombination(
                f"{self.pattern.value} is not available for {self.model.value} systems")


def f_matrix(endpoints: Sequence[float], t: float) -> SkewMatrix:
    """Two-point empty-interval matrix ``F_ij = F((x_j - x_i)/sqrt t)``."""
    x = ordered_points(endpoints)
    st = math.sqrt(_check_time(t))
    return SkewMatrix.from_upper(len(x), func=lambda i, j: erf_F((x[j] - x[i]) / st), field="float")


def o_matrix(dim: int) -> SkewMatrix:
    """``[[0, 1], [-1, 0]]`` blocks down the diagonal."""
    return SkewMatrix.from_upper(dim, func=lambda i, j: 1 if (i % 2 == 0 and j == i + 1) else 0)


def o_hat_matrix(dim: int) -> SkewMatrix:
    """Unit blocks on rows/cols ``(2,3), (4,5), ..., (2n-2, 2n-1)`` (1-based); zero for dim 2."""
    return SkewMatrix.from_upper(dim, func=lambda i, j: 1 if (i % 2 == 1 and j == i + 1) else 0)


def pattern_probability(spec: PatternSpec) -> float:
    fm = f_matrix(spec.endpoints, spec.t)
    dim = fm.dim
    p = spec.pattern
    if p is Pattern.ALTERNATE_EMPTY:
        val = pfaffian(fm)
    elif p is Pattern.ALL_OCCUPIED:
        val = pfaffian(SkewMatrix.ones_upper(dim) - fm)
    elif p is Pattern.ALL_ODD:
        val = 2.0 ** (1 - dim) * pfaffian(SkewMatrix.ones_upper(dim) - fm)
    elif p is Pattern.ALTERNATE_OCCUPIED:
        val = pfaffian(o_matrix(dim) - fm)
    else:
        val = pfaffian(fm - o_hat_matrix(dim))
    return float(val)


# --- product moments -------------------------------------------------------

class TestFunction:
    """A bounded test function ``g`` plus the points where it may jump.

    Breakpoints are passed to the quadrature so discontinuous ``g`` still
    converges.
    """

    __test__ = False  # not a pytest class

    def __init__(self, func: Callable[[float], float], breakpoints: Sequence[float] = (),
                 name: str = "custom", constant: float | None = None):
        self.func = func
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        self.name = name
        self.constant = constant

    def __call__(self, x):
        return self.func(x)

    def __repr__(self) -> str:
        return f"TestFunction({self.name})"

    @classmethod
    def zero(cls) -> "TestFunction":
        return cls(lambda x: 0.0, name="zero", constant=0.0)

    @classmethod
    def one(cls) -> "TestFunction":
        return cls(lambda x: 1.0, name="one", constant=1.0)

    @classmethod
    def gaussian(cls, width: float = 1.0, center: float = 0.0) -> "TestFunction":
        """``exp(-((x - center)/width)**2)``."""
        return cls(lambda x: math.exp(-((x - center) / width) ** 2),
                   name=f"gaussian({width:g},{center:g})")

    @classmethod
    def indicator(cls, a: float, b: float) -> "TestFunction":
        return cls(lambda x: 1.0 if a < x < b else 0.0, breakpoints=(a, b),
                   name=f"indicator({a:g},{b:g})")

    @classmethod
    def parity(cls, endpoints: Sequence[float]) -> "TestFunction":
        """``(-1)**#{i: x <= a_i}``."""
        a = tuple(float(v) for v in endpoints)
        return cls(lambda x: -1.0 if sum(1 for v in a if x <= v) % 2 else 1.0,
                   breakpoints=a, name=f"parity({','.join(f'{v:g}' for v in a)})")


def as_test_function(g) -> TestFunction:
    if isinstance(g, TestFunction):
        return g
    if g is None or g == "zero":
        return TestFunction.zero()
    if g == "one":
        return TestFunction.one()
    if g == "gaussian":
        return TestFunction.gaussian()
    if callable(g):
        return TestFunction(g)
    raise ValueError(f"unknown test function {g!r}")


def _gauss(x, mean, sd):
    return math.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


def _quad(f, lo, hi, points):
    pts = [p for p in points if lo < p < hi]
    val, err = integrate.quad(f, lo, hi, points=pts or None, epsabs=QUAD_TOL / 10,
                              epsrel=1e-10, limit=400)
    if not err <= QUAD_TOL:
        raise QuadratureNonConvergence(f"quadrature error estimate {err:.3g} above {QUAD_TOL}")
    return val


def heat_semigroup(g, x: float, t: float) -> float:
    """``E[g(x + B_t)]``, the single-particle product moment."""
    g = as_test_function(g)
    t = _check_time(t)
    if g.constant is not None:
        return g.constant
    sd = math.sqrt(t)
    lo, hi = x - TRUNCATE_SD * sd, x + TRUNCATE_SD * sd
    return _quad(lambda y: _gauss(y, x, sd) * g(y), lo, hi, g.breakpoints)


def pair_moment(x1: float, x2: float, t: float, g=None) -> float:
    """``E[prod g(X_t)]`` for two annihilating particles started at ``x1 < x2``.

    Extinction contributes ``F((x2 - x1)/sqrt t)``; survival is integrated
    against the absorbed (Karlin-McGregor) transition density
    ``p(x1,y1) p(x2,y2) - p(x1,y2) p(x2,y1)`` over ``y1 < y2``.
    """
    t = _check_time(t)
    if not x1 < x2:
        raise UnorderedArguments(f"need x1 < x2, got {x1}, {x2}")
    g = as_test_function(g)
    extinct = erf_F((x2 - x1) / math.sqrt(t))
    if g.constant is not None:
        return extinct + g.constant ** 2 * (1.0 - extinct)
    sd = math.sqrt(t)
    lo = x1 - TRUNCATE_SD * sd
    hi = x2 + TRUNCATE_SD * sd
    pts = g.breakpoints

    def inner(y2):
        p12, p22 = _gauss(y2, x1, sd), _gauss(y2, x2, sd)
        if p12 == 0.0 and p22 == 0.0:
            return 0.0
        g2 = g(y2)
        if g2 == 0.0:
            return 0.0

        def f(y1):
            return (_gauss(y1, x1, sd) * p22 - _gauss(y1, x2, sd) * p12) * g(y1)

        return g2 * _quad(f, lo, y2, pts)

    return extinct + _quad(inner, lo, hi, pts)


def pair_moment_matrix(points: Sequence[float], t: float, g=None) -> SkewMatrix:
    """Skew matrix of pair moments; an odd point count gets a leading row of
    one-particle moments."""
    x = ordered_points(points)
    g = as_test_function(g)
    n = len(x)
    if n % 2 == 0:
        return SkewMatrix.from_upper(n, func=lambda i, j: pair_moment(x[i], x[j], t, g), field="float")
    m1 = [heat_semigroup(g, v, t) for v in x]

    def entry(i, j):
        if i == 0:
            return m1[j - 1]
        return pair_moment(x[i - 1], x[j - 1], t, g)

    return SkewMatrix.from_upper(n + 1, func=entry, field="float")


def product_moment(points: Sequence[float], t: float, g=None) -> float:
    """Product moment ``E[prod_i g(X^i_t)]`` for annihilating particles from ``points``.

    An empty product counts as 1.
    """
    _check_time(t)
    x = ordered_points(points)
    if len(x) > 12:
        raise DimensionTooLarge("product moments are limited to 12 points")
    if len(x) == 1:
        return heat_semigroup(g, x[0], t)
    return float(pfaffian(pair_moment_matrix(x, t, g)))


# --- small-separation asymptotics ------------------------------------------

def phi_derivative_at_zero(order: int) -> Fraction:
    """Exact ``phi^(order)(0)`` for ``phi(z) = z exp(-z**2/4)``."""
    if order % 2 == 0:
        return Fraction(0)
    k = (order - 1) // 2
    return Fraction((-1) ** k * math.factorial(2 * k + 1), 4 ** k * math.factorial(k))


@dataclass(frozen=True)
class JMatrix:
    matrix: SkewMatrix
    phi_derivatives: tuple

    @property
    def dim(self) -> int:
        return self.matrix.dim

    @property
    def pfaffian(self) -> Fraction:
        return pf_expand(self.matrix)


def j_matrix(n: int) -> JMatrix:
    """Constant ``2n x 2n`` matrix with entries
    ``(-1)**(i-1) phi^(i+j-2)(0) / ((i-1)! (j-1)!)`` (1-based ``i < j``).

    The sign follows the row index, which is what the Taylor rearrangement of
    ``phi(y_j - y_i)`` produces and makes ``Pf(J) > 0``.
    """
    if not 1 <= n <= 8:
        raise DimensionTooLarge("j_matrix supports 1 <= n <= 8")
    dim = 2 * n
    derivs = tuple(phi_derivative_at_zero(k) for k in range(2 * dim - 1))

    def entry(i, j):  # 0-based
        sign = -1 if i % 2 else 1
        return sign * derivs[i + j] / (math.factorial(i) * math.factorial(j))

    return JMatrix(SkewMatrix.from_upper(dim, func=entry, field=RATIONAL),
                   tuple(derivs[1::2]))


class SeparationCheck(NamedTuple):
    ratio: float
    limit: float
    gap: float


def phi_matrix(y: np.ndarray) -> SkewMatrix:
    return SkewMatrix.from_upper(len(y), func=lambda i, j: float(phi(y[j] - y[i])), field="float")


def small_separation_check(x: Sequence[float], eps: float) -> SeparationCheck:
    """Compare ``Pf(phi(y_j - y_i)) / prod_{i<j}(y_j - y_i)`` at ``y = eps * x``
    with its small-``eps`` limit ``Pf(J)``.

    The Pfaffian is a near-total cancellation of terms of size ``|y|**n``, so it
    is evaluated in extended precision sized to the digits lost.
    """
    x = ordered_points(x, exc=DegeneratePoints)
    if len(x) % 2 or len(x) > 12:
        raise ValueError("need an even number of points, at most 12")
    if not eps > 0:
        raise ValueError("eps must be positive")
    y = eps * x
    vd = _vandermonde(y)
    if vd == 0.0 or np.any(np.diff(y) <= 0):
        raise DegeneratePoints("points coincide after scaling")
    n = len(y) // 2
    lost = n * math.log10(max(y[-1] - y[0], 1e-300)) - math.log10(abs(vd))
    with mpmath.workdps(25 + max(0, math.ceil(lost))):
        ym = [mpmath.mpf(float(v)) for v in y]
        m = [[(ym[j] - ym[i]) * mpmath.exp(-(ym[j] - ym[i]) ** 2 / 4) for j in range(len(y))]
             for i in range(len(y))]
        pf = expand_entries(m, 0, mpmath.mpf(1), mpmath.mpf(0))
        vdm = mpmath.mpf(1)
        for i in range(len(y)):
            for j in range(i + 1, len(y)):
                vdm *= ym[j] - ym[i]
        ratio = float(pf / vdm)
    limit = float(j_matrix(n).pfaffian)
    return SeparationCheck(ratio, limit, abs(ratio - limit))


def rho_tilde(points: Sequence[float], t: float) -> float:
    """Density of particles at all ``x_i`` with ``(x_1,x_2), (x_3,x_4), ...`` empty."""
    t = _check_time(t)
    x = ordered_points(points)
    if len(x) % 2:
        raise ValueError("rho_tilde needs an even number of points")
    n = len(x) // 2
    return (4.0 * math.pi * t * t) ** (-n / 2) * float(pfaffian(phi_matrix(x / math.sqrt(t))))


def asymptotic_exponent(n_pairs: int) -> float:
    """Power of ``t`` in the large-time decay of the ``2n``-point density."""
    n = n_pairs
    return n + n * (2 * n - 1) / 2


def asymptotic_constant(n_pairs: int, model=Model.COALESCING) -> float:
    base = 4.0 if as_model(model) is Model.COALESCING else 64.0
    return (base * math.pi) ** (-n_pairs / 2) * float(j_matrix(n_pairs).pfaffian)


def asymptotic_density(points: Sequence[float], t: float, model=Model.COALESCING) -> float:
    """Leading large-``t`` term of the ``2n``-point density."""
    t = _check_time(t)
    x = ordered_points(points)
    if len(x) % 2:
        raise ValueError("asymptotic density needs an even number of points")
    n = len(x) // 2
    return t ** -asymptotic_exponent(n) * abs(_vandermonde(x)) * asymptotic_constant(n, model)


def normalized_density(points: Sequence[float], t: float, model=Model.COALESCING) -> float:
    """``t**exponent * rho(x, t) / prod|x_i - x_j|``; tends to the asymptotic constant."""
    x = ordered_points(points)
    n = len(x) // 2
    return t ** asymptotic_exponent(n) * rho(x, t, model) / abs(_vandermonde(x))


