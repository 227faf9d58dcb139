"""Skew-symmetric matrices and three independent Pfaffian algorithms.

Scalars are either float64 or exact rationals (:class:`fractions.Fraction`).
All public indices are 0-based.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    IndexOutOfRange,
    NotSkewSymmetric,
    OddDimension,
)

Scalar = Union[float, Fraction]

FLOAT = "float"
RATIONAL = "rational"

ENUMERATE_MAX_DIM = 12
SUM_EXPAND_MAX_DIM = 10
ASYMMETRY_TOL = 1e-9


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool)


class SkewMatrix:
    """Dense antisymmetric matrix over float64 or the rationals.

    Float input is symmetrized as ``(A - A.T) / 2`` after checking that the
    asymmetry is below ``1e-9 * max|entry|``.  Rational input must be exactly
    antisymmetric.  When ``field`` is omitted it is inferred: integer and
    Fraction entries give a rational matrix, anything else a float one.
    """

    __slots__ = ("_a", "field")

    def __init__(self, entries, field: str | None = None):
        if isinstance(entries, SkewMatrix):
            field = field or entries.field
            entries = entries._a
        if isinstance(entries, np.ndarray) and entries.dtype != object:
            raw = entries
            inferred = RATIONAL if np.issubdtype(entries.dtype, np.integer) else FLOAT
        else:
            raw = np.array(entries, dtype=object)
            if raw.size == 0:
                raw = raw.reshape(0, 0)
            inferred = RATIONAL if all(_is_exact(v) for v in raw.flat) else FLOAT
        field = field or inferred
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {raw.shape}")

        if field == FLOAT:
            a = np.asarray(raw, dtype=float)
            scale = float(np.max(np.abs(a))) if a.size else 0.0
            asym = float(np.max(np.abs(a + a.T))) if a.size else 0.0
            if asym > ASYMMETRY_TOL * scale:
                raise NotSkewSymmetric(f"asymmetry {asym:.3g} exceeds tolerance")
            a = (a - a.T) / 2.0
        elif field == RATIONAL:
            a = np.empty(raw.shape, dtype=object)
            for idx, v in np.ndenumerate(raw):
                a[idx] = v if isinstance(v, Fraction) else Fraction(v)
            n = a.shape[0]
            for i in range(n):
                if a[i, i] != 0:
                    raise NotSkewSymmetric(f"nonzero diagonal entry at {i}")
                for j in range(i + 1, n):
                    if a[i, j] != -a[j, i]:
                        raise NotSkewSymmetric(f"entries ({i},{j}) and ({j},{i}) are not opposite")
        else:
            raise ValueError(f"unknown scalar field {field!r}")
        a.setflags(write=False)
        self._a = a
        self.field = field

    @classmethod
    def from_upper(cls, dim: int, upper: Iterable | None = None, *, func=None,
                   field: str | None = None) -> "SkewMatrix":
        """Build from the strictly-upper entries in row-major order, or from ``func(i, j)``."""
        a = np.zeros((dim, dim), dtype=object)
        a[...] = 0
        if func is not None:
            values = (func(i, j) for i in range(dim) for j in range(i + 1, dim))
        else:
            values = iter(upper)
        for i in range(dim):
            for j in range(i + 1, dim):
                v = next(values)
                a[i, j] = v
                a[j, i] = -v
        return cls(a, field=field)

    @classmethod
    def zeros(cls, dim: int, field: str = RATIONAL) -> "SkewMatrix":
        return cls.from_upper(dim, func=lambda i, j: 0, field=field)

    @classmethod
    def ones_upper(cls, dim: int, field: str = RATIONAL) -> "SkewMatrix":
        """The matrix with every entry above the diagonal equal to 1."""
        return cls.from_upper(dim, func=lambda i, j: 1, field=field)

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the full matrix."""
        return self._a

    @property
    def is_exact(self) -> bool:
        return self.field == RATIONAL

    def __getitem__(self, idx):
        return self._a[idx]

    def __repr__(self) -> str:
        return f"SkewMatrix(dim={self.dim}, field={self.field!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SkewMatrix):
            return NotImplemented
        return self.dim == other.dim and bool(np.all(self._a == other._a))

    def _binary_field(self, other: "SkewMatrix") -> str:
        if self.dim != other.dim:
            raise DimensionMismatch(f"dims {self.dim} and {other.dim} differ")
        return RATIONAL if self.is_exact and other.is_exact else FLOAT

    def __add__(self, other: "SkewMatrix") -> "SkewMatrix":
        field = self._binary_field(other)
        return SkewMatrix(self._a + other._a, field=field)

    def __sub__(self, other: "SkewMatrix") -> "SkewMatrix":
        field = self._binary_field(other)
        return SkewMatrix(self._a - other._a, field=field)

    def __neg__(self) -> "SkewMatrix":
        return SkewMatrix(-self._a, field=self.field)

    def to_float(self) -> "SkewMatrix":
        return SkewMatrix(np.asarray(self._a, dtype=float), field=FLOAT)

    def to_list(self) -> list:
        return self._a.tolist()

    def congruence(self, b) -> "SkewMatrix":
        """Return ``B^T A B``."""
        b = np.asarray(b, dtype=object if self.is_exact else float)
        if b.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"congruence needs a {self.dim}x{self.dim} matrix")
        if self.is_exact:
            b = np.vectorize(Fraction, otypes=[object])(b)
        return SkewMatrix(b.T.dot(self._a).dot(b), field=self.field)

    def scaled(self, lams: Sequence) -> "SkewMatrix":
        """Return the matrix with entries ``lam_i * lam_j * a_ij``."""
        if len(lams) != self.dim:
            raise DimensionMismatch("need one scale factor per row")
        lam = np.array(list(lams), dtype=object if self.is_exact else float)
        return SkewMatrix(np.outer(lam, lam) * self._a, field=self.field)


@dataclass(frozen=True)
class Pairing:
    """A perfect matching of ``{0, ..., 2n-1}`` as pairs ``(i, j)`` with ``i < j``.

    Pairs are stored sorted by their left endpoint.
    """

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(sorted((min(p), max(p)) for p in self.pairs))
        flat = sorted(x for p in pairs for x in p)
        if not pairs or flat != list(range(2 * len(pairs))):
            raise ValueError(f"{self.pairs!r} is not a perfect matching of 0..2n-1")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def crossings(self) -> int:
        return sum(
            1
            for (i, j), (k, l) in itertools.combinations(self.pairs, 2)
            if i < k < j < l
        )


def crossing_sign(p: Pairing) -> int:
    """Sign of the pairing's permutation, ``(-1)**crossings``."""
    return -1 if p.crossings() % 2 else 1


def iter_pairings(dim: int) -> Iterator[Pairing]:
    """Every perfect matching of ``range(dim)``; there are ``(dim-1)!!`` of them."""

    def rec(rest):
        if not rest:
            yield ()
            return
        first = rest[0]
        for k in range(1, len(rest)):
            remaining = rest[1:k] + rest[k + 1:]
            for tail in rec(remaining):
                yield ((first, rest[k]),) + tail

    if dim == 0:
        return
    for pairs in rec(tuple(range(dim))):
        yield Pairing(pairs)


def _check_even(a: SkewMatrix) -> None:
    if a.dim % 2:
        raise OddDimension(f"Pfaffian of odd dimension {a.dim} is not defined")


def _one(a: SkewMatrix) -> Scalar:
    return Fraction(1) if a.is_exact else 1.0


def pf_enumerate(a: SkewMatrix) -> Scalar:
    """Pfaffian as a signed sum over all perfect matchings.

    Intended as an oracle: limited to ``dim <= 12`` (10395 matchings).
    """
    _check_even(a)
    if a.dim > ENUMERATE_MAX_DIM:
        raise DimensionTooLarge(f"enumeration is capped at dim {ENUMERATE_MAX_DIM}")
    if a.dim == 0:
        return _one(a)
    m = a.to_list()
    total = 0 if a.is_exact else 0.0
    for p in iter_pairings(a.dim):
        term = crossing_sign(p)
        for i, j in p.pairs:
            term = term * m[i][j]
        total += term
    return Fraction(total) if a.is_exact else float(total)


def pf_expand(a: SkewMatrix, row: int = 0) -> Scalar:
    """Pfaffian by expansion along ``row``, with minors expanded along their first row.

    Minors are memoized on their index set, so the cost is ``O(2**dim * dim)``
    rather than factorial.  Exact for rational matrices.
    """
    _check_even(a)
    n = a.dim
    if n == 0:
        return _one(a)
    if not 0 <= row < n:
        raise IndexOutOfRange(f"row {row} outside 0..{n - 1}")
    zero = Fraction(0) if a.is_exact else 0.0
    return expand_entries(a.to_list(), row, _one(a), zero)


def expand_entries(m: Sequence[Sequence], row: int = 0, one=1, zero=0):
    """Row expansion on a nested list of entries from any commutative ring
    (used for extended-precision floats); no validation."""
    n = len(m)
    if n == 0:
        return one

    @lru_cache(maxsize=None)
    def pf_rest(rest: tuple):
        if not rest:
            return one
        first = rest[0]
        total = zero
        mrow = m[first]
        for k in range(1, len(rest)):
            v = mrow[rest[k]]
            if v == 0:
                continue
            sub = pf_rest(rest[1:k] + rest[k + 1:])
            total = total + v * sub if k % 2 else total - v * sub
        return total

    total = zero
    others = [j for j in range(n) if j != row]
    for j in others:
        v = m[row][j]
        if v == 0:
            continue
        # (-1)**(i+j+1) for 1-based i < j, with an extra factor -1 when i > j
        sign = -1 if (row + j + 1 + (row > j)) % 2 else 1
        rest = tuple(k for k in others if k != j)
        total = total + sign * v * pf_rest(rest)
    return total


def pf_stable(a: SkewMatrix) -> float:
    """Float Pfaffian in ``O(dim**3)`` by pivoted skew tridiagonalization.

    Each elimination step swaps the largest-magnitude entry of the current
    column below the diagonal into pivot position (flipping the sign) and
    applies the skew congruence that clears the rest of the row and column.
    An exactly vanishing pivot column gives 0.0.
    """
    _check_even(a)
    n = a.dim
    if n == 0:
        return 1.0
    w = np.array(a.entries, dtype=float)
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(w[k + 1:, k])))
        if kp != k + 1:
            w[[k + 1, kp], :] = w[[kp, k + 1], :]
            w[:, [k + 1, kp]] = w[:, [kp, k + 1]]
            pf = -pf
        pivot = w[k, k + 1]
        if pivot == 0.0:
            return 0.0
        pf *= pivot
        if k + 2 < n:
            tau = w[k, k + 2:] / pivot
            col = w[k + 2:, k + 1].copy()
            w[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return float(pf)


def pfaffian(a: SkewMatrix) -> Scalar:
    """Default Pfaffian: exact expansion for rationals, expansion up to dim 12
    and pivoted tridiagonalization above that for floats."""
    if a.is_exact or a.dim <= ENUMERATE_MAX_DIM:
        return pf_expand(a)
    return pf_stable(a)


def submatrix(a: SkewMatrix, idx: Iterable[int]) -> SkewMatrix:
    """Principal minor on the (sorted, deduplicated) index set ``idx``."""
    j = sorted(set(int(i) for i in idx))
    for i in j:
        if not 0 <= i < a.dim:
            raise IndexOutOfRange(f"index {i} outside 0..{a.dim - 1}")
    sub = a.entries[np.ix_(j, j)] if j else np.zeros((0, 0), dtype=a.entries.dtype)
    return SkewMatrix(sub, field=a.field)


def pf_sum_expand(a: SkewMatrix, b: SkewMatrix) -> Scalar:
    """``Pf(A + B)`` as a signed sum over even index subsets ``J``:

    ``sum_J (-1)**(|J|/2) (-1)**s(J) Pf(A|J) Pf(B|J^c)`` with ``s(J)`` the sum of
    the 1-based indices in ``J``.
    """
    _check_even(a)
    _check_even(b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims {a.dim} and {b.dim} differ")
    if a.dim > SUM_EXPAND_MAX_DIM:
        raise DimensionTooLarge(f"subset expansion is capped at dim {SUM_EXPAND_MAX_DIM}")
    n = a.dim
    exact = a.is_exact and b.is_exact
    total = Fraction(0) if exact else 0.0
    full = set(range(n))
    for size in range(0, n + 1, 2):
        for j in itertools.combinations(range(n), size):
            s = sum(j) + size  # 1-based index sum
            sign = -1 if (size // 2 + s) % 2 else 1
            pa = pf_expand(submatrix(a, j))
            pb = pf_expand(submatrix(b, full - set(j)))
            total += sign * pa * pb
    return total if exact else float(total)


def det_exact(a: SkewMatrix) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination (rational matrices only)."""
    m = [list(r) for r in a.to_list()]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for k in range(c, n):
                    m[r][k] -= f * m[c][k]
    return det


def parse_scalar(tok: str) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad matrix entry {tok!r}") from exc


def read_matrix(text: str) -> SkewMatrix:
    """Parse the plain-text matrix format: ``dim`` on the first line, then
    ``dim`` rows of decimal or ``p/q`` entries.  Entries are read exactly."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty matrix file")
    dim = int(lines[0])
    rows = [ln.split() for ln in lines[1:]]
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise DimensionMismatch(f"expected {dim} rows of {dim} entries")
    return SkewMatrix([[parse_scalar(t) for t in r] for r in rows], field=RATIONAL)


def read_matrix_file(path: str | Path) -> SkewMatrix:
    return read_matrix(Path(path).read_text())


def format_matrix(a: SkewMatrix) -> str:
    rows = [" ".join(str(v) for v in row) for row in a.to_list()]
    return "\n".join([str(a.dim)] + rows) + "\n"
