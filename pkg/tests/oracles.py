"""Independent high-precision reference implementations (mpmath / sympy).

Written directly from the defining formulas, sharing no code with the
package.  They are slow and used only to produce or re-derive frozen values.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 30


def perm_sign(p) -> int:
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def pf_permutation(a):
    """Pf(A) = 1/(2^n n!) sum_sigma sgn(sigma) prod a[s(2i), s(2i+1)]; dims <= 8."""
    m = len(a)
    n = m // 2
    total = 0
    for p in itertools.permutations(range(m)):
        term = perm_sign(p)
        for i in range(n):
            term = term * a[p[2 * i]][p[2 * i + 1]]
        total += term
    denom = 2 ** n
    for k in range(2, n + 1):
        denom *= k
    if isinstance(total, int):
        return Fraction(total, denom)
    return total / denom


def F(x):
    return mp.erfc(mp.mpf(x) / 2)


def dF(x):
    return -mp.exp(-mp.mpf(x) ** 2 / 4) / mp.sqrt(mp.pi)


def d2F(x):
    x = mp.mpf(x)
    return x * mp.exp(-x * x / 4) / (2 * mp.sqrt(mp.pi))


def kernel(x, y, t):
    d = (mp.mpf(y) - mp.mpf(x)) / mp.sqrt(t)
    s = 1 / mp.sqrt(t)
    sg = mp.sign(d)
    return [[-d2F(d) * s, -dF(d) * s], [dF(d) * s, sg * F(abs(d)) * s]]


def rho(points, t, annihilating=False):
    n = len(points)
    a = [[mp.mpf(0)] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for j in range(i + 1, n):
            k = kernel(points[i], points[j], t)
            for u in range(2):
                for v in range(2):
                    a[2 * i + u][2 * j + v] = k[u][v]
                    a[2 * j + v][2 * i + u] = -k[u][v]
    for i in range(n):
        k = kernel(points[i], points[i], t)
        a[2 * i][2 * i + 1] = k[0][1]
        a[2 * i + 1][2 * i] = -k[0][1]
    val = pf_permutation(a)
    return val / 2 ** n if annihilating else val


def empty_pf(endpoints, t):
    m = len(endpoints)
    a = [[mp.mpf(0)] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            a[i][j] = F((endpoints[j] - endpoints[i]) / mp.sqrt(t))
            a[j][i] = -a[i][j]
    return pf_permutation(a)


def pair_moment(x1, x2, t, g):
    """E[g(X1) g(X2)] for two annihilating Brownian particles (empty product 1),
    from the Karlin-McGregor non-collision density."""
    def p(a, b):
        return mp.npdf(b, a, mp.sqrt(t))

    def inner(y1):
        return mp.quad(lambda y2: g(y1) * g(y2) * (p(x1, y1) * p(x2, y2) - p(x1, y2) * p(x2, y1)),
                       [y1, y1 + 3, mp.inf])
    survive_integral = mp.quad(inner, [-mp.inf, 0, mp.inf])
    meet = F((mp.mpf(x2) - x1) / mp.sqrt(t))
    return meet + survive_integral
