"""Exact rational helpers: bivariate polynomials on the reference triangle
and small dense linear algebra that works for both ``Fraction`` object
arrays and ``float64`` arrays.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial

import numpy as np


class SingularMatrixError(ArithmeticError):
    pass


def is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def as_fraction_array(a) -> np.ndarray:
    """Convert ints, Fractions or ``num/den`` strings to an object array of Fractions."""
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = Fraction(v)
    return out


def fraction_zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(Fraction(0))
    return out


def fraction_eye(n: int) -> np.ndarray:
    out = fraction_zeros((n, n))
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


def _eliminate(a: np.ndarray):
    """Row-reduce a Fraction matrix in place. Returns the pivot columns."""
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if a[i, c] != 0), None)
        if piv is None:
            continue
        if piv != r:
            a[[r, piv]] = a[[piv, r]]
        inv = 1 / a[r, c]
        a[r] = a[r] * inv
        for i in range(rows):
            if i != r and a[i, c] != 0:
                a[i] = a[i] - a[i, c] * a[r]
        pivots.append(c)
        r += 1
    return pivots


def rank(a: np.ndarray, tol: float | None = None) -> int:
    if is_exact(a):
        work = np.array(a, dtype=object, copy=True)
        return len(_eliminate(work))
    return int(np.linalg.matrix_rank(np.asarray(a, dtype=float), tol=tol))


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` exactly for Fraction arrays, with LAPACK otherwise."""
    if is_exact(a) or is_exact(b):
        a = as_fraction_array(a)
        b = as_fraction_array(b)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError(f"square matrix required, got {a.shape}")
        rhs = b.reshape(n, -1)
        aug = np.concatenate([a, rhs], axis=1)
        pivots = _eliminate(aug)
        if pivots[:n] != list(range(n)):
            raise SingularMatrixError(f"matrix is singular (rank {len([p for p in pivots if p < n])} < {n})")
        x = aug[:, n:]
        return x.reshape(b.shape)
    a = np.asarray(a, dtype=float)
    if np.linalg.matrix_rank(a) < a.shape[0]:
        raise SingularMatrixError(f"matrix is singular (condition {np.linalg.cond(a):.3e})")
    return np.linalg.solve(a, np.asarray(b, dtype=float))


def inv(a: np.ndarray) -> np.ndarray:
    if is_exact(a):
        return solve(a, fraction_eye(a.shape[0]))
    return solve(a, np.eye(a.shape[0]))


def to_float(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


# -- polynomials ------------------------------------------------------------


class Poly2:
    """Polynomial in (r, s) with exact coefficients, ``{(i, j): c}`` for c r^i s^j."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def const(cls, c) -> "Poly2":
        return cls({(0, 0): c})

    @classmethod
    def linear(cls, c0, cr, cs) -> "Poly2":
        return cls({(0, 0): c0, (1, 0): cr, (0, 1): cs})

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self.terms), default=0)

    def _coerce(self, other) -> "Poly2":
        return other if isinstance(other, Poly2) else Poly2.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly2(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly2({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly2):
            c = Fraction(other)
            return Poly2({k: v * c for k, v in self.terms.items()})
        out: dict = {}
        for (i1, j1), a in self.terms.items():
            for (i2, j2), b in other.terms.items():
                key = (i1 + i2, j1 + j2)
                out[key] = out.get(key, 0) + a * b
        return Poly2(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Poly2.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Poly2) and self.terms == other.terms

    def __repr__(self):
        return f"Poly2({self.terms!r})"

    def __call__(self, r, s):
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        out = np.zeros(np.broadcast(r, s).shape)
        for (i, j), c in self.terms.items():
            out = out + float(c) * r**i * s**j
        return out

    def integrate(self) -> Fraction:
        """Exact integral over the reference triangle."""
        return sum((c * monomial_integral(i, j) for (i, j), c in self.terms.items()), Fraction(0))


_MONO_CACHE: dict = {}


def monomial_integral(a: int, b: int) -> Fraction:
    """Exact value of the integral of r^a s^b over {-1 <= r, s; r + s <= 0}.

    Uses r = 2x - 1, s = 2y - 1 on the unit simplex, where
    int x^i y^j = i! j! / (i + j + 2)!.
    """
    key = (a, b)
    if key not in _MONO_CACHE:
        total = Fraction(0)
        for i in range(a + 1):
            ci = comb(a, i) * 2**i * (-1) ** (a - i)
            for j in range(b + 1):
                cj = comb(b, j) * 2**j * (-1) ** (b - j)
                total += ci * cj * Fraction(factorial(i) * factorial(j), factorial(i + j + 2))
        _MONO_CACHE[key] = 4 * total
    return _MONO_CACHE[key]


def univariate_in(coeffs, var: Poly2) -> Poly2:
    """Evaluate a univariate polynomial (ascending coefficients) at a Poly2."""
    out = Poly2()
    for c in reversed(list(coeffs)):
        out = out * var + c
    return out


def homogenized(coeffs, x: Poly2, t: Poly2) -> Poly2:
    """Return t^n p(x / t) for p of degree n, as a polynomial."""
    n = len(coeffs) - 1
    out = Poly2()
    for k, c in enumerate(coeffs):
        if c != 0:
            out = out + (x**k) * (t ** (n - k)) * c
    return out


def gram(polys_a, polys_b=None) -> np.ndarray:
    """Exact L2 Gram matrix over the reference triangle."""
    polys_b = polys_a if polys_b is None else polys_b
    out = fraction_zeros((len(polys_a), len(polys_b)))
    symmetric = polys_b is polys_a
    for i, p in enumerate(polys_a):
        for j, q in enumerate(polys_b):
            if symmetric and j < i:
                out[i, j] = out[j, i]
                continue
            out[i, j] = (p * q).integrate()
    return out
