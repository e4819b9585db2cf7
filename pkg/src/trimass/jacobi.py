"""Jacobi polynomials and Gauss-Jacobi quadrature on [-1, 1]."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class JacobiParams:
    """Exponents of the weight (1 - z)^alpha (1 + z)^beta."""

    alpha: float = 0
    beta: float = 0

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(f"Jacobi exponents must exceed -1, got alpha={self.alpha}, beta={self.beta}")


LEGENDRE = JacobiParams(0, 0)


def _check_z(z):
    if isinstance(z, Fraction):
        bad = not (-1 <= z <= 1)
    else:
        za = np.asarray(z, dtype=float)
        bad = bool(np.any((za < -1 - 1e-12) | (za > 1 + 1e-12)))
    if bad:
        raise ValueError("z must lie in [-1, 1]")


def jacobi_eval(params: JacobiParams, n: int, z):
    """P_n^{alpha,beta}(z) by the three-term recurrence.

    ``z`` may be a float, an array, or a ``Fraction`` (with rational
    exponents the result is then exact).
    """
    if n < 0:
        raise ValueError(f"degree must be non-negative, got {n}")
    _check_z(z)
    return _recurrence(params, n, z)


def _recurrence(params: JacobiParams, n: int, z):
    a, b = params.alpha, params.beta
    if isinstance(z, Fraction):
        a, b = Fraction(a), Fraction(b)
    p0 = z * 0 + 1
    if n == 0:
        return p0
    p1 = (a + 1) + (a + b + 2) * (z - 1) / 2
    for k in range(2, n + 1):
        c = 2 * k + a + b
        a1 = 2 * k * (k + a + b) * (c - 2)
        a2 = (c - 1) * (a * a - b * b)
        a3 = (c - 2) * (c - 1) * c
        a4 = 2 * (k + a - 1) * (k + b - 1) * c
        p0, p1 = p1, ((a2 + a3 * z) * p1 - a4 * p0) / a1
    return p1


def jacobi_derivative(params: JacobiParams, n: int, z):
    if n == 0:
        return z * 0
    shifted = JacobiParams(params.alpha + 1, params.beta + 1)
    return (n + params.alpha + params.beta + 1) / 2 * _recurrence(shifted, n - 1, z)


def jacobi_coefficients(params: JacobiParams, n: int) -> list[Fraction]:
    """Exact monomial coefficients (ascending powers) of P_n^{alpha,beta}.

    Exponents are converted with ``Fraction``; integer exponents are exact.
    """
    a, b = Fraction(params.alpha), Fraction(params.beta)
    prev = [Fraction(1)]
    if n == 0:
        return prev
    cur = [(a + 1) - (a + b + 2) / 2, (a + b + 2) / 2]
    for k in range(2, n + 1):
        c = 2 * k + a + b
        a1 = 2 * k * (k + a + b) * (c - 2)
        a2 = (c - 1) * (a * a - b * b)
        a3 = (c - 2) * (c - 1) * c
        a4 = 2 * (k + a - 1) * (k + b - 1) * c
        nxt = [Fraction(0)] * (k + 1)
        for i, ci in enumerate(cur):
            nxt[i] += a2 * ci
            nxt[i + 1] += a3 * ci
        for i, ci in enumerate(prev):
            nxt[i] -= a4 * ci
        prev, cur = cur, [x / a1 for x in nxt]
    return cur


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    params: JacobiParams = LEGENDRE

    def integrate(self, f) -> float:
        """Approximate the weighted integral of ``f`` over [-1, 1]."""
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_jacobi_rule(q: int, params: JacobiParams = LEGENDRE) -> QuadratureRule1D:
    """q-point Gauss-Jacobi rule, exact to degree 2q - 1 for the Jacobi weight.

    Nodes come from Newton's method with polynomial deflation, seeded at
    Chebyshev points; weights from the derivative formula.
    """
    if q < 1:
        raise ValueError(f"need at least one point, got q={q}")
    a, b = params.alpha, params.beta
    roots: list[float] = []
    for k in range(q):
        x = -math.cos((2 * k + 1) * math.pi / (2 * q))
        if k > 0:
            x = 0.5 * (x + roots[-1])
        for _ in range(NEWTON_MAXITER):
            p = _recurrence(params, q, x)
            dp = jacobi_derivative(params, q, x)
            defl = sum(1.0 / (x - root) for root in roots)
            delta = -p / (dp - defl * p)
            x += delta
            if abs(delta) <= NEWTON_TOL:
                break
        else:
            raise NonConvergenceError(
                f"Newton iteration for root {k} of P_{q}^({a},{b}) stalled at |delta|={abs(delta):.2e}"
            )
        roots.append(x)
    # deflation may find roots out of order
    nodes = np.sort(np.array(roots))
    if np.any(np.diff(nodes) <= 0) or np.any(np.abs(nodes) >= 1):
        raise NonConvergenceError(f"Gauss-Jacobi nodes for q={q}, params={params} are not distinct interior points")
    dp = jacobi_derivative(params, q, nodes)
    log_c = (
        (a + b + 1) * math.log(2)
        + math.lgamma(q + a + 1)
        + math.lgamma(q + b + 1)
        - math.lgamma(q + a + b + 1)
        - math.lgamma(q + 1)
    )
    weights = math.exp(log_c) / ((1 - nodes**2) * dp**2)
    return QuadratureRule1D(nodes, weights, 2 * q - 1, params)
