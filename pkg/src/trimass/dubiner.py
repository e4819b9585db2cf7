"""Modified Dubiner basis on the reference triangle.

The reference triangle has vertices A = (-1, 1), B = (-1, -1), C = (1, -1).
Edge A runs B -> C, edge B runs C -> A and edge C runs A -> B, so every edge
is traversed counterclockwise.
"""

from __future__ import annotations

import enum
from fractions import Fraction
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .jacobi import JacobiParams, gauss_jacobi_rule, jacobi_coefficients, jacobi_eval
from .rational import Poly2, gram, homogenized, univariate_in

DOMAIN_TOL = 1e-12
APEX_TOL = 1e-14

VERTICES = np.array([[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
# (start, end) vertex positions of edges A, B, C
EDGE_ENDPOINTS = ((1, 2), (2, 0), (0, 1))

P22 = JacobiParams(2, 2)


class DomainError(ValueError):
    pass


class RefPoint(NamedTuple):
    r: float
    s: float


class CollapsedPoint(NamedTuple):
    xi: float
    eta: float


def check_reference(r, s, tol: float = DOMAIN_TOL):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    outside = (r < -1 - tol) | (s < -1 - tol) | (r + s > tol)
    if np.any(outside):
        k = int(np.flatnonzero(outside.ravel())[0])
        raise DomainError(
            f"point ({np.ravel(r)[k] if r.ndim else r:.6g}, {np.ravel(s)[k] if s.ndim else s:.6g}) "
            "is outside the reference triangle"
        )
    return r, s


def collapse(r, s):
    """Map (r, s) on the triangle to (xi, eta) on the square.

    The apex s = 1 is a removable singularity; xi = -1 is returned there.
    Works elementwise on arrays.
    """
    r, s = check_reference(r, s)
    denom = 1.0 - s
    apex = np.abs(denom) < APEX_TOL
    safe = np.where(apex, 1.0, denom)
    xi = np.where(apex, -1.0, -1.0 + 2.0 * (1.0 + r) / safe)
    xi = np.clip(xi, -1.0, 1.0)
    eta = s * 1.0
    if xi.ndim == 0:
        return CollapsedPoint(float(xi), float(eta))
    return xi, eta


def interior_flat_index(m: int, n: int) -> int:
    """1-based flat index j(m, n) of interior function (m, n)."""
    if m < 0 or n < 0:
        raise ValueError(f"interior indices must be non-negative, got ({m}, {n})")
    return (m + n) * (m + n + 1) // 2 + n + 1


def interior_pairs(p: int) -> list[tuple[int, int]]:
    """(m, n) pairs with m + n <= p - 3, sorted by flat index."""
    pairs = [(m, n) for m in range(p - 2) for n in range(p - 2 - m)]
    return sorted(pairs, key=lambda mn: interior_flat_index(*mn))


class Kind(enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"
    INTERIOR = "interior"


class Ordering(enum.Enum):
    """BY_EDGE: vertices, all modes of edge A, edge B, edge C, interiors.
    BY_MODE: vertices, mode 1 of edges A, B, C, mode 2 of A, B, C, ..., interiors.
    """

    BY_EDGE = "by-edge"
    BY_MODE = "by-mode"


@dataclass(frozen=True)
class BasisIndex:
    kind: Kind
    entity: int  # 0, 1, 2 for A, B, C; -1 for interior
    mode: int  # edge mode m (1-based) or interior flat index j; 0 for vertices
    mn: tuple[int, int] | None = None

    @property
    def degree(self) -> int:
        if self.kind is Kind.VERTEX:
            return 1
        if self.kind is Kind.EDGE:
            return self.mode + 1
        return sum(self.mn) + 3

    @property
    def label(self) -> str:
        if self.kind is Kind.VERTEX:
            return "ABC"[self.entity]
        if self.kind is Kind.EDGE:
            return f"E{'ABC'[self.entity]}{self.mode}"
        return f"I{self.mode}"


def basis_indices(p: int, ordering: Ordering = Ordering.BY_MODE) -> list[BasisIndex]:
    out = [BasisIndex(Kind.VERTEX, v, 0) for v in range(3)]
    if ordering is Ordering.BY_EDGE:
        out += [BasisIndex(Kind.EDGE, e, m) for e in range(3) for m in range(1, p)]
    else:
        out += [BasisIndex(Kind.EDGE, e, m) for m in range(1, p) for e in range(3)]
    out += [BasisIndex(Kind.INTERIOR, -1, interior_flat_index(m, n), (m, n)) for m, n in interior_pairs(p)]
    return out


def dim_space(p: int) -> int:
    return (p + 1) * (p + 2) // 2


@dataclass(frozen=True)
class ReferenceBasis:
    p: int
    ordering: Ordering = Ordering.BY_MODE
    indices: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"degree must be >= 1, got {self.p}")
        object.__setattr__(self, "indices", basis_indices(self.p, self.ordering))

    @property
    def dim(self) -> int:
        return dim_space(self.p)

    def position(self, index: BasisIndex) -> int:
        return self.indices.index(index)

    def permutation_to(self, other: Ordering) -> np.ndarray:
        """``perm`` such that ``values_other = values_self[..., perm]``."""
        target = basis_indices(self.p, other)
        where = {ix: k for k, ix in enumerate(self.indices)}
        return np.array([where[ix] for ix in target])

    def degree_at_most(self, k: int) -> list[int]:
        return [i for i, ix in enumerate(self.indices) if ix.degree <= k]

    def __call__(self, r, s) -> np.ndarray:
        return eval_dubiner(self, r, s)

    @cached_property
    def polynomials(self) -> list[Poly2]:
        return [_dubiner_poly(ix) for ix in self.indices]


def _edge_profile(m, z):
    return jacobi_eval(P22, m - 1, z)


def eval_dubiner(basis: ReferenceBasis, r, s) -> np.ndarray:
    """Values of every basis function; shape ``r.shape + (dim,)``."""
    xi, eta = collapse(r, s)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    xp, xm = (1 + xi) / 2, (1 - xi) / 2
    ep, em = (1 + eta) / 2, (1 - eta) / 2
    cols = []
    for ix in basis.indices:
        if ix.kind is Kind.VERTEX:
            cols.append((ep, xm * em, xp * em)[ix.entity])
        elif ix.kind is Kind.EDGE:
            m = ix.mode
            if ix.entity == 0:
                cols.append(xp * xm * _edge_profile(m, xi) * em ** (m + 1))
            elif ix.entity == 1:
                cols.append(xp * em * ep * _edge_profile(m, eta))
            else:
                cols.append((-1) ** (m - 1) * xm * em * ep * _edge_profile(m, eta))
        else:
            m, n = ix.mn
            cols.append(
                xm * xp * jacobi_eval(P22, m, xi) * em ** (m + 2) * ep * jacobi_eval(JacobiParams(2 * m + 5, 2), n, eta)
            )
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


# -- exact polynomial forms ------------------------------------------------
# Barycentric forms: phi_A = (1+s)/2, phi_B = -(r+s)/2, phi_C = (1+r)/2, and
# xi (1-eta)/2 = phi_C - phi_B, (1-eta)/2 = phi_B + phi_C.

HALF = Fraction(1, 2)
PHI_A = Poly2.linear(HALF, 0, HALF)
PHI_B = Poly2.linear(0, -HALF, -HALF)
PHI_C = Poly2.linear(HALF, HALF, 0)
S = Poly2.linear(0, 0, 1)


def _scaled_jacobi(params: JacobiParams, n: int) -> Poly2:
    """((1-eta)/2)^n P_n(xi) as a polynomial in (r, s)."""
    return homogenized(jacobi_coefficients(params, n), PHI_C - PHI_B, PHI_B + PHI_C)


def _jacobi_in_s(params: JacobiParams, n: int) -> Poly2:
    return univariate_in(jacobi_coefficients(params, n), S)


def _dubiner_poly(ix: BasisIndex) -> Poly2:
    if ix.kind is Kind.VERTEX:
        return (PHI_A, PHI_B, PHI_C)[ix.entity]
    if ix.kind is Kind.EDGE:
        m = ix.mode
        if ix.entity == 0:
            return PHI_B * PHI_C * _scaled_jacobi(P22, m - 1)
        if ix.entity == 1:
            return PHI_C * PHI_A * _jacobi_in_s(P22, m - 1)
        return PHI_A * PHI_B * _jacobi_in_s(P22, m - 1) * (-1) ** (m - 1)
    m, n = ix.mn
    return PHI_A * PHI_B * PHI_C * _scaled_jacobi(P22, m) * _jacobi_in_s(JacobiParams(2 * m + 5, 2), n)


# -- quadrature ------------------------------------------------------------


@dataclass(frozen=True)
class TriangleQuadrature:
    r: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def points(self) -> list[RefPoint]:
        return [RefPoint(a, b) for a, b in zip(self.r, self.s)]

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.weights, f(self.r, self.s)))


@lru_cache(maxsize=None)
def triangle_rule(q: int) -> TriangleQuadrature:
    """Collapsed tensor rule with q^2 points, exact to total degree 2q - 1.

    Gauss-Legendre in xi times Gauss-Jacobi(1, 0) in eta, the latter
    absorbing the (1 - eta)/2 Jacobian of the collapse.
    """
    gx = gauss_jacobi_rule(q)
    ge = gauss_jacobi_rule(q, JacobiParams(1, 0))
    xi, eta = np.meshgrid(gx.nodes, ge.nodes, indexing="ij")
    w = np.outer(gx.weights, ge.weights) / 2
    r = (1 + xi) * (1 - eta) / 2 - 1
    for arr in (r, eta, w):
        arr.setflags(write=False)
    return TriangleQuadrature(r.ravel(), eta.ravel(), w.ravel(), 2 * q - 1)


def default_rule(p: int) -> TriangleQuadrature:
    return triangle_rule(p + 2)


def mass_matrix(basis: ReferenceBasis, rule: TriangleQuadrature | None = None) -> np.ndarray:
    rule = rule or default_rule(basis.p)
    if rule.exactness_degree < 2 * basis.p:
        raise ValueError(f"rule exact to degree {rule.exactness_degree}, mass matrix needs {2 * basis.p}")
    vals = basis(rule.r, rule.s)
    m = (vals * rule.weights[:, None]).T @ vals
    return (m + m.T) / 2


@lru_cache(maxsize=None)
def _exact_mass(p: int, ordering: Ordering) -> np.ndarray:
    return gram(ReferenceBasis(p, ordering).polynomials)


def exact_mass_matrix(basis: ReferenceBasis) -> np.ndarray:
    """Mass matrix with ``Fraction`` entries, from exact monomial integration."""
    return _exact_mass(basis.p, basis.ordering).copy()


# -- factored families -----------------------------------------------------


@dataclass(frozen=True)
class Family:
    """A list of functions on the reference triangle with both float and exact forms."""

    labels: tuple
    evaluate: Callable = field(repr=False)
    polynomials: tuple = field(repr=False)

    def __len__(self):
        return len(self.labels)

    def __call__(self, r, s) -> np.ndarray:
        return self.evaluate(r, s)


def _collapsed(r, s):
    xi, eta = collapse(r, s)
    return np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)


def hatted_mu0_basis(p: int) -> Family:
    """phi_i / phi_A for the functions vanishing on edge A whose degree is below p:
    vertex A, modes 1..p-2 of edges B and C, and interiors of degree <= p - 1.
    """
    if p < 2:
        raise ValueError(f"factored families need p >= 2, got {p}")
    labels = ["A"] + [f"EB{m}" for m in range(1, p - 1)] + [f"EC{m}" for m in range(1, p - 1)]
    pairs = interior_pairs(p - 1)
    labels += [f"I{interior_flat_index(*mn)}" for mn in pairs]

    def evaluate(r, s):
        xi, eta = _collapsed(r, s)
        xp, xm, em = (1 + xi) / 2, (1 - xi) / 2, (1 - eta) / 2
        cols = [np.ones_like(xi)]
        cols += [xp * em * _edge_profile(m, eta) for m in range(1, p - 1)]
        cols += [(-1) ** (m - 1) * xm * em * _edge_profile(m, eta) for m in range(1, p - 1)]
        for m, n in pairs:
            cols.append(xm * xp * jacobi_eval(P22, m, xi) * em ** (m + 2) * jacobi_eval(JacobiParams(2 * m + 5, 2), n, eta))
        return np.stack(np.broadcast_arrays(*cols), axis=-1)

    polys = [Poly2.const(1)]
    polys += [PHI_C * _jacobi_in_s(P22, m - 1) for m in range(1, p - 1)]
    polys += [PHI_B * _jacobi_in_s(P22, m - 1) * (-1) ** (m - 1) for m in range(1, p - 1)]
    polys += [PHI_B * PHI_C * _scaled_jacobi(P22, m) * _jacobi_in_s(JacobiParams(2 * m + 5, 2), n) for m, n in pairs]
    return Family(tuple(labels), evaluate, tuple(polys))


def hatted_star_basis(p: int) -> Family:
    """phi_i / (phi_B phi_C) for all modes of edge A and all interiors."""
    if p < 2:
        raise ValueError(f"factored families need p >= 2, got {p}")
    pairs = interior_pairs(p)
    labels = [f"EA{m}" for m in range(1, p)] + [f"I{interior_flat_index(*mn)}" for mn in pairs]

    def evaluate(r, s):
        xi, eta = _collapsed(r, s)
        ep, em = (1 + eta) / 2, (1 - eta) / 2
        cols = [_edge_profile(m, xi) * em ** (m - 1) for m in range(1, p)]
        for m, n in pairs:
            cols.append(jacobi_eval(P22, m, xi) * em**m * ep * jacobi_eval(JacobiParams(2 * m + 5, 2), n, eta))
        return np.stack(np.broadcast_arrays(*cols), axis=-1)

    polys = [_scaled_jacobi(P22, m - 1) for m in range(1, p)]
    polys += [_scaled_jacobi(P22, m) * PHI_A * _jacobi_in_s(JacobiParams(2 * m + 5, 2), n) for m, n in pairs]
    return Family(tuple(labels), evaluate, tuple(polys))


def hatted_edge_b_family(p: int) -> Family:
    """Edge-B functions with the common factor phi_A phi_C removed."""
    if p < 2:
        raise ValueError(f"factored families need p >= 2, got {p}")
    labels = tuple(f"EB{m}" for m in range(1, p))

    def evaluate(r, s):
        _, eta = _collapsed(r, s)
        return np.stack([_edge_profile(m, eta) for m in range(1, p)], axis=-1)

    return Family(labels, evaluate, tuple(_jacobi_in_s(P22, m - 1) for m in range(1, p)))
