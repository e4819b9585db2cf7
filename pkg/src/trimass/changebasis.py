"""Continuity-preserving change of basis psi = T phi."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dubiner import Kind, Ordering, ReferenceBasis, dim_space
from .rational import SingularMatrixError, fraction_eye, fraction_zeros, inv, is_exact, to_float


class StructureError(ValueError):
    pass


class SingularBlockError(SingularMatrixError):
    def __init__(self, block: str):
        super().__init__(f"diagonal block {block} of T is singular")
        self.block = block


class OrderingMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    """First structural violation; ``row`` and ``col`` are 1-based."""

    row: int
    col: int
    reason: str

    def __str__(self):
        return f"({self.row},{self.col}): {self.reason}"


@dataclass(frozen=True)
class ChangeOfBasis:
    p: int
    matrix: np.ndarray
    ordering: Ordering = Ordering.BY_MODE

    def __post_init__(self):
        n = dim_space(self.p)
        if np.shape(self.matrix) != (n, n):
            raise StructureError(f"T must be {n}x{n} for p={self.p}, got {np.shape(self.matrix)}")

    @property
    def basis(self) -> ReferenceBasis:
        return ReferenceBasis(self.p, self.ordering)

    @property
    def exact(self) -> bool:
        return is_exact(self.matrix)

    def reorder(self, ordering: Ordering) -> "ChangeOfBasis":
        if ordering is self.ordering:
            return self
        perm = self.basis.permutation_to(ordering)
        return ChangeOfBasis(self.p, self.matrix[np.ix_(perm, perm)], ordering)

    def as_float(self) -> "ChangeOfBasis":
        return ChangeOfBasis(self.p, to_float(self.matrix), self.ordering)


def identity(p: int, ordering: Ordering = Ordering.BY_MODE, exact: bool = False) -> ChangeOfBasis:
    n = dim_space(p)
    if exact:
        return ChangeOfBasis(p, fraction_eye(n), ordering)
    return ChangeOfBasis(p, np.eye(n), ordering)


def structure_masks(p: int, ordering: Ordering) -> tuple[np.ndarray, np.ndarray]:
    """(allowed, unit): where entries may be nonzero, and where they must equal 1.

    Vertex rows may add edge functions of the two adjacent edges and
    interiors; edge rows may add same-edge functions and interiors;
    interior rows only interiors. In BY_MODE ordering the edge and interior
    blocks are additionally unit upper triangular.
    """
    idx = ReferenceBasis(p, ordering).indices
    n = len(idx)
    allowed = np.zeros((n, n), dtype=bool)
    unit = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            if a.kind is Kind.VERTEX:
                ok = (i == j) or (b.kind is Kind.EDGE and b.entity != a.entity) or b.kind is Kind.INTERIOR
            elif a.kind is Kind.EDGE:
                ok = (b.kind is Kind.EDGE and b.entity == a.entity) or b.kind is Kind.INTERIOR
                if ordering is Ordering.BY_MODE and b.kind is Kind.EDGE:
                    ok = ok and b.mode >= a.mode
            else:
                ok = b.kind is Kind.INTERIOR
                if ordering is Ordering.BY_MODE:
                    ok = ok and j >= i
            allowed[i, j] = ok
        if a.kind is Kind.VERTEX or ordering is Ordering.BY_MODE:
            unit[i, i] = True
    return allowed, unit


def validate_structure(t: ChangeOfBasis) -> Violation | None:
    """Return the first entry breaking the continuity pattern, or None."""
    allowed, unit = structure_masks(t.p, t.ordering)
    m = t.matrix
    n = m.shape[0]
    for i in range(n):
        for j in range(n):
            v = m[i, j]
            if unit[i, j] and v != 1:
                return Violation(i + 1, j + 1, f"must be 1, found {v}")
            if not allowed[i, j] and v != 0:
                return Violation(i + 1, j + 1, f"must be 0, found {v}")
    return None


def _groups(p: int):
    """Index groups in BY_EDGE ordering: vertices, edges A, B, C, interior."""
    e = p - 1
    v = np.arange(3)
    edges = [3 + k * e + np.arange(e) for k in range(3)]
    interior = np.arange(3 + 3 * e, dim_space(p))
    return v, edges, interior


def _inv_block(block: np.ndarray, name: str) -> np.ndarray:
    if block.size == 0:
        return block
    try:
        return inv(block)
    except SingularMatrixError:
        raise SingularBlockError(name) from None


def block_inverse(t: ChangeOfBasis) -> np.ndarray:
    """T^{-1} assembled block by block; the result uses the ordering of ``t``.

    With V the vertex rows, D_E the edge diagonal blocks, Y the edge-interior
    blocks and J the interior block, the inverse has vertex-edge blocks
    -X D_E^{-1}, vertex-interior blocks (-X_I + sum X D_E^{-1} Y) J^{-1} and
    edge-interior blocks -D_E^{-1} Y J^{-1}.
    """
    violation = validate_structure(t)
    if violation is not None:
        raise StructureError(f"T violates the continuity structure at {violation}")
    te = t.reorder(Ordering.BY_EDGE)
    m = te.matrix
    p = t.p
    v, edges, interior = _groups(p)
    out = fraction_zeros(m.shape) if te.exact else np.zeros(m.shape)
    jinv = _inv_block(m[np.ix_(interior, interior)], "I")
    out[np.ix_(interior, interior)] = jinv
    for i in v:
        out[i, i] = 1
    vi = -m[np.ix_(v, interior)]
    for name, e in zip("ABC", edges):
        dinv = _inv_block(m[np.ix_(e, e)], f"{name}{name}")
        y = m[np.ix_(e, interior)]
        out[np.ix_(e, e)] = dinv
        out[np.ix_(e, interior)] = -(dinv @ y) @ jinv
        x = m[np.ix_(v, e)]
        out[np.ix_(v, e)] = -(x @ dinv)
        vi = vi + (x @ dinv) @ y
    out[np.ix_(v, interior)] = vi @ jinv
    back = ReferenceBasis(p, Ordering.BY_EDGE).permutation_to(t.ordering)
    return out[np.ix_(back, back)]


def eval_psi(t: ChangeOfBasis, r, s) -> np.ndarray:
    """Values of psi = T phi at the given points; shape ``r.shape + (dim,)``."""
    phi = t.basis(r, s)
    return phi @ to_float(t.matrix).T


def psi_mass_matrix(t: ChangeOfBasis, mass: np.ndarray) -> np.ndarray:
    """T M T^T for a Dubiner mass matrix in the same ordering."""
    return t.matrix @ mass @ t.matrix.T


def check_same_ordering(*items) -> Ordering:
    orders = {it.ordering for it in items}
    if len(orders) != 1:
        raise OrderingMismatchError(f"operands use different orderings: {sorted(o.value for o in orders)}")
    return orders.pop()


def random_change_of_basis(p: int, ordering: Ordering, rng: np.random.Generator, scale: float = 1.0) -> ChangeOfBasis:
    """Random T respecting the continuity structure, with well-conditioned diagonal blocks."""
    allowed, unit = structure_masks(p, ordering)
    n = allowed.shape[0]
    m = np.where(allowed, rng.uniform(-scale, scale, (n, n)), 0.0)
    diag = np.diag_indices(n)
    m[diag] = np.where(np.diag(unit), 1.0, rng.choice([-1, 1], n) * rng.uniform(1.0, 2.0, n))
    if ordering is Ordering.BY_EDGE:
        # keep general diagonal blocks away from singular
        v, edges, interior = _groups(p)
        for g in [*edges, interior]:
            if len(g):
                m[np.ix_(g, g)] += 3 * np.eye(len(g))
    return ChangeOfBasis(p, m, ordering)
