"""Lower-triangular pseudo-mass matrix L and its companion basis T for p = 3.

Both matrices use the BY_MODE ordering (A, B, C, EA1, EB1, EC1, EA2, EB2,
EC2, I1). Rows are determined one stage at a time from

    L (T^{-1}_{i,:})^T = T M e_i   for every Dubiner function i of degree <= p - 1,

which makes L^{-1} T (int f phi) reproduce f exactly whenever deg f <= p - 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import solve_triangular

from .changebasis import ChangeOfBasis, block_inverse, structure_masks
from .dubiner import Ordering, ReferenceBasis, exact_mass_matrix, mass_matrix, triangle_rule
from .rational import SingularMatrixError, as_fraction_array, fraction_eye, fraction_zeros, rank, solve, to_float


class ConstructionError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _fractions(rows) -> np.ndarray:
    return as_fraction_array([[Fraction(x) for x in row.split()] for row in rows])


# reference matrices the self-check compares against
EXPECTED_L = _fractions(
    [
        "1/30 0 0 0 0 0 0 0 0 0",
        "0 1/30 0 0 0 0 0 0 0 0",
        "0 0 1/30 0 0 0 0 0 0 0",
        "-1/180 1/360 1/360 1/90 0 0 0 0 0 0",
        "1/360 -1/180 1/360 0 1/90 0 0 0 0 0",
        "1/360 1/360 -1/180 0 0 1/90 0 0 0 0",
        "0 157/280 -157/280 0 1/210 -1/210 1 0 0 0",
        "-157/280 0 157/280 -1/210 0 1/210 0 1 0 0",
        "157/280 -157/280 0 1/210 -1/210 0 0 0 1 0",
        "-1/2520 -1/2520 -1/2520 1/2520 1/2520 1/2520 0 0 0 1/1260",
    ]
)
EXPECTED_T = _fractions(
    [
        "1 0 0 0 -9/4 -9/4 0 -7/12 7/12 0",
        "0 1 0 -9/4 0 -9/4 7/12 0 -7/12 21/4",
        "0 0 1 -9/4 -9/4 0 -7/12 7/12 0 21/4",
        "0 0 0 1 0 0 0 0 0 -7/2",
        "0 0 0 0 1 0 0 0 0 -7/2",
        "0 0 0 0 0 1 0 0 0 -7/2",
        "0 0 0 0 0 0 1 0 0 0",
        "0 0 0 0 0 0 0 1 0 3",
        "0 0 0 0 0 0 0 0 1 -3",
        "0 0 0 0 0 0 0 0 0 1",
    ]
)


def _l_pattern() -> np.ndarray:
    pat = np.zeros((10, 10), dtype=bool)
    for k in range(3):
        pat[k, k] = True
        pat[3 + k, [0, 1, 2, 3 + k]] = True
        others = [3 + (k + 1) % 3, 3 + (k + 2) % 3]
        pat[6 + k, [0, 1, 2, *others, 6 + k]] = True
    pat[9, :] = True
    return pat


L_PATTERN = _l_pattern()

# name -> (row, col) in the first row of each family; other rows follow by rotation
NAMED_ENTRIES = {
    "v": (0, 0),
    "e1": (3, 3),
    "e1o": (3, 0),
    "e1-": (3, 1),
    "e1+": (3, 2),
    "e2": (6, 6),
    "e2o": (6, 0),
    "e2-": (6, 1),
    "e2+": (6, 2),
    "e21+": (6, 4),
    "e21-": (6, 5),
    "i1": (9, 9),
}


def _rotated(name: str, k: int) -> tuple[int, int]:
    """Position of a named entry in the k-th member of its cyclic family."""
    row, col = NAMED_ENTRIES[name]
    if name == "i1":
        return row, col
    block = lambda c: 3 * (c // 3) + (c % 3 + k) % 3  # noqa: E731
    return block(row), block(col)


@dataclass(frozen=True)
class PseudoMassL:
    matrix: np.ndarray
    p: int = 3

    @property
    def named(self) -> dict:
        out = {name: self.matrix[pos] for name, pos in NAMED_ENTRIES.items()}
        labels = ["A", "B", "C", "EA1", "EB1", "EC1", "EA2", "EB2", "EC2"]
        out.update({f"i1,{lab}": self.matrix[9, j] for j, lab in enumerate(labels)})
        return out

    def pattern_violations(self) -> list[tuple[int, int]]:
        """Entries outside the lower-triangular sparsity pattern (0-based)."""
        nz = to_float(self.matrix) != 0
        return [tuple(ix) for ix in np.argwhere(nz & ~L_PATTERN)]

    def symmetry_violations(self, tol: float = 0.0) -> list[str]:
        """Named entries that differ between the three rotated copies of a row."""
        bad = []
        m = self.matrix
        for name in NAMED_ENTRIES:
            vals = [m[_rotated(name, k)] for k in range(3)]
            if any(abs(float(v - vals[0])) > tol for v in vals[1:]):
                bad.append(name)
        return bad

    def as_float(self) -> "PseudoMassL":
        return PseudoMassL(to_float(self.matrix), self.p)


@dataclass(frozen=True)
class ConstraintIndexSet:
    """Dubiner functions (1-based, BY_MODE ordering) of degree at most p - 1."""

    p: int
    mu: tuple

    @classmethod
    def for_degree(cls, p: int) -> "ConstraintIndexSet":
        basis = ReferenceBasis(p, Ordering.BY_MODE)
        return cls(p, tuple(i + 1 for i in basis.degree_at_most(p - 1)))

    @property
    def zero_based(self) -> list[int]:
        return [i - 1 for i in self.mu]


def _mass(p: int, exact: bool) -> np.ndarray:
    basis = ReferenceBasis(p, Ordering.BY_MODE)
    if exact:
        return exact_mass_matrix(basis)
    return mass_matrix(basis, triangle_rule(p + 2))


def _solve_row(stage, p, row, l_cols, t_cols, l_fixed, t, mass, mu, exact):
    """Solve one row of L and T; returns ({col: L value}, {col: T value}).

    Unknowns are L[row, l_cols] and T[row, t_cols]; T[row, row] = 1 and the
    L entries in ``l_fixed`` are given.
    """
    tinv = block_inverse(ChangeOfBasis(p, t, Ordering.BY_MODE))
    x = tinv[mu, :].T  # column i holds (T^{-1}_{i,:})^T
    n_unk = len(l_cols) + len(t_cols)
    if n_unk != len(mu):
        raise ConstructionError(stage, f"row {row + 1}: {n_unk} unknowns for {len(mu)} equations")
    a = fraction_zeros((len(mu), n_unk)) if exact else np.zeros((len(mu), n_unk))
    b = fraction_zeros(len(mu)) if exact else np.zeros(len(mu))
    for k, i in enumerate(mu):
        for u, j in enumerate(l_cols):
            a[k, u] = x[j, k]
        for u, j in enumerate(t_cols):
            a[k, len(l_cols) + u] = -mass[j, i]
        b[k] = mass[row, i] - sum((val * x[j, k] for j, val in l_fixed.items()), 0)
    if rank(a) < n_unk:
        cond = np.linalg.cond(to_float(a))
        raise ConstructionError(stage, f"row {row + 1}: singular system (condition estimate {cond:.3e})")
    try:
        sol = solve(a, b)
    except SingularMatrixError as err:
        raise ConstructionError(stage, f"row {row + 1}: {err}") from None
    l_vals = dict(zip(l_cols, sol[: len(l_cols)]))
    l_vals.update(l_fixed)
    return l_vals, dict(zip(t_cols, sol[len(l_cols) :]))


def solve_vertex_rows(p: int, exact: bool = True):
    """First three rows of T and the diagonal entry v, for any p >= 1.

    Returns ``(rows, v)`` with ``rows`` of shape (3, dim). Each vertex row has
    one L unknown and the free T entries of that row, as many unknowns as
    there are polynomials of degree <= p - 1, and the rank of every system is
    checked before solving.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    basis = ReferenceBasis(p, Ordering.BY_MODE)
    mass = _mass(p, exact)
    mu = basis.degree_at_most(p - 1)
    allowed, _ = structure_masks(p, Ordering.BY_MODE)
    t = fraction_eye(basis.dim) if exact else np.eye(basis.dim)
    vs = []
    for row in range(3):
        t_cols = [j for j in np.flatnonzero(allowed[row]) if j != row]
        l_vals, t_vals = _solve_row("vertex rows", p, row, [row], t_cols, {}, t, mass, mu, exact)
        for j, val in t_vals.items():
            t[row, j] = val
        vs.append(l_vals[row])
    if any(v != vs[0] for v in vs[1:]) and (exact or max(abs(float(v - vs[0])) for v in vs) > 1e-12):
        raise ConstructionError("vertex rows", f"diagonal entries differ between vertices: {vs}")
    return t[:3].copy(), vs[0]


class P3Construction:
    """Stage-by-stage construction of L and T for p = 3."""

    p = 3

    def __init__(self, exact: bool = True):
        self.exact = exact
        self.mass = _mass(3, exact)
        self.mu = ConstraintIndexSet.for_degree(3).zero_based
        self.T = fraction_eye(10) if exact else np.eye(10)
        self.L = fraction_zeros((10, 10)) if exact else np.zeros((10, 10))
        self.stages_done: list[str] = []

    def _apply(self, row, l_vals, t_vals):
        for j, val in l_vals.items():
            self.L[row, j] = val
        for j, val in t_vals.items():
            self.T[row, j] = val

    def _require(self, stage):
        if stage not in self.stages_done:
            raise ConstructionError("ordering", f"stage '{stage}' must run first")

    def solve_vertex_rows(self):
        allowed, _ = structure_masks(3, Ordering.BY_MODE)
        for row in range(3):
            t_cols = [j for j in np.flatnonzero(allowed[row]) if j != row]
            self._apply(row, *_solve_row("vertex rows", 3, row, [row], t_cols, {}, self.T, self.mass, self.mu, self.exact))
        self.stages_done.append("vertex rows")
        return self

    def solve_first_edge_rows(self, edge_order=(0, 1, 2)):
        """Six unknowns per edge: three vertex couplings, the diagonal, and
        the edge's mode-2 and interior coefficients in T."""
        self._require("vertex rows")
        for k in edge_order:
            row = 3 + k
            self._apply(
                row, *_solve_row("first edge rows", 3, row, [0, 1, 2, row], [6 + k, 9], {}, self.T, self.mass, self.mu, self.exact)
            )
        self.stages_done.append("first edge rows")
        return self

    def solve_second_edge_rows(self, e2=1, edge_order=(0, 1, 2)):
        """Seven unknowns, six equations per edge; the diagonal is fixed to ``e2``."""
        self._require("first edge rows")
        e2 = Fraction(e2) if self.exact else float(e2)
        for k in edge_order:
            row = 6 + k
            l_cols = [0, 1, 2, 3 + (k + 1) % 3, 3 + (k + 2) % 3]
            self._apply(
                row, *_solve_row("second edge rows", 3, row, l_cols, [9], {row: e2}, self.T, self.mass, self.mu, self.exact)
            )
        self.stages_done.append("second edge rows")
        return self

    def interior_row_from_exact_mass(self):
        """Last row of L taken from the exact psi mass matrix T M T^T."""
        self._require("second edge rows")
        m_psi = self.T @ self.mass @ self.T.T
        self.L[9, :] = m_psi[9, :]
        self.stages_done.append("interior row")
        return self

    def result(self) -> tuple[PseudoMassL, ChangeOfBasis]:
        self._require("interior row")
        return PseudoMassL(self.L.copy()), ChangeOfBasis(3, self.T.copy(), Ordering.BY_MODE)


def construct_p3(exact: bool = True, e2=1, edge_order=(0, 1, 2)) -> tuple[PseudoMassL, ChangeOfBasis]:
    """Run all four stages and return (L, T)."""
    c = P3Construction(exact)
    c.solve_vertex_rows()
    c.solve_first_edge_rows(edge_order)
    c.solve_second_edge_rows(e2, edge_order)
    c.interior_row_from_exact_mass()
    return c.result()


def reference_projection(lmat: PseudoMassL, t: ChangeOfBasis, load_phi: np.ndarray) -> np.ndarray:
    """Dubiner coefficients T^T L^{-1} T b on one reference element, b = int f phi."""
    lf = to_float(lmat.matrix)
    tf = to_float(t.matrix)
    u_psi = solve_triangular(lf, tf @ load_phi, lower=True)
    return tf.T @ u_psi


def compare(actual: np.ndarray, expected: np.ndarray) -> list[tuple[int, int, object, object]]:
    """Entries where ``actual`` differs from ``expected`` (exact comparison)."""
    return [(i, j, actual[i, j], expected[i, j]) for i, j in np.ndindex(expected.shape) if actual[i, j] != expected[i, j]]


def max_deviation(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.max(np.abs(to_float(actual) - to_float(expected))))
