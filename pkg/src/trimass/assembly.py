"""Global degrees of freedom, assembly of L and T, the staged solve and L2 projection.

Global dofs are numbered stage by stage: vertices, then mode 1 of every
edge, mode 2 of every edge, ..., then interiors element by element. With
that numbering the assembled pseudo-mass matrix is lower triangular with a
diagonal block per stage, so ``L u = b`` is solved by one diagonal division
per stage after moving the already known couplings to the right-hand side.

Each edge has a canonical direction (lower to higher vertex id). An element
whose local edge runs the other way multiplies its local edge mode m by
(-1)^(m-1) so that traces agree across the edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .changebasis import ChangeOfBasis, eval_psi
from .construct import PseudoMassL
from .dubiner import (
    Kind,
    Ordering,
    ReferenceBasis,
    TriangleQuadrature,
    VERTICES,
    EDGE_ENDPOINTS,
    basis_indices,
    mass_matrix,
    triangle_rule,
)
from .mesh import Mesh, build_structured_mesh
from .rational import SingularMatrixError, to_float

TRACE_TOL = 1e-10
TRACE_SAMPLES = 10
T_CONSISTENCY_TOL = 1e-12

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class AssemblyError(RuntimeError):
    pass


def default_quadrature(p: int) -> TriangleQuadrature:
    """q = p + 3 points per direction, so quadrature error stays far below projection error."""
    return triangle_rule(p + 3)


@dataclass(frozen=True)
class DofMap:
    """Local-to-global dof numbering.

    Attributes
    ----------
    global_ids : (nT, dim) int array; column order is the BY_MODE local ordering
    signs : (nT, dim) float array of +-1 orientation factors
    stage_bounds : tuple of int
        Start of each stage and the total count: vertices, edge modes
        1..p-1, interiors.
    """

    p: int
    global_ids: np.ndarray
    signs: np.ndarray
    edge_canonical: np.ndarray
    stage_bounds: tuple

    @property
    def n_dofs(self) -> int:
        return self.stage_bounds[-1]

    @property
    def counts(self) -> dict:
        b = self.stage_bounds
        out = {"n_vertex": b[1] - b[0]}
        for m in range(1, self.p):
            out[f"n_edge{m}"] = b[m + 1] - b[m]
        out["n_interior"] = b[-1] - b[-2]
        return out

    def stage_of(self, dof) -> np.ndarray:
        return np.searchsorted(np.asarray(self.stage_bounds), dof, side="right") - 1


def build_dofmap(mesh: Mesh, p: int = 3) -> DofMap:
    nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    idx = basis_indices(p, Ordering.BY_MODE)
    n_int = sum(ix.kind is Kind.INTERIOR for ix in idx)
    canonical = mesh.edge_orientation()
    ids = np.empty((nt, len(idx)), dtype=np.int64)
    signs = np.ones((nt, len(idx)))
    edge_base = nv
    int_base = nv + (p - 1) * ne
    k_int = 0
    for col, ix in enumerate(idx):
        if ix.kind is Kind.VERTEX:
            ids[:, col] = mesh.triangles[:, ix.entity]
        elif ix.kind is Kind.EDGE:
            ids[:, col] = edge_base + (ix.mode - 1) * ne + mesh.triangle_edges[:, ix.entity]
            if ix.mode % 2 == 0:
                signs[:, col] = np.where(canonical[:, ix.entity], 1.0, -1.0)
        else:
            ids[:, col] = int_base + np.arange(nt) * n_int + k_int
            k_int += 1
    bounds = (0, nv) + tuple(nv + m * ne for m in range(1, p)) + (int_base + nt * n_int,)
    return DofMap(p, ids, signs, canonical, bounds)


@dataclass
class GlobalSystem:
    """Assembled pseudo-mass matrix L and change of basis T.

    ``L`` is CSR and lower triangular in the staged numbering; ``T`` maps
    global Dubiner coefficients to the continuous psi basis.
    """

    mesh: Mesh
    L: sp.csr_matrix
    T: sp.csr_matrix
    dof: DofMap
    elem_L: np.ndarray
    elem_T: np.ndarray
    quadrature: TriangleQuadrature

    @property
    def p(self) -> int:
        return self.dof.p


def _scatter_pairs(dof: DofMap, local: np.ndarray, scale: np.ndarray):
    """COO triplets of sum_k scale_k * S_k local S_k over nonzero local entries."""
    a, b = np.nonzero(local)
    rows = dof.global_ids[:, a]
    cols = dof.global_ids[:, b]
    vals = scale[:, None] * dof.signs[:, a] * dof.signs[:, b] * local[a, b][None, :]
    return rows.ravel(), cols.ravel(), vals.ravel()


def assemble(
    mesh: Mesh,
    elem_l: PseudoMassL,
    elem_t: ChangeOfBasis,
    quadrature: TriangleQuadrature | None = None,
    check: bool = True,
) -> GlobalSystem:
    """Assemble global L (summed) and T (assigned, checked for consistency)."""
    if elem_t.ordering is not Ordering.BY_MODE:
        elem_t = elem_t.reorder(Ordering.BY_MODE)
    p = elem_t.p
    lref = to_float(elem_l.matrix)
    tref = to_float(elem_t.matrix)
    dof = build_dofmap(mesh, p)
    n = dof.n_dofs

    rows, cols, vals = _scatter_pairs(dof, lref, mesh.jacobian_determinants)
    lmat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    lmat.sum_duplicates()

    rows, cols, vals = _scatter_pairs(dof, tref, np.ones(mesh.n_triangles))
    tmat = _assign_consistent(rows, cols, vals, n)

    system = GlobalSystem(mesh, lmat, tmat, dof, lref, tref, quadrature or default_quadrature(p))
    if check:
        check_staged_structure(system)
        mismatch = trace_mismatch(mesh, dof, elem_t.as_float())
        if mismatch > TRACE_TOL:
            raise AssemblyError(f"orientation inconsistency: traces differ by {mismatch:.3e} on a shared edge")
    return system


def _assign_consistent(rows, cols, vals, n) -> sp.csr_matrix:
    keys = rows * n + cols
    order = np.argsort(keys, kind="stable")
    keys, vals = keys[order], vals[order]
    uniq, start = np.unique(keys, return_index=True)
    hi = np.maximum.reduceat(vals, start)
    lo = np.minimum.reduceat(vals, start)
    spread = hi - lo
    scale = np.maximum(1.0, np.abs(hi))
    if np.any(spread > T_CONSISTENCY_TOL * scale):
        k = int(np.argmax(spread / scale))
        raise AssemblyError(
            f"elements disagree on T at global ({uniq[k] // n + 1},{uniq[k] % n + 1}): {lo[k]} vs {hi[k]}"
        )
    keep = hi != 0
    return sp.csr_matrix((hi[keep], (uniq[keep] // n, uniq[keep] % n)), shape=(n, n))


def check_staged_structure(system: GlobalSystem) -> None:
    """Every coupling points to an earlier stage, and each stage block is diagonal."""
    coo = system.L.tocoo()
    si = system.dof.stage_of(coo.row)
    sj = system.dof.stage_of(coo.col)
    bad = (sj > si) | ((sj == si) & (coo.row != coo.col))
    bad &= coo.data != 0
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise AssemblyError(
            f"L breaks the staged structure at ({coo.row[k] + 1},{coo.col[k] + 1}): "
            f"stage {si[k]} row couples to stage {sj[k]}"
        )


def _edge_reference_points(k: int, forward: bool, t: np.ndarray):
    a, b = EDGE_ENDPOINTS[k]
    if not forward:
        a, b = b, a
    w = (1 + t) / 2
    pts = (1 - w)[:, None] * VERTICES[a] + w[:, None] * VERTICES[b]
    return pts[:, 0], pts[:, 1]


def trace_mismatch(mesh: Mesh, dof: DofMap, elem_t: ChangeOfBasis, n_samples: int = TRACE_SAMPLES) -> float:
    """Largest disagreement between the two elements' traces of each global psi on shared edges.

    Samples run along each edge in its canonical direction; every global
    function supported on the edge (its two vertices and its edge modes) is
    evaluated from both sides.
    """
    t = np.cos(np.pi * (np.arange(n_samples) + 0.5) / n_samples)[::-1]
    # psi values along local edge k, in canonical or reversed direction
    table = {}
    for k in range(3):
        for fwd in (True, False):
            r, s = _edge_reference_points(k, fwd, t)
            table[k, fwd] = eval_psi(elem_t, r, s)
    inner = mesh.interior_edges
    if len(inner) == 0:
        return 0.0
    idx = basis_indices(dof.p, Ordering.BY_MODE)
    traces = []
    for side in range(2):
        tri = mesh.edge_triangles[inner, side]
        local_k = np.argmax(mesh.triangle_edges[tri] == inner[:, None], axis=1)
        fwd = dof.edge_canonical[tri, local_k]
        vals = np.empty((len(inner), n_samples, len(idx)))
        for k in range(3):
            for f in (True, False):
                sel = (local_k == k) & (fwd == f)
                vals[sel] = table[k, f][None]
        vals *= dof.signs[tri][:, None, :]
        gids = dof.global_ids[tri]
        traces.append((vals, gids))
    (v0, g0), (v1, g1) = traces
    # compare columns with matching global ids; unmatched columns must vanish on the edge
    match = g0[:, :, None] == g1[:, None, :]
    has = match.any(axis=2)
    j1 = np.argmax(match, axis=2)
    v1_aligned = np.take_along_axis(v1, j1[:, None, :], axis=2)
    diff = np.where(has[:, None, :], v0 - v1_aligned, v0)
    worst = float(np.abs(diff).max())
    has1 = (g1[:, :, None] == g0[:, None, :]).any(axis=2)
    lone1 = np.where(has1[:, None, :], 0.0, v1)
    worst = max(worst, float(np.abs(lone1).max()))
    return worst


def assemble_load(system: GlobalSystem, f: Field, rule: TriangleQuadrature | None = None) -> np.ndarray:
    """Global right-hand side T int f phi, assembled element by element."""
    rule = rule or system.quadrature
    moments = _element_moments(system.mesh, system.p, f, rule)
    local = moments @ system.elem_T.T
    return _scatter_vector(system.dof, local)


def _element_moments(mesh: Mesh, p: int, f: Field, rule: TriangleQuadrature) -> np.ndarray:
    """(nT, dim) Dubiner moments det(J_k) int_ref f(x_k(r, s)) phi(r, s)."""
    phi = ReferenceBasis(p, Ordering.BY_MODE)(rule.r, rule.s)
    x, y = mesh.to_physical(rule.r, rule.s)
    fv = np.asarray(f(x, y), dtype=float) * np.ones_like(x)
    return mesh.jacobian_determinants[:, None] * ((fv * rule.weights) @ phi)


def _scatter_vector(dof: DofMap, local: np.ndarray) -> np.ndarray:
    return np.bincount(dof.global_ids.ravel(), weights=(dof.signs * local).ravel(), minlength=dof.n_dofs)


def staged_solve(system: GlobalSystem, b: np.ndarray) -> np.ndarray:
    """Solve L u = b one stage at a time: vertices, each edge mode, interiors."""
    lmat = system.L
    b = np.asarray(b, dtype=float)
    if b.shape != (lmat.shape[0],):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({lmat.shape[0]},)")
    diag = lmat.diagonal()
    zero = np.flatnonzero(diag == 0)
    if len(zero):
        raise SingularMatrixError(f"L has a zero diagonal at global dof {zero[0] + 1}")
    u = np.zeros_like(b)
    bounds = system.dof.stage_bounds
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi == lo:
            continue
        rhs = b[lo:hi] - lmat[lo:hi, :lo] @ u[:lo]
        u[lo:hi] = rhs / diag[lo:hi]
    return u


@dataclass
class Projection:
    """Result of an L2-type projection; callable as u_h(x, y)."""

    mesh: Mesh
    dof: DofMap
    u_phi: np.ndarray
    u_psi: np.ndarray | None = None

    @property
    def element_coefficients(self) -> np.ndarray:
        """(nT, dim) local Dubiner coefficients."""
        return self.u_phi[self.dof.global_ids] * self.dof.signs

    def on_element(self, r, s) -> np.ndarray:
        """u_h at the same reference points on every element: shape (nT,) + r.shape."""
        phi = ReferenceBasis(self.dof.p, Ordering.BY_MODE)(r, s)
        return np.einsum("...d,kd->k...", phi, self.element_coefficients)

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(x, np.asarray(y)).shape
        elem, r, s = self.mesh.locate(*np.broadcast_arrays(x, y))
        phi = ReferenceBasis(self.dof.p, Ordering.BY_MODE)(r, s)
        vals = np.einsum("nd,nd->n", phi, self.element_coefficients[elem])
        return vals.reshape(shape)

    def max_jump(self, n_samples: int = TRACE_SAMPLES) -> float:
        """Largest difference between the two one-sided traces of u_h on interior edges."""
        mesh = self.mesh
        inner = mesh.interior_edges
        if len(inner) == 0:
            return 0.0
        t = np.linspace(-1, 1, n_samples)
        coef = self.element_coefficients
        basis = ReferenceBasis(self.dof.p, Ordering.BY_MODE)
        sides = []
        for side in range(2):
            tri = mesh.edge_triangles[inner, side]
            local_k = np.argmax(mesh.triangle_edges[tri] == inner[:, None], axis=1)
            fwd = self.dof.edge_canonical[tri, local_k]
            vals = np.empty((len(inner), n_samples))
            for k in range(3):
                for f in (True, False):
                    sel = (local_k == k) & (fwd == f)
                    if sel.any():
                        r, s = _edge_reference_points(k, f, t)
                        vals[sel] = coef[tri[sel]] @ basis(r, s).T
            sides.append(vals)
        return float(np.abs(sides[0] - sides[1]).max())

    def write_csv(self, path) -> None:
        lines = ["dof_id,coefficient"] + [f"{k + 1},{c!r}" for k, c in enumerate(self.u_phi.tolist())]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def to_phi(system: GlobalSystem, u_psi: np.ndarray) -> np.ndarray:
    """u_phi = T^T u_psi, computed element by element and checked for consistency."""
    dof = system.dof
    local_psi = u_psi[dof.global_ids] * dof.signs
    local_phi = local_psi @ system.elem_T
    u = np.zeros(dof.n_dofs)
    glob = local_phi * dof.signs
    u[dof.global_ids.ravel()] = glob.ravel()
    spread = np.abs(u[dof.global_ids] - glob).max()
    if spread > 1e-10 * max(1.0, np.abs(u).max()):
        raise AssemblyError(f"elements disagree on shared Dubiner coefficients by {spread:.3e}")
    return u


def project(
    system: GlobalSystem, f: Field, rule: TriangleQuadrature | None = None
) -> Projection:
    """u_phi = T^T L^{-1} T int f phi: load assembly, staged solve, local back-transform."""
    b = assemble_load(system, f, rule)
    u_psi = staged_solve(system, b)
    return Projection(system.mesh, system.dof, to_phi(system, u_psi), u_psi)


def exact_mass_project(
    mesh: Mesh, f: Field, p: int = 3, rule: TriangleQuadrature | None = None
) -> Projection:
    """True L2 projection with the assembled Dubiner mass matrix (baseline)."""
    rule = rule or default_quadrature(p)
    dof = build_dofmap(mesh, p)
    mref = mass_matrix(ReferenceBasis(p, Ordering.BY_MODE), triangle_rule(p + 1))
    mref = np.where(np.abs(mref) < 1e-15 * np.abs(mref).max(), 0.0, mref)
    rows, cols, vals = _scatter_pairs(dof, mref, mesh.jacobian_determinants)
    mass = sp.csc_matrix((vals, (rows, cols)), shape=(dof.n_dofs,) * 2)
    b = _scatter_vector(dof, _element_moments(mesh, p, f, rule))
    u = scipy.sparse.linalg.spsolve(mass, b)
    if not np.all(np.isfinite(u)):
        raise AssemblyError("sparse solve of the mass matrix failed")
    return Projection(mesh, dof, u)


def l2_error(
    mesh: Mesh, uh, f: Field, rule: TriangleQuadrature | None = None, p: int = 3
) -> float:
    """sqrt(int (f - u_h)^2) by element quadrature.

    ``uh`` is a ``Projection`` (evaluated element-wise) or any callable u_h(x, y).
    """
    rule = rule or default_quadrature(p)
    x, y = mesh.to_physical(rule.r, rule.s)
    vals = uh.on_element(rule.r, rule.s) if isinstance(uh, Projection) else np.asarray(uh(x, y))
    err = (np.asarray(f(x, y), dtype=float) - vals) ** 2
    total = float(np.sum(mesh.jacobian_determinants * (err @ rule.weights)))
    return math.sqrt(max(total, 0.0))


def table_function(x, y):
    """1 + cos(pi x) + sin(pi y)."""
    return 1 + np.cos(np.pi * x) + np.sin(np.pi * y)


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    n: int
    h: float
    error: float
    slope: float | None
    baseline_error: float | None = None


def convergence_study(
    elem_l: PseudoMassL,
    elem_t: ChangeOfBasis,
    levels,
    f: Field = table_function,
    rule: TriangleQuadrature | None = None,
    baseline: bool = False,
) -> list[ConvergenceRow]:
    """Errors and log-log slopes over structured meshes with n squares per side."""
    rows: list[ConvergenceRow] = []
    for k, n in enumerate(levels, start=1):
        mesh = build_structured_mesh(n)
        system = assemble(mesh, elem_l, elem_t, rule)
        err = l2_error(mesh, project(system, f), f, system.quadrature, system.p)
        base = None
        if baseline:
            base = l2_error(mesh, exact_mass_project(mesh, f, system.p, rule), f, system.quadrature, system.p)
        slope = None
        if rows and rows[-1].error > 0 and err > 0:
            slope = math.log(err / rows[-1].error) / math.log(mesh.h / rows[-1].h)
        rows.append(ConvergenceRow(k, n, mesh.h, err, slope, base))
    return rows
