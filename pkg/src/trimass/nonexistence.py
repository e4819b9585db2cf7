"""Numerical certificate that no (p-1)-exact diagonal pseudo-mass matrix exists.

Indices here are 1-based positions in the BY_EDGE ordering: vertices
1..3, edge A modes 4..p+2, edge B modes p+3..2p+1, edge C modes 2p+2..3p,
then the interior functions.

For a diagonal D to be (p-1)-exact, the fourth basis function
psi_EA1 = sum_j a_j phi_EAj + sum_k c_k phi_Ik must satisfy
C [a; c] = 0, where C pairs every constraining function that forces a
zero right-hand side (the ``mu0`` set) with the EA / interior family. A
nonsingular C forces a = c = 0, so T would be singular.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dubiner import (
    Ordering,
    PHI_A,
    PHI_B,
    PHI_C,
    ReferenceBasis,
    TriangleQuadrature,
    dim_space,
    hatted_mu0_basis,
    hatted_star_basis,
    triangle_rule,
)
from .changebasis import structure_masks
from .rational import gram, inv, rank, to_float

P_MAX_DEFAULT = 7
SV_RELATIVE_THRESHOLD = 1e-10


def _span(lo: int, hi: int) -> list[int]:
    return list(range(lo, hi + 1))


@dataclass(frozen=True)
class IndexSets:
    p: int
    mu: list
    mu0: list


def index_sets(p: int) -> IndexSets:
    """Constraining indices ``mu`` (degree <= p - 1) and the zero-forcing subset ``mu0``."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    interior = _span(3 * p + 1, 3 * p + (p - 2) * (p - 3) // 2)
    edge_bc = _span(p + 3, 2 * p) + _span(2 * p + 2, 3 * p - 1)
    mu = _span(1, 3) + _span(4, p + 1) + edge_bc + interior
    mu0 = [1] + edge_bc + interior
    return IndexSets(p, mu, mu0)


def star_indices(p: int) -> list[int]:
    """Edge-A modes and all interiors: the unknown entries of the fourth row of T."""
    return _span(4, p + 2) + _span(3 * p + 1, dim_space(p))


def structural_zero_rows(p: int, column: int = 4) -> list[int]:
    """Rows where ``column`` of T^{-1} vanishes for every structure-respecting T.

    The structural pattern of an inverse with nonzero diagonal is the
    transitive closure of the pattern's directed graph.
    """
    allowed, _ = structure_masks(p, Ordering.BY_EDGE)
    reach = allowed | np.eye(len(allowed), dtype=bool)
    while True:
        nxt = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
        if (nxt == reach).all():
            break
        reach = nxt
    return [int(i) + 1 for i in np.flatnonzero(~reach[:, column - 1])]


def _check_rule(rule: TriangleQuadrature | None, degree: int) -> TriangleQuadrature:
    rule = rule or triangle_rule(degree // 2 + 1)
    if rule.exactness_degree < degree:
        raise ValueError(f"quadrature exact to degree {rule.exactness_degree}, need {degree}")
    return rule


def constraint_matrix(p: int, rule: TriangleQuadrature | None = None, exact: bool = False) -> np.ndarray:
    """C[i, k] = int phi_i phi_k for i in mu0 and k in the edge-A/interior family."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    basis = ReferenceBasis(p, Ordering.BY_EDGE)
    rows = [i - 1 for i in index_sets(p).mu0]
    cols = [k - 1 for k in star_indices(p)]
    if exact:
        polys = basis.polynomials
        return gram([polys[i] for i in rows], [polys[k] for k in cols])
    rule = _check_rule(rule, 2 * p)
    vals = basis(rule.r, rule.s)
    return (vals[:, rows] * rule.weights[:, None]).T @ vals[:, cols]


def hatted_gram(p: int, rule: TriangleQuadrature | None = None, exact: bool = False) -> np.ndarray:
    """M_hat = int phi_A phi_B phi_C phi_hat_* phi_hat_*^T."""
    fam = hatted_star_basis(p)
    if exact:
        bubble = PHI_A * PHI_B * PHI_C
        return gram([bubble * q for q in fam.polynomials], list(fam.polynomials))
    rule = _check_rule(rule, 2 * p)
    vals = fam(rule.r, rule.s)
    bubble = (1 + rule.s) / 2 * -(rule.r + rule.s) / 2 * (1 + rule.r) / 2
    m = (vals * (rule.weights * bubble)[:, None]).T @ vals
    return m


def compute_H(p: int, rule: TriangleQuadrature | None = None, exact: bool = False) -> np.ndarray:
    """H with phi_hat_mu0 = H phi_hat_*, from plain L2 Gram matrices."""
    mu0 = hatted_mu0_basis(p)
    star = hatted_star_basis(p)
    if exact:
        cross = gram(list(mu0.polynomials), list(star.polynomials))
        g = gram(list(star.polynomials))
        return cross @ inv(g)
    rule = _check_rule(rule, 2 * p)
    a = mu0(rule.r, rule.s)
    b = star(rule.r, rule.s)
    cross = (a * rule.weights[:, None]).T @ b
    g = (b * rule.weights[:, None]).T @ b
    return scipy.linalg.solve(g, cross.T, assume_a="pos").T


def reconstruction_residual(p: int, h: np.ndarray, n_points: int = 100, seed: int = 0) -> float:
    """max |phi_hat_mu0 - H phi_hat_*| over random interior points."""
    rng = np.random.default_rng(seed)
    r, s = rng.uniform(-1, 1, (2, n_points))
    flip = r + s > 0
    r[flip], s[flip] = -s[flip], -r[flip]
    a = hatted_mu0_basis(p)(r, s)
    b = hatted_star_basis(p)(r, s)
    return float(np.max(np.abs(a - b @ to_float(h).T)))


def _exact_spd(m: np.ndarray) -> bool:
    """Exact LDL^T: all pivots positive."""
    a = np.array(m, dtype=object, copy=True)
    n = a.shape[0]
    for k in range(n):
        if a[k, k] <= 0:
            return False
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] = a[i, k:] - f * a[k, k:]
    return True


@dataclass
class Certificate:
    p: int
    size_mu0: int
    size_unknowns: int
    min_sv_c: float
    norm_c: float
    mhat_min_eig: float
    mhat_spd: bool
    mhat_asymmetry: float
    h_min_sv: float
    h_residual: float
    factorization_error: float
    null_dim: int
    null_solution_norm: float
    exact: bool = False
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def sv_threshold(self) -> float:
        return SV_RELATIVE_THRESHOLD * self.norm_c

    def csv_line(self) -> str:
        return f"{self.p},{'pass' if self.passed else 'fail'},{self.min_sv_c:.6e},{self.mhat_min_eig:.6e}"

    def text(self) -> str:
        status = "PASS" if self.passed else "FAILED"
        lines = [
            f"certificate p={self.p} ({'exact' if self.exact else 'float'}): {status}",
            f"  |mu0| = {self.size_mu0}, unknowns in row 4 of T = {self.size_unknowns}",
            f"  C: min singular value {self.min_sv_c:.6e}, ||C||_2 {self.norm_c:.6e}, threshold {self.sv_threshold:.3e}",
            f"  M_hat: min eigenvalue {self.mhat_min_eig:.6e}, SPD {self.mhat_spd}, asymmetry {self.mhat_asymmetry:.1e}",
            f"  H: min singular value {self.h_min_sv:.6e}, reconstruction residual {self.h_residual:.1e}",
            f"  max |C - H M_hat| = {self.factorization_error:.1e}",
            f"  null space of C: dimension {self.null_dim}, least-squares solution norm {self.null_solution_norm:.1e}",
        ]
        if self.passed:
            lines.append("  only solution of C x = 0 is x = 0: no (p-1)-exact diagonal pseudo-mass matrix exists")
        else:
            lines += [f"  FAILED: {msg}" for msg in self.failures]
        return "\n".join(lines)


def certify(p: int, exact: bool = False) -> Certificate:
    """Build C, M_hat and H for degree p and check that C is nonsingular."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    sets = index_sets(p)
    n_unknowns = len(star_indices(p))
    failures = []
    if len(sets.mu0) != p * (p - 1) // 2 or n_unknowns != len(sets.mu0):
        failures.append(f"system not square: |mu0|={len(sets.mu0)}, unknowns={n_unknowns}")

    c = constraint_matrix(p, exact=exact)
    mhat = hatted_gram(p, exact=exact)
    h = compute_H(p, exact=exact)
    cf, mf, hf = to_float(c), to_float(mhat), to_float(h)

    svals = scipy.linalg.svdvals(cf)
    norm_c, min_sv = float(svals[0]), float(svals[-1])
    asym = float(np.max(np.abs(mf - mf.T)))
    eig = float(np.linalg.eigvalsh((mf + mf.T) / 2)[0])
    if exact:
        spd = _exact_spd(mhat)
        full_rank = rank(c) == c.shape[0]
        fact_err = 0.0 if (c == h @ mhat).all() else float(np.max(np.abs(cf - hf @ mf)))
    else:
        try:
            np.linalg.cholesky(mf)
            spd = True
        except np.linalg.LinAlgError:
            spd = False
        full_rank = min_sv > SV_RELATIVE_THRESHOLD * norm_c
        fact_err = float(np.max(np.abs(cf - hf @ mf)))
    null_dim = scipy.linalg.null_space(cf, rcond=SV_RELATIVE_THRESHOLD).shape[1]
    x, *_ = np.linalg.lstsq(cf, np.zeros(cf.shape[0]), rcond=None)

    if not full_rank:
        failures.append(f"C is singular: min singular value {min_sv:.3e} <= {SV_RELATIVE_THRESHOLD:.0e} * {norm_c:.3e}")
    if not spd or eig <= 0:
        failures.append(f"M_hat is not SPD: min eigenvalue {eig:.3e}")
    if asym > 1e-13 * max(1.0, float(np.max(np.abs(mf)))):
        failures.append(f"M_hat is not symmetric: {asym:.3e}")
    if fact_err > 1e-10:
        failures.append(f"C differs from H M_hat by {fact_err:.3e}")
    h_sv = scipy.linalg.svdvals(hf)
    if h_sv[-1] <= SV_RELATIVE_THRESHOLD * h_sv[0]:
        failures.append(f"H is singular: min singular value {h_sv[-1]:.3e}")
    resid = reconstruction_residual(p, h)
    if resid > 1e-10:
        failures.append(f"H does not reconstruct the mu0 family: residual {resid:.3e}")
    zero_rows = set(structural_zero_rows(p))
    if not set(sets.mu0) <= zero_rows:
        failures.append(f"mu0 rows {sorted(set(sets.mu0) - zero_rows)} are not structural zeros of T^-1 column 4")

    return Certificate(
        p=p,
        size_mu0=len(sets.mu0),
        size_unknowns=n_unknowns,
        min_sv_c=min_sv,
        norm_c=norm_c,
        mhat_min_eig=eig,
        mhat_spd=spd,
        mhat_asymmetry=asym,
        h_min_sv=float(h_sv[-1]),
        h_residual=resid,
        factorization_error=fact_err,
        null_dim=null_dim,
        null_solution_norm=float(np.linalg.norm(x)),
        exact=exact,
        failures=failures,
    )
