"""Lower-triangular pseudo-mass matrices for C0 triangular finite elements of degree 3.

Modules
-------
jacobi : Jacobi polynomials and Gauss-Jacobi quadrature
dubiner : modified Dubiner basis, collapsed coordinates, triangle quadrature
changebasis : continuity-preserving change of basis T and its block inverse
construct : row-by-row construction of the p=3 pair (L, T)
nonexistence : certificate that no (p-1)-exact diagonal pseudo-mass matrix exists
mesh, assembly : structured meshes, global assembly, staged solve, L2 projection
"""

from .assembly import assemble, exact_mass_project, l2_error, project, staged_solve
from .changebasis import ChangeOfBasis, block_inverse
from .construct import EXPECTED_L, EXPECTED_T, PseudoMassL, construct_p3
from .dubiner import Ordering, ReferenceBasis, eval_dubiner, mass_matrix, triangle_rule
from .jacobi import JacobiParams, gauss_jacobi_rule, jacobi_eval
from .mesh import Mesh, build_structured_mesh, read_mesh, write_mesh
from .nonexistence import certify

__all__ = [
    "ChangeOfBasis",
    "EXPECTED_L",
    "EXPECTED_T",
    "JacobiParams",
    "Mesh",
    "Ordering",
    "PseudoMassL",
    "ReferenceBasis",
    "assemble",
    "block_inverse",
    "build_structured_mesh",
    "certify",
    "construct_p3",
    "eval_dubiner",
    "exact_mass_project",
    "gauss_jacobi_rule",
    "jacobi_eval",
    "l2_error",
    "mass_matrix",
    "project",
    "read_mesh",
    "staged_solve",
    "triangle_rule",
    "write_mesh",
]
