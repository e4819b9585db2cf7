import time
from fractions import Fraction

import numpy as np
import pytest

from trimass.changebasis import ChangeOfBasis, validate_structure
from trimass.construct import (
    EXPECTED_L,
    EXPECTED_T,
    ConstraintIndexSet,
    ConstructionError,
    P3Construction,
    PseudoMassL,
    compare,
    construct_p3,
    max_deviation,
    reference_projection,
    solve_vertex_rows,
)
from trimass.dubiner import ReferenceBasis, exact_mass_matrix, triangle_rule
from trimass.rational import as_fraction_array, inv, to_float

from helpers import random_interior_points, random_quadratic

F = Fraction


@pytest.fixture(scope="module")
def exact_pair():
    return construct_p3(exact=True)


@pytest.fixture(scope="module")
def mass():
    return exact_mass_matrix(ReferenceBasis(3))


def dubiner_moments(f, rule=None):
    rule = rule or triangle_rule(8)
    phi = ReferenceBasis(3)(rule.r, rule.s)
    return (f(rule.r, rule.s) * rule.weights) @ phi


class TestFullConstruction:
    def test_exact_matches_reference(self, exact_pair):
        lmat, t = exact_pair
        assert compare(lmat.matrix, EXPECTED_L) == []
        assert compare(t.matrix, EXPECTED_T) == []

    def test_float_within_tolerance(self):
        lmat, t = construct_p3(exact=False)
        assert max_deviation(lmat.matrix, EXPECTED_L) <= 1e-12
        assert max_deviation(t.matrix, EXPECTED_T) <= 1e-12

    def test_fast(self):
        t0 = time.perf_counter()
        construct_p3(exact=True)
        assert time.perf_counter() - t0 < 1.0

    def test_corner_entries(self, exact_pair):
        lmat, t = exact_pair
        assert lmat.matrix[0, 0] == F(1, 30) and lmat.matrix[9, 9] == F(1, 1260)
        assert t.matrix[1, 9] == F(21, 4) and t.matrix[3, 9] == F(-7, 2)

    def test_defining_equations_with_dense_inverse(self, exact_pair, mass):
        """L (T^-1_{i,:})^T = T M e_i for every i of degree <= 2, checked with a generic inverse."""
        lmat, t = exact_pair
        mu = ConstraintIndexSet.for_degree(3).zero_based
        tinv = inv(t.matrix)
        assert (lmat.matrix @ tinv[mu, :].T == (t.matrix @ mass)[:, mu]).all()

    def test_structure(self, exact_pair):
        lmat, t = exact_pair
        assert lmat.pattern_violations() == []
        assert lmat.symmetry_violations() == []
        assert validate_structure(t) is None
        assert all(lmat.matrix[i, i] != 0 for i in range(10))

    def test_named_entries(self, exact_pair):
        named = exact_pair[0].named
        assert named["v"] == F(1, 30)
        assert (named["e1"], named["e1o"], named["e1-"], named["e1+"]) == (F(1, 90), F(-1, 180), F(1, 360), F(1, 360))
        assert (named["e2"], named["e2o"], named["e21+"], named["e21-"]) == (1, 0, F(1, 210), F(-1, 210))
        assert named["i1"] == F(1, 1260)

    def test_edge_order_independence(self, exact_pair):
        for order in [(2, 0, 1), (1, 2, 0), (2, 1, 0)]:
            lmat, t = construct_p3(edge_order=order)
            assert (lmat.matrix == exact_pair[0].matrix).all()
            assert (t.matrix == exact_pair[1].matrix).all()


class TestStages:
    def test_constraint_set(self):
        assert ConstraintIndexSet.for_degree(3).mu == (1, 2, 3, 4, 5, 6)

    def test_vertex_rows_p3(self):
        rows, v = solve_vertex_rows(3)
        assert v == F(1, 30)
        assert list(rows[0]) == [1, 0, 0, 0, F(-9, 4), F(-9, 4), 0, F(-7, 12), F(7, 12), 0]
        assert (rows == EXPECTED_T[:3]).all()

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_vertex_rows_satisfy_equations(self, p):
        rows, v = solve_vertex_rows(p)
        basis = ReferenceBasis(p)
        m = exact_mass_matrix(basis)
        mu = basis.degree_at_most(p - 1)
        assert len(mu) == p * (p + 1) // 2
        t = as_fraction_array(np.eye(basis.dim))
        t[:3] = rows
        tinv = inv(t)
        for row in range(3):
            lhs = np.array([v * tinv[i, row] for i in mu], dtype=object)
            assert (lhs == (rows[row] @ m)[mu]).all()

    def test_vertex_rows_p2_value(self):
        _, v = solve_vertex_rows(2)
        assert v == F(1, 9)

    def test_vertex_rows_float_p5(self):
        rows, v = solve_vertex_rows(5, exact=False)
        assert v > 0 and np.isfinite(rows).all()

    def test_first_edge_rows(self):
        c = P3Construction().solve_vertex_rows().solve_first_edge_rows()
        assert list(c.L[3, :4]) == [F(-1, 180), F(1, 360), F(1, 360), F(1, 90)]
        assert c.T[3, 6] == 0 and c.T[3, 9] == F(-7, 2)

    def test_second_edge_rows(self):
        c = P3Construction().solve_vertex_rows().solve_first_edge_rows().solve_second_edge_rows()
        assert list(c.L[6]) == [0, F(157, 280), F(-157, 280), 0, F(1, 210), F(-1, 210), 1, 0, 0, 0]
        assert (c.T[6, 9], c.T[7, 9], c.T[8, 9]) == (0, 3, -3)

    def test_interior_row(self, exact_pair, mass):
        lmat, t = exact_pair
        m_psi = t.matrix @ mass @ t.matrix.T
        assert list(lmat.matrix[9]) == [F(-1, 2520)] * 3 + [F(1, 2520)] * 3 + [0, 0, 0, F(1, 1260)]
        # the exact psi mass row vanishes against the second edge modes
        assert list(m_psi[9, 6:9]) == [0, 0, 0]

    def test_stage_order_enforced(self):
        with pytest.raises(ConstructionError) as info:
            P3Construction().solve_first_edge_rows()
        assert info.value.stage == "ordering"

    def test_e2_variant(self):
        lmat, t = construct_p3(e2=2)
        assert (t.matrix == EXPECTED_T).all()
        assert list(lmat.matrix[6]) == [0, F(961, 840), F(-961, 840), 0, F(1, 210), F(-1, 210), 2, 0, 0, 0]
        # the couplings move affinely with e2, not proportionally
        assert lmat.matrix[6, 1] - EXPECTED_L[6, 1] == F(7, 12)


class TestExactness:
    def test_degree_two_dubiner_functions(self, exact_pair):
        lmat, t = exact_pair
        basis = ReferenceBasis(3)
        for i in basis.degree_at_most(2):
            f = lambda r, s, i=i: basis(r, s)[..., i]  # noqa: E731
            coeffs = reference_projection(lmat, t, dubiner_moments(f))
            np.testing.assert_allclose(coeffs, np.eye(10)[i], atol=1e-12)

    def test_random_quadratics(self, exact_pair):
        lmat, t = exact_pair
        rng = np.random.default_rng(0)
        basis = ReferenceBasis(3)
        r, s = random_interior_points(50, seed=1)
        phi = basis(r, s)
        for _ in range(100):
            _, f = random_quadratic(rng)
            coeffs = reference_projection(lmat, t, dubiner_moments(f))
            assert np.abs(phi @ coeffs - f(r, s)).max() <= 1e-11

    def test_e2_variant_stays_exact(self):
        lmat, t = construct_p3(e2=2)
        _, f = random_quadratic(np.random.default_rng(3))
        r, s = random_interior_points(20)
        coeffs = reference_projection(lmat, t, dubiner_moments(f))
        assert np.abs(ReferenceBasis(3)(r, s) @ coeffs - f(r, s)).max() <= 1e-11

    def test_not_cubic_exact(self, exact_pair):
        lmat, t = exact_pair
        basis = ReferenceBasis(3)
        f = lambda r, s: basis(r, s)[..., 6]  # noqa: E731  edge A mode 2, degree 3
        coeffs = reference_projection(lmat, t, dubiner_moments(f))
        rule = triangle_rule(6)
        err = np.sqrt(rule.integrate(lambda r, s: (basis(r, s) @ coeffs - f(r, s)) ** 2))
        assert err > 1e-6


def test_float_pair_wraps():
    lmat = PseudoMassL(to_float(EXPECTED_L))
    t = ChangeOfBasis(3, to_float(EXPECTED_T))
    assert lmat.as_float().matrix.dtype == float and t.as_float().matrix.dtype == float
