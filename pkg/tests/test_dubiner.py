from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from trimass.dubiner import (
    CollapsedPoint,
    DomainError,
    Kind,
    Ordering,
    ReferenceBasis,
    basis_indices,
    collapse,
    dim_space,
    exact_mass_matrix,
    hatted_edge_b_family,
    hatted_mu0_basis,
    hatted_star_basis,
    interior_flat_index,
    interior_pairs,
    mass_matrix,
    triangle_rule,
)
from trimass.rational import gram, monomial_integral

from helpers import edge_points, random_interior_points

R, S = sympy.symbols("r s")


def sympy_triangle_integral(expr):
    return sympy.integrate(sympy.integrate(expr, (R, -1, -S)), (S, -1, 1))


class TestCollapse:
    def test_vertex_b(self):
        assert collapse(-1.0, -1.0) == CollapsedPoint(-1.0, -1.0)

    def test_vertex_c(self):
        assert collapse(1.0, -1.0) == CollapsedPoint(1.0, -1.0)

    def test_centre_of_left_edge(self):
        xi, eta = collapse(-0.5, 0.0)
        assert xi == pytest.approx(0.0) and eta == 0.0

    def test_apex_limit(self):
        assert collapse(-1.0, 1.0) == CollapsedPoint(-1.0, 1.0)

    def test_outside(self):
        with pytest.raises(DomainError):
            collapse(0.5, 0.5)

    def test_vectorized(self):
        r, s = random_interior_points(20)
        xi, eta = collapse(r, s)
        np.testing.assert_allclose(eta, s)
        np.testing.assert_allclose((1 + xi) * (1 - eta) / 2 - 1, r, atol=1e-14)


class TestIndexing:
    @pytest.mark.parametrize("mn,j", [((0, 0), 1), ((1, 0), 2), ((0, 1), 3)])
    def test_flat_index(self, mn, j):
        assert interior_flat_index(*mn) == j

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            interior_flat_index(-1, 0)

    @pytest.mark.parametrize("p", range(3, 9))
    def test_flat_index_bijective(self, p):
        js = [interior_flat_index(*mn) for mn in interior_pairs(p)]
        assert js == list(range(1, (p - 1) * (p - 2) // 2 + 1))

    @pytest.mark.parametrize("p", range(1, 8))
    def test_dimension(self, p):
        assert dim_space(p) == (p + 1) * (p + 2) // 2
        for ordering in Ordering:
            assert len(basis_indices(p, ordering)) == dim_space(p)

    def test_mode_ordering_p3(self):
        labels = [ix.label for ix in basis_indices(3, Ordering.BY_MODE)]
        assert labels == ["A", "B", "C", "EA1", "EB1", "EC1", "EA2", "EB2", "EC2", "I1"]

    def test_edge_ordering_p3(self):
        labels = [ix.label for ix in basis_indices(3, Ordering.BY_EDGE)]
        assert labels == ["A", "B", "C", "EA1", "EA2", "EB1", "EB2", "EC1", "EC2", "I1"]

    @pytest.mark.parametrize("p", range(1, 7))
    def test_permutation_round_trip(self, p):
        a = ReferenceBasis(p, Ordering.BY_MODE)
        b = ReferenceBasis(p, Ordering.BY_EDGE)
        r, s = random_interior_points(5)
        np.testing.assert_array_equal(a(r, s)[..., a.permutation_to(Ordering.BY_EDGE)], b(r, s))
        perm = a.permutation_to(Ordering.BY_EDGE)
        back = b.permutation_to(Ordering.BY_MODE)
        np.testing.assert_array_equal(perm[back], np.arange(a.dim))


class TestEvaluation:
    def test_vertex_values(self):
        basis = ReferenceBasis(3)
        np.testing.assert_allclose(basis(-1.0, 1.0)[:3], [1, 0, 0])
        np.testing.assert_allclose(basis(-1.0, -1.0)[:3], [0, 1, 0])
        np.testing.assert_allclose(basis(1.0, -1.0)[:3], [0, 0, 1])

    def test_edge_a_midpoint(self):
        basis = ReferenceBasis(3)
        assert basis(0.0, -1.0)[3] == pytest.approx(0.25)

    def test_edge_c_sign(self):
        # the (-1)^(m-1) factor makes every edge trace P(t) with t running along the edge
        basis = ReferenceBasis(3, Ordering.BY_EDGE)
        r, s = edge_points(2, 5)
        tA = basis(*edge_points(0, 5))
        tC = basis(r, s)
        np.testing.assert_allclose(tC[:, 7:9], tA[:, 3:5], atol=1e-14)

    @pytest.mark.parametrize("p", range(1, 8))
    def test_matches_exact_polynomials(self, p):
        basis = ReferenceBasis(p)
        r, s = random_interior_points(30, seed=p)
        exact = np.array([[poly(a, b) for poly in basis.polynomials] for a, b in zip(r, s)])
        np.testing.assert_allclose(basis(r, s), exact, atol=5e-13)

    def test_apex_is_finite(self):
        vals = ReferenceBasis(5)(-1.0, 1.0)
        assert np.all(np.isfinite(vals))
        assert vals[0] == 1 and np.allclose(vals[1:], 0)

    @pytest.mark.parametrize("p", range(1, 7))
    def test_traces(self, p):
        basis = ReferenceBasis(p, Ordering.BY_MODE)
        traces = [basis(*edge_points(k)) for k in range(3)]
        vertices = [(-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        for col, ix in enumerate(basis.indices):
            if ix.kind is Kind.VERTEX:
                assert basis(*vertices[ix.entity])[col] == pytest.approx(1.0, abs=1e-14)
                assert np.abs(traces[ix.entity][:, col]).max() <= 1e-12
            elif ix.kind is Kind.EDGE:
                for k in range(3):
                    if k != ix.entity:
                        assert np.abs(traces[k][:, col]).max() <= 1e-12
                assert np.abs(traces[ix.entity][:, col]).max() > 1e-3
            else:
                for k in range(3):
                    assert np.abs(traces[k][:, col]).max() <= 1e-12

    @pytest.mark.parametrize("p", range(1, 8))
    def test_vandermonde_nonsingular(self, p):
        basis = ReferenceBasis(p)
        r, s = random_interior_points(basis.dim, seed=10 + p)
        assert np.isfinite(np.linalg.cond(basis(r, s)))
        assert np.linalg.matrix_rank(basis(r, s)) == basis.dim

    def test_rejects_degree_zero(self):
        with pytest.raises(ValueError):
            ReferenceBasis(0)


class TestQuadrature:
    def test_area(self):
        assert triangle_rule(3).weights.sum() == pytest.approx(2.0, abs=1e-13)

    def test_phi_a_squared(self):
        rule = triangle_rule(3)
        assert rule.integrate(lambda r, s: ((1 + s) / 2) ** 2) == pytest.approx(1 / 3, abs=1e-14)

    def test_phi_a_phi_b(self):
        rule = triangle_rule(3)
        assert rule.integrate(lambda r, s: (1 + s) / 2 * -(r + s) / 2) == pytest.approx(1 / 6, abs=1e-14)

    @pytest.mark.parametrize("q", range(1, 9))
    def test_monomial_exactness(self, q):
        rule = triangle_rule(q)
        assert len(rule.weights) == q * q
        assert rule.exactness_degree >= 2 * q - 2
        for deg in range(rule.exactness_degree + 1):
            for a in range(deg + 1):
                b = deg - a
                exact = float(monomial_integral(a, b))
                scale = float(monomial_integral(2 * (a // 2), 2 * (b // 2))) or 1.0
                got = rule.integrate(lambda r, s: r**a * s**b)
                assert abs(got - exact) <= 1e-12 * max(abs(exact), scale)

    @pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (0, 3), (2, 2), (5, 1), (3, 4)])
    def test_monomial_integral_against_sympy(self, a, b):
        assert monomial_integral(a, b) == Fraction(str(sympy_triangle_integral(R**a * S**b)))


class TestMassMatrix:
    def test_linear_entries(self):
        m = mass_matrix(ReferenceBasis(1))
        assert m[0, 0] == pytest.approx(1 / 3)
        assert m[0, 1] == pytest.approx(1 / 6)

    def test_exact_linear_entries(self):
        m = exact_mass_matrix(ReferenceBasis(1))
        assert m[0, 0] == Fraction(1, 3) and m[0, 1] == Fraction(1, 6)

    @pytest.mark.parametrize("p", range(1, 8))
    def test_spd_and_exact_agreement(self, p):
        basis = ReferenceBasis(p)
        m = mass_matrix(basis)
        np.linalg.cholesky(m)
        np.testing.assert_array_equal(m, m.T)
        np.testing.assert_allclose(m, np.asarray(exact_mass_matrix(basis), dtype=float), atol=1e-14)

    def test_exact_mass_entry_against_sympy(self):
        basis = ReferenceBasis(3, Ordering.BY_MODE)
        m = exact_mass_matrix(basis)
        # phi_EA1 = phi_B phi_C and phi_I1 = phi_A phi_B phi_C
        phi_b, phi_c, phi_a = -(R + S) / 2, (1 + R) / 2, (1 + S) / 2
        assert m[3, 3] == Fraction(str(sympy_triangle_integral((phi_b * phi_c) ** 2)))
        assert m[3, 9] == Fraction(str(sympy_triangle_integral(phi_a * (phi_b * phi_c) ** 2)))

    def test_insufficient_rule(self):
        with pytest.raises(ValueError):
            mass_matrix(ReferenceBasis(4), triangle_rule(3))


class TestFactoredFamilies:
    @pytest.mark.parametrize("p", range(2, 8))
    def test_sizes(self, p):
        assert len(hatted_mu0_basis(p)) == p * (p - 1) // 2
        assert len(hatted_star_basis(p)) == p * (p - 1) // 2

    def test_p3_size(self):
        assert len(hatted_mu0_basis(3)) == 3

    def test_first_edge_a_is_one(self):
        r, s = random_interior_points(10)
        np.testing.assert_allclose(hatted_star_basis(3)(r, s)[:, 0], 1.0)

    @pytest.mark.parametrize("p", range(2, 8))
    def test_factors_reconstruct_basis(self, p):
        """phi_mu0 = phi_A * hat and phi_* = phi_B phi_C * hat."""
        basis = ReferenceBasis(p, Ordering.BY_EDGE)
        r, s = random_interior_points(40, seed=p)
        phi = basis(r, s)
        pa, pb, pc = (1 + s) / 2, -(r + s) / 2, (1 + r) / 2
        mu0 = [0] + list(range(p + 2, 2 * p)) + list(range(2 * p + 1, 3 * p - 1))
        mu0 += list(range(3 * p, 3 * p + (p - 2) * (p - 3) // 2))
        star = list(range(3, p + 2)) + list(range(3 * p, basis.dim))
        np.testing.assert_allclose(pa[:, None] * hatted_mu0_basis(p)(r, s), phi[:, mu0], atol=1e-13)
        np.testing.assert_allclose((pb * pc)[:, None] * hatted_star_basis(p)(r, s), phi[:, star], atol=1e-13)

    @pytest.mark.parametrize("p", range(2, 8))
    def test_exact_and_float_forms_agree(self, p):
        r, s = random_interior_points(20, seed=p)
        for fam in (hatted_mu0_basis(p), hatted_star_basis(p)):
            exact = np.array([[q(a, b) for q in fam.polynomials] for a, b in zip(r, s)])
            np.testing.assert_allclose(fam(r, s), exact, atol=1e-12)

    @pytest.mark.parametrize("p", range(2, 8))
    def test_mu0_gram_nonsingular(self, p):
        g = gram(list(hatted_mu0_basis(p).polynomials))
        assert np.linalg.matrix_rank(np.asarray(g, dtype=float)) == len(g)

    @pytest.mark.parametrize("p", range(2, 6))
    def test_edge_b_family_nonsingular(self, p):
        g = np.asarray(gram(list(hatted_edge_b_family(p).polynomials)), dtype=float)
        assert np.linalg.eigvalsh(g).min() > 0

    def test_rejects_small_p(self):
        for fn in (hatted_mu0_basis, hatted_star_basis, hatted_edge_b_family):
            with pytest.raises(ValueError):
                fn(1)


@settings(max_examples=60, deadline=None)
@given(a=st.integers(0, 6), b=st.integers(0, 6))
def test_exact_monomial_integral_matches_quadrature(a, b):
    rule = triangle_rule(8)
    assert rule.integrate(lambda r, s: r**a * s**b) == pytest.approx(float(monomial_integral(a, b)), abs=1e-13)
