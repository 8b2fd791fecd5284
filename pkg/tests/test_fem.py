import numpy as np
import pytest
import scipy.sparse as sp

import eimrb as er
from eimrb.fem import triangle_quadrature

from conftest import quad_l2_error


def manufactured_rhs(xy):
    return 2 * np.pi**2 * np.sin(np.pi * xy[:, 0]) * np.sin(np.pi * xy[:, 1])


def manufactured_exact(xy):
    return np.sin(np.pi * xy[:, 0]) * np.sin(np.pi * xy[:, 1])


def poisson_solve(n, degree, rhs):
    space = er.build_space(er.build_mesh(n), degree)
    op, vec = er.apply_dirichlet(space, er.assemble_stiffness(space),
                                 er.assemble_load(space, rhs))
    return space, er.solve_sparse(op, vec)


class TestMesh:
    def test_minimal_split(self):
        m = er.build_mesh(1)
        assert m.n_triangles == 2
        assert len(m.vertices) == 4

    def test_counts_n4(self):
        m = er.build_mesh(4)
        assert m.n_triangles == 32
        assert len(m.vertices) == 25

    def test_partition_of_unity_area(self):
        m = er.build_mesh(32)
        assert abs(m.triangle_areas().sum() - 1.0) <= 1e-12

    def test_positive_areas(self):
        assert np.all(er.build_mesh(7).triangle_areas() > 0)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            er.build_mesh(0)


class TestSpace:
    @pytest.mark.parametrize("degree,ndof", [(1, 25), (2, 81), (3, 169)])
    def test_dof_counts(self, degree, ndof):
        space = er.build_space(er.build_mesh(4), degree)
        assert space.ndof == ndof

    def test_rejects_degree(self):
        with pytest.raises(ValueError):
            er.build_space(er.build_mesh(4), 4)

    def test_boundary_dofs_match_coords(self, space8):
        xy = space8.dof_coords
        on_bd = ((np.abs(xy[:, 0]) <= 1e-12) | (np.abs(xy[:, 0] - 1) <= 1e-12)
                 | (np.abs(xy[:, 1]) <= 1e-12) | (np.abs(xy[:, 1] - 1) <= 1e-12))
        assert np.array_equal(np.flatnonzero(on_bd), space8.boundary_dofs)

    def test_quadrature_exactness(self):
        # integrate x^a y^b over the reference triangle against the closed form
        from math import factorial
        pts, wts = triangle_quadrature(6)
        for a in range(4):
            for b in range(4 - a):
                approx = wts @ (pts[:, 0] ** a * pts[:, 1] ** b)
                exact = factorial(a) * factorial(b) / factorial(a + b + 2)
                assert abs(approx - exact) <= 1e-14


class TestStiffness:
    def test_row_sums_vanish(self, space8):
        a = er.assemble_stiffness(space8)
        assert np.abs(np.asarray(a.sum(axis=1))).max() <= 1e-12

    def test_positive_semidefinite(self, space8):
        a = er.assemble_stiffness(space8)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.standard_normal(space8.ndof)
            assert x @ (a @ x) >= -1e-10

    def test_symmetry(self, space8):
        a = er.assemble_stiffness(space8)
        rel = np.abs(a - a.T).max() / np.abs(a).max()
        assert rel <= 1e-12


class TestWeightedMass:
    def test_unit_weight_measures_domain(self, space8):
        m = er.assemble_weighted_mass(space8, np.ones(space8.ndof))
        ones = np.ones(space8.ndof)
        assert abs(ones @ (m @ ones) - 1.0) <= 1e-10

    def test_zero_weight(self, space8):
        m = er.assemble_weighted_mass(space8, np.zeros(space8.ndof))
        assert m.nnz == 0 or np.abs(m.data).max() == 0.0

    def test_constant_weight_scales_mass(self, space8):
        m1 = er.assemble_weighted_mass(space8, np.ones(space8.ndof))
        mc = er.assemble_weighted_mass(space8, np.full(space8.ndof, 2.5))
        assert np.abs(mc - 2.5 * m1).max() <= 1e-12

    def test_space_mismatch(self, space8):
        with pytest.raises(ValueError):
            er.assemble_weighted_mass(space8, np.ones(space8.ndof + 3))

    def test_matches_per_element_quadrature_oracle(self, problem8, train5):
        # weight from a genuinely trained interpolation basis
        coords = problem8.space.dof_coords
        basis = er.eim_train(
            problem8.space,
            lambda mu: mu[0] * coords[:, 0] + mu[1] * coords[:, 0] ** 2,
            list(train5), m_max=2)
        q = basis.fields[1]
        space = problem8.space
        m = er.assemble_weighted_mass(space, q)
        rng = np.random.default_rng(3)
        pts, wts = triangle_quadrature(2 * space.degree + 2)

        def p2_basis_at(pt):
            # barycentric P2 shape functions on the reference triangle,
            # ordered like the lattice nodes (j, i): see _reference_nodes
            x, y = pt
            lam = np.array([1 - x - y, x, y])
            n200 = lam * (2 * lam - 1)
            return np.array([
                n200[0], 4 * lam[0] * lam[1], n200[1],
                4 * lam[0] * lam[2], 4 * lam[1] * lam[2], n200[2]])

        for _ in range(3):
            e = rng.integers(space.mesh.n_triangles)
            i_loc, j_loc = rng.integers(6, size=2)
            dofs = space.elem_dofs[e]
            acc = 0.0
            for pt, w in zip(pts, wts):
                phi = p2_basis_at(pt)
                acc += w * space._detj[e] * (q[dofs] @ phi) * phi[i_loc] * phi[j_loc]
            # compare against the assembled entry restricted to this element
            local = er.assemble_weighted_mass(space, q)[dofs[i_loc], dofs[j_loc]]
            # entry sums contributions of all elements sharing the dof pair;
            # rebuild it from the oracle over those elements instead
            total = 0.0
            for e2 in range(space.mesh.n_triangles):
                d2 = space.elem_dofs[e2]
                where_i = np.flatnonzero(d2 == dofs[i_loc])
                where_j = np.flatnonzero(d2 == dofs[j_loc])
                if len(where_i) == 0 or len(where_j) == 0:
                    continue
                for pt, w in zip(pts, wts):
                    phi = p2_basis_at(pt)
                    total += (w * space._detj[e2] * (q[d2] @ phi)
                              * phi[where_i[0]] * phi[where_j[0]])
            assert abs(total - m[dofs[i_loc], dofs[j_loc]]) <= 1e-12


class TestLoad:
    def test_zero_rhs(self, space8):
        f = er.assemble_load(space8, lambda xy: np.zeros(len(xy)))
        assert np.all(f == 0)

    def test_unit_rhs_partition_of_unity(self, space8):
        f = er.assemble_load(space8, lambda xy: np.ones(len(xy)))
        assert abs(f.sum() - 1.0) <= 1e-10

    def test_benchmark_rhs_mean_zero(self):
        space = er.build_space(er.build_mesh(32), 2)
        f = er.assemble_load(space, er.benchmark_rhs)
        assert abs(f.sum()) <= 1e-8


class TestDirichlet:
    def test_boundary_values_zero(self, space8):
        op, vec = er.apply_dirichlet(space8, er.assemble_stiffness(space8),
                                     er.assemble_load(space8, manufactured_rhs))
        u = er.solve_sparse(op, vec)
        assert np.all(u[space8.boundary_dofs] == 0.0)

    def test_interior_block_unchanged(self, space8):
        a = er.assemble_stiffness(space8)
        op, _ = er.apply_dirichlet(space8, a, np.zeros(space8.ndof))
        ii = space8.interior_dofs
        assert np.abs(a[np.ix_(ii, ii)] - op[np.ix_(ii, ii)]).max() == 0.0

    def test_eliminated_stiffness_is_spd(self):
        space = er.build_space(er.build_mesh(8), 1)
        op, _ = er.apply_dirichlet(space, er.assemble_stiffness(space),
                                   np.zeros(space.ndof))
        np.linalg.cholesky(op.toarray())  # raises if not SPD

    def test_matches_interior_only_solve(self, space8):
        a = er.assemble_stiffness(space8)
        f = er.assemble_load(space8, manufactured_rhs)
        op, vec = er.apply_dirichlet(space8, a, f)
        u = er.solve_sparse(op, vec)
        ii = space8.interior_dofs
        u_int = np.linalg.solve(a[np.ix_(ii, ii)].toarray(), f[ii])
        assert np.abs(u[ii] - u_int).max() <= 1e-10


class TestSolveSparse:
    def test_identity(self):
        rhs = np.arange(5, dtype=float)
        assert np.array_equal(er.solve_sparse(sp.eye(5, format="csr"), rhs), rhs)

    def test_hand_checkable(self):
        op = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
        x = er.solve_sparse(op, np.array([3.0, 3.0]))
        assert np.allclose(x, [1.0, 1.0], atol=1e-14)

    def test_singular_raises(self):
        op = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(er.SolverFailure):
            er.solve_sparse(op, np.array([1.0, 2.0]))

    def test_manufactured_residual(self):
        space, u = poisson_solve(16, 2, manufactured_rhs)
        op, vec = er.apply_dirichlet(space, er.assemble_stiffness(space),
                                     er.assemble_load(space, manufactured_rhs))
        assert np.linalg.norm(op @ u - vec) <= 1e-10 * np.linalg.norm(vec)


class TestNormsAndEval:
    def test_l2_of_zero(self, space8):
        assert er.l2_norm(er.FEField(space8, np.zeros(space8.ndof))) == 0.0

    def test_h1_symmetric(self, space8):
        rng = np.random.default_rng(1)
        a = er.FEField(space8, rng.standard_normal(space8.ndof))
        b = er.FEField(space8, rng.standard_normal(space8.ndof))
        assert abs(er.h1_inner(a, b) - er.h1_inner(b, a)) <= 1e-12 * abs(er.h1_inner(a, a))

    def test_l2_of_sine_interpolant(self):
        space = er.build_space(er.build_mesh(32), 2)
        f = er.FEField(space, manufactured_exact(space.dof_coords))
        assert abs(er.l2_norm(f) - 0.5) <= 2e-3

    def test_nodal_property(self, space8):
        values = np.zeros(space8.ndof)
        values[17] = 1.0
        f = er.FEField(space8, values)
        out = er.eval_at_points(f, space8.dof_coords[[17, 18, 3]])
        assert abs(out[0] - 1.0) <= 1e-12
        assert abs(out[1]) <= 1e-12 and abs(out[2]) <= 1e-12

    def test_dof_index_evaluation_is_exact(self, space8):
        rng = np.random.default_rng(2)
        values = rng.standard_normal(space8.ndof)
        f = er.FEField(space8, values)
        idx = np.array([0, 5, 44])
        assert np.array_equal(er.eval_at_points(f, idx), values[idx])

    def test_linear_reproduction(self):
        for degree in (1, 2, 3):
            space = er.build_space(er.build_mesh(4), degree)
            f = er.FEField(space, space.dof_coords[:, 0] + space.dof_coords[:, 1])
            out = er.eval_at_points(f, np.array([[0.25, 0.5]]))
            assert abs(out[0] - 0.75) <= 1e-12

    def test_outside_domain_rejected(self, space8):
        f = er.FEField(space8, np.zeros(space8.ndof))
        with pytest.raises(ValueError):
            er.eval_at_points(f, np.array([[1.5, 0.5]]))


class TestConvergence:
    @pytest.mark.parametrize("degree", [1, 2])
    def test_manufactured_poisson_rate(self, degree):
        errs = []
        hs = []
        for n in (8, 16, 32):
            space, u = poisson_solve(n, degree, manufactured_rhs)
            errs.append(quad_l2_error(space, u, manufactured_exact))
            hs.append(1.0 / n)
        rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert abs(rate - (degree + 1)) <= 0.2
