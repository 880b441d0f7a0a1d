import math

import numpy as np
import pytest

from kmsw.errors import AssemblyError, PreconditionError
from kmsw.kernels import (
    GramAssembly,
    Kernel,
    PointCloud,
    assemble,
    check_pd,
    dot_product,
    eval_kernel,
    gaussian,
    median_bandwidth,
)

from conftest import gaussian_instance


class TestEvalKernel:
    def test_gaussian_diagonal_is_one(self):
        k = gaussian(1.0)
        x = np.array([0.3, -1.2])
        assert eval_kernel(k, x, x) == 1.0

    def test_dot_product(self):
        assert eval_kernel(dot_product(), [1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_gaussian_half_convention_value(self):
        # exp(-||x-y||^2 / (2 sigma^2)) at distance 1, sigma 1
        k = gaussian(1.0, convention="half")
        got = eval_kernel(k, [0.0, 0.0], [1.0, 0.0])
        assert got == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_gaussian_plain_convention_value(self):
        k = gaussian(1.0, convention="plain")
        got = eval_kernel(k, [0.0, 0.0], [1.0, 0.0])
        assert got == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_symmetry(self, rng):
        k = gaussian(0.7)
        a = rng.standard_normal(4)
        b = rng.standard_normal(4)
        assert eval_kernel(k, a, b) == pytest.approx(eval_kernel(k, b, a), rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError):
            eval_kernel(gaussian(1.0), [0.0, 1.0], [0.0, 1.0, 2.0])

    def test_nonpositive_bandwidth(self):
        with pytest.raises(PreconditionError):
            gaussian(0.0)
        with pytest.raises(PreconditionError):
            gaussian(-2.0)


class TestMedianBandwidth:
    def test_single_pair(self):
        x = PointCloud(np.array([[0.0]]))
        y = PointCloud(np.array([[2.0]]))
        assert median_bandwidth(x, y) == 2.0

    def test_three_points_enumerated(self):
        # pooled {0, 1, 3}: pairwise distances {1, 3, 2}, median 2
        x = PointCloud(np.array([[0.0], [1.0]]))
        y = PointCloud(np.array([[3.0], [5.0]]))
        pooled = np.array([0.0, 1.0, 3.0, 5.0])
        dists = sorted(
            abs(a - b) for i, a in enumerate(pooled) for b in pooled[i + 1:]
        )
        expect = np.median(dists)
        assert median_bandwidth(x, y) == pytest.approx(expect, rel=1e-14)

    def test_all_identical_errors(self):
        x = PointCloud(np.zeros((2, 1)))
        y = PointCloud(np.zeros((1, 1)))
        with pytest.raises(PreconditionError):
            median_bandwidth(x, PointCloud(np.zeros((2, 1))))


class TestCheckPd:
    def test_identity(self):
        assert check_pd(np.eye(3), 1e-10)

    def test_zero(self):
        assert not check_pd(np.zeros((3, 3)), 1e-10)

    def test_duplicated_point_gram_not_pd(self):
        k = gaussian(1.0)
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
        g = k.gram(pts, pts)
        assert not check_pd(g, 1e-10)


class TestAssemble:
    def test_duplicate_point_rejected(self):
        x = PointCloud(np.array([[1.0, 2.0]]))
        y = PointCloud(np.array([[1.0, 2.0]]))
        with pytest.raises(AssemblyError):
            assemble(gaussian(1.0), x, y)

    def test_hand_evaluated_blocks(self):
        # dot product, x = 2, y = 1
        ga = assemble(dot_product(), PointCloud(np.array([[2.0]])), PointCloud(np.array([[1.0]])))
        assert np.allclose(ga.gram, [[4.0, -2.0], [-2.0, 1.0]])

    def test_factor_residual(self):
        ga = gaussian_instance(2, seed=3)
        g_eff = ga.gram + ga.jitter * np.eye(2 * ga.n)
        resid = ga.u @ ga.u.T @ g_eff - np.eye(2 * ga.n)
        assert np.abs(resid).max() < 1e-8

    def test_size_mismatch(self):
        x = PointCloud(np.zeros((2, 1)) + [[0.0], [1.0]])
        y = PointCloud(np.array([[2.0]]))
        with pytest.raises(PreconditionError):
            assemble(gaussian(1.0), x, y)

    def test_gaussian_gram_diagonal_exact_ones(self):
        ga = gaussian_instance(5, seed=4)
        n = ga.n
        assert np.array_equal(np.diag(ga.gram)[:n], np.ones(n))
        assert np.array_equal(np.diag(ga.gram)[n:], np.ones(n))

    def test_m_prime_matches_direct_kernel_eval(self):
        ga = gaussian_instance(4, seed=5)
        n = ga.n
        k, x, y = ga.kernel, ga.x, ga.y
        for i, j in [(0, 0), (1, 2), (3, 1)]:
            direct = np.concatenate(
                [
                    [eval_kernel(k, x.points[i], x.points[l]) - eval_kernel(k, y.points[j], x.points[l]) for l in range(n)],
                    [eval_kernel(k, y.points[j], y.points[l]) - eval_kernel(k, x.points[i], y.points[l]) for l in range(n)],
                ]
            )
            assert np.abs(ga.m_prime(i, j) - direct).max() < 1e-12

    def test_change_of_variables_reproduces_function_differences(self, rng):
        # <omega, M_ij>^2 == |f(x_i) - f(y_j)|^2 when f has coefficients s = U omega
        ga = gaussian_instance(4, seed=6)
        n = ga.n
        for _ in range(5):
            omega = rng.standard_normal(2 * n)
            s = ga.u @ omega
            ax, ay = s[:n], s[n:]
            kxx = ga.kernel.gram(ga.x.points, ga.x.points)
            kxy = ga.kernel.gram(ga.x.points, ga.y.points)
            kyy = ga.kernel.gram(ga.y.points, ga.y.points)
            fx = kxx @ ax - kxy @ ay
            fy = kxy.T @ ax - kyy @ ay
            for i, j in [(0, 1), (2, 3), (3, 0)]:
                lhs = float(omega @ ga.m(i, j)) ** 2
                rhs = (fx[i] - fy[j]) ** 2
                assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-12)

    def test_pair_norm_kernel_identity(self):
        # ||M_ij||^2 = K(x_i,x_i) - 2 K(x_i,y_j) + K(y_j,y_j) for exact factorizations
        ga = gaussian_instance(5, seed=7)
        assert ga.jitter == 0.0
        kxy = ga.kernel.gram(ga.x.points, ga.y.points)
        expect = 2.0 - 2.0 * kxy
        assert np.abs(ga.pair_norms_sq() - expect).max() < 1e-8

    def test_c_bound_dominates(self):
        ga = gaussian_instance(5, seed=8)
        assert ga.c_bound >= ga.pair_norms_sq().max() - 1e-15

    def test_costs_matches_quadratic_form(self, rng):
        ga = gaussian_instance(3, seed=9)
        w = rng.standard_normal((6, 6))
        s = w @ w.T
        s /= np.trace(s)
        costs = ga.costs(s)
        for i in range(3):
            for j in range(3):
                m = ga.m(i, j)
                assert costs[i, j] == pytest.approx(m @ s @ m, rel=1e-10, abs=1e-12)

    def test_rank_deficient_dot_kernel_takes_jitter_path(self):
        x = PointCloud(np.array([[1.0], [2.0]]))
        y = PointCloud(np.array([[3.0], [4.0]]))
        ga = assemble(dot_product(), x, y)
        assert ga.jitter > 0.0
