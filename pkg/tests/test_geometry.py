import math

import numpy as np
import pytest

from qrshape.errors import (DegenerateConfigurationError, DegenerateSizeError,
                            DimensionError, DomainError)
from qrshape.geometry import (LandmarkConfiguration, ReflectionMode,
                              ShapeCoordinates, SizeAndShape, angle_domains,
                              batch_shape_coords, from_polar, helmert_submatrix,
                              landmark_shape, pd_sqrt, polar_jacobian,
                              qr_size_and_shape, shape_dims, to_polar,
                              triangular_pattern, whiten_and_center)
from conftest import random_shape

R = ReflectionMode.INCLUDES_REFLECTION
NR = ReflectionMode.EXCLUDES_REFLECTION


class TestHelmert:
    def test_two_landmarks(self):
        L = helmert_submatrix(2)
        assert np.allclose(L, [[1 / math.sqrt(2), -1 / math.sqrt(2)]])

    def test_three_landmarks(self):
        L = helmert_submatrix(3)
        assert np.allclose(L[0], [1 / math.sqrt(2), -1 / math.sqrt(2), 0])
        assert np.allclose(L[1], [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)])

    @pytest.mark.parametrize("N", [2, 3, 5, 11])
    def test_defining_properties(self, N):
        L = helmert_submatrix(N)
        assert np.allclose(L @ np.ones(N), 0, atol=1e-14)
        assert np.allclose(L @ L.T, np.eye(N - 1), atol=1e-14)

    def test_too_small(self):
        with pytest.raises(DimensionError):
            helmert_submatrix(1)


class TestPdSqrt:
    def test_identity(self):
        assert np.allclose(pd_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(pd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_round_trip(self, rng):
        G = rng.standard_normal((4, 4))
        A = G @ G.T + 4 * np.eye(4)
        S = pd_sqrt(A)
        assert np.allclose(S @ S, A, rtol=1e-10)
        assert np.allclose(S, S.T)

    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            pd_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(DomainError):
            pd_sqrt(np.diag([1.0, -0.5]))


class TestWhiten:
    def test_pure_translation_maps_to_zero(self):
        X = np.ones((4, 2)) * np.array([3.0, -1.0])
        assert np.allclose(whiten_and_center(LandmarkConfiguration(X)), 0, atol=1e-14)

    def test_identity_theta_is_plain_reduction(self, rng):
        X = rng.standard_normal((5, 2))
        cfg = LandmarkConfiguration(X)
        assert np.allclose(whiten_and_center(cfg), helmert_submatrix(5) @ X)

    def test_translation_invariance(self, rng):
        X = rng.standard_normal((6, 3))
        c = rng.standard_normal(3)
        theta = np.diag([1.0, 2.0, 0.5])
        Y1 = whiten_and_center(LandmarkConfiguration(X), theta)
        Y2 = whiten_and_center(LandmarkConfiguration(X + np.ones((6, 1)) * c), theta)
        assert np.allclose(Y1, Y2, atol=1e-12)


class TestTriangularFactor:
    def test_identity_input(self):
        tri, H = qr_size_and_shape(np.eye(2), R)
        assert np.allclose(tri.T, np.eye(2))
        assert np.allclose(H, np.eye(2))

    def test_two_by_two_example(self):
        Y = np.array([[3.0, 4.0], [0.0, 5.0]])
        tri, H = qr_size_and_shape(Y, R)
        assert tri.T[0, 0] == pytest.approx(5.0)  # norm of the first row
        assert tri.T[0, 1] == 0.0
        assert np.allclose(tri.T @ H, Y, atol=1e-10)
        assert np.allclose(H @ H.T, np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("shape", [(5, 2), (2, 3), (3, 3)])
    @pytest.mark.parametrize("mode", [R, NR])
    def test_factorization_contract(self, rng, shape, mode):
        Y = rng.standard_normal(shape)
        tri, H = qr_size_and_shape(Y, mode)
        assert np.allclose(tri.T @ H, Y, atol=1e-10)
        assert np.allclose(H @ H.T, np.eye(H.shape[0]), atol=1e-12)
        assert np.linalg.norm(tri.T) == pytest.approx(np.linalg.norm(Y), rel=1e-12)
        if mode is NR and shape[0] >= shape[1]:
            assert np.linalg.det(H) > 0

    def test_rank_deficient_raises(self):
        Y = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
        with pytest.raises(DegenerateConfigurationError):
            qr_size_and_shape(Y, R)

    def test_rotation_invariance_and_reflection(self, rng):
        Y = rng.standard_normal((5, 2))
        th = 0.83
        Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        F = np.diag([1.0, -1.0])
        t0, _ = qr_size_and_shape(Y, R)
        assert np.allclose(qr_size_and_shape(Y @ Q, R)[0].T, t0.T, atol=1e-8)
        assert np.allclose(qr_size_and_shape(Y @ F, R)[0].T, t0.T, atol=1e-8)
        n0, _ = qr_size_and_shape(Y, NR)
        assert np.allclose(qr_size_and_shape(Y @ Q, NR)[0].T, n0.T, atol=1e-8)
        refl = qr_size_and_shape(Y @ F, NR)[0].T
        assert refl[1, 1] == pytest.approx(-n0.T[1, 1], abs=1e-8)
        assert np.allclose(refl[:, 0], n0.T[:, 0], atol=1e-8)

    def test_scaling_splits_into_size(self, rng):
        Y = rng.standard_normal((4, 2))
        s1 = to_polar(qr_size_and_shape(Y, R)[0])
        s2 = to_polar(qr_size_and_shape(2.5 * Y, R)[0])
        assert np.allclose(s1.W, s2.W, atol=1e-12)
        assert s2.r == pytest.approx(2.5 * s1.r, rel=1e-12)

    def test_invariant_validation(self):
        with pytest.raises(DomainError):
            SizeAndShape(np.array([[1.0, 0.5], [0.0, 1.0]]), R)  # upper entry
        with pytest.raises(DomainError):
            SizeAndShape(np.array([[-1.0, 0.0], [0.3, 1.0]]), R)  # negative diag


class TestPolar:
    def test_axis_case(self):
        T = np.zeros((2, 2))
        T[0, 0] = 1.0
        sc = to_polar(SizeAndShape(T, R))
        assert sc.r == pytest.approx(1.0)
        assert np.allclose(sc.u, 0.0)

    def test_dimension_bookkeeping(self):
        n, M, n_coords, m = shape_dims(6, 2)
        assert (n, M, n_coords, m) == (2, 10, 9, 8)
        cfg = LandmarkConfiguration(np.random.default_rng(0).standard_normal((6, 2)))
        assert cfg.m == 8 and cfg.M == 10 and cfg.n == 2

    @pytest.mark.parametrize("shape,mode", [((5, 2), R), ((5, 2), NR), ((2, 3), R)])
    def test_round_trip(self, rng, shape, mode):
        Y = rng.standard_normal(shape)
        tri, _ = qr_size_and_shape(Y, mode)
        sc = to_polar(tri)
        assert abs(np.linalg.norm(sc.W) - 1) < 1e-12
        back = from_polar(sc)
        assert np.allclose(back.T, tri.T, atol=1e-10)

    def test_zero_size_raises(self):
        with pytest.raises(DegenerateSizeError):
            ShapeCoordinates(W=np.eye(2), u=np.zeros(2), r=0.0)

    def test_angles_respect_domains(self, rng):
        for mode in (R, NR):
            lo_hi = angle_domains(5, 2, mode)
            for _ in range(50):
                sc = random_shape(5, 2, rng, mode)
                for q, (lo, hi) in enumerate(lo_hi):
                    assert lo <= sc.u[q] <= hi, (mode, q, sc.u[q], lo, hi)


class TestJacobian:
    def test_single_angle(self):
        assert polar_jacobian(np.array([0.4])) == 1.0

    def test_right_angles(self):
        assert polar_jacobian(np.array([math.pi / 2] * 4)) == pytest.approx(1.0)

    def test_worked_example(self):
        u = np.array([math.pi / 4, math.pi / 3, math.pi / 6])
        assert polar_jacobian(u) == pytest.approx(0.5 * math.sqrt(3) / 2, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            polar_jacobian(np.array([-0.1, 0.5]))
        with pytest.raises(DomainError):
            polar_jacobian(np.array([3.2, 0.5]))

    def test_matches_surface_element(self, rng):
        # numeric Gram determinant of u -> coords at r = 1 equals the
        # analytic angle factor
        N, K = 3, 2  # m = 2
        for _ in range(5):
            sc = random_shape(N, K, rng)
            m = sc.u.size

            def coords(u):
                s = ShapeCoordinates(W=sc.W, u=u, r=1.0, reflection_mode=sc.reflection_mode, K=K)
                return from_polar(s).coords()

            h = 1e-6
            J = np.empty((m + 1, m))
            for j in range(m):
                up = sc.u.copy(); up[j] += h
                dn = sc.u.copy(); dn[j] -= h
                J[:, j] = (coords(up) - coords(dn)) / (2 * h)
            gram = math.sqrt(np.linalg.det(J.T @ J))
            assert gram == pytest.approx(polar_jacobian(sc.u), rel=1e-6)


class TestPipeline:
    def test_translation_invariance(self, rng):
        X = rng.standard_normal((6, 2))
        c = rng.standard_normal(2)
        s1 = landmark_shape(LandmarkConfiguration(X))
        s2 = landmark_shape(LandmarkConfiguration(X + np.ones((6, 1)) * c))
        assert np.allclose(s1.coords(), s2.coords(), atol=1e-10)
        assert np.allclose(s1.u, s2.u, atol=1e-10)

    def test_rotation_invariance_with_whitening(self, rng):
        X = rng.standard_normal((5, 2))
        th = 1.2
        Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        s1 = landmark_shape(LandmarkConfiguration(X))
        s2 = landmark_shape(LandmarkConfiguration(X @ Q))
        assert np.allclose(s1.coords(), s2.coords(), atol=1e-8)

    def test_batch_matches_single(self, rng):
        for shape in ((4, 2), (2, 3)):
            Y = rng.standard_normal((20,) + shape)
            for mode in (R, NR):
                W, u, r = batch_shape_coords(Y, mode)
                for i in range(20):
                    sc = to_polar(qr_size_and_shape(Y[i], mode)[0])
                    assert np.allclose(W[i], sc.W, atol=1e-12)
                    assert np.allclose(u[i], sc.u, atol=1e-12)
                    assert r[i] == pytest.approx(sc.r, rel=1e-12)

    def test_landmark_validation(self):
        with pytest.raises(DimensionError):
            LandmarkConfiguration(np.zeros((1, 2)))
        with pytest.raises(DomainError):
            LandmarkConfiguration(np.array([[0.0, np.inf], [1.0, 2.0]]))


class TestAngleDomains:
    def test_small_planar_case(self):
        dom_r = angle_domains(3, 2, R)
        assert dom_r[0] == (0.0, math.pi / 2)
        assert dom_r[1] == (0.0, math.pi)
        dom_nr = angle_domains(3, 2, NR)
        assert dom_nr[1] == (-math.pi, math.pi)

    def test_pattern_is_column_major(self):
        assert triangular_pattern(4, 2) == [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1)]
