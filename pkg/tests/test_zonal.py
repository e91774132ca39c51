import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy.special import hyp0f1

from qrshape.errors import DimensionError, DomainError
from qrshape.zonal import (Partition, SeriesControl, gen_pochhammer,
                           multivariate_gamma, partitions_of,
                           weighted_zonal_series, zonal_polynomial)
from qrshape.zonal import _backend_py
from qrshape.zonal._partitions import partition_tuples


class TestPartitions:
    def test_zero_has_empty_partition(self):
        assert [p.parts for p in partitions_of(0)] == [()]

    def test_four(self):
        assert [p.parts for p in partitions_of(4)] == [
            (4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)]

    def test_counts_match_partition_function(self):
        # p(t) for t = 0..10
        expected = [1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]
        for t, count in enumerate(expected):
            assert len(partitions_of(t)) == count

    def test_max_parts_restriction(self):
        assert partition_tuples(4, max_parts=2) == [(4,), (3, 1), (2, 2)]

    def test_deterministic_order(self):
        assert partition_tuples(6) == partition_tuples(6)

    def test_invalid(self):
        with pytest.raises(DimensionError):
            partitions_of(-1)
        with pytest.raises(DimensionError):
            Partition((1, 2))
        with pytest.raises(DimensionError):
            Partition((2, 0))


class TestPochhammer:
    def test_single_box(self):
        assert gen_pochhammer(1.3, (1,)) == pytest.approx(1.3)

    def test_degree_two(self):
        a = 0.8
        assert gen_pochhammer(a, (2,)) == pytest.approx(a * (a + 1))
        assert gen_pochhammer(a, (1, 1)) == pytest.approx(a * (a - 0.5))

    def test_empty(self):
        assert gen_pochhammer(2.5, ()) == 1.0

    def test_single_row_is_gamma_ratio(self):
        a, t = 2.3, 7
        assert gen_pochhammer(a, (t,)) == pytest.approx(
            math.gamma(a + t) / math.gamma(a), rel=1e-12)


class TestMultivariateGamma:
    def test_order_one(self):
        assert multivariate_gamma(1, 2.7) == pytest.approx(math.gamma(2.7))

    def test_order_two_at_three_halves(self):
        assert multivariate_gamma(2, 1.5) == pytest.approx(math.pi / 2, rel=1e-14)

    def test_ratio_is_one(self):
        v = multivariate_gamma(3, 4.2)
        assert v / multivariate_gamma(3, 4.2) == 1.0

    def test_pole(self):
        with pytest.raises(DomainError):
            multivariate_gamma(2, 0.5)  # a - 1/2 = 0 is a pole


class TestZonalPolynomial:
    def test_degree_one_is_trace(self, rng):
        eigs = rng.uniform(-2, 2, size=4)
        assert zonal_polynomial((1,), eigs) == pytest.approx(eigs.sum(), rel=1e-12)

    def test_degree_two_closed_forms(self, rng):
        A = rng.standard_normal((3, 3))
        A = (A + A.T) / 2
        eigs = np.linalg.eigvalsh(A)
        tr, tr2 = np.trace(A), np.trace(A @ A)
        assert zonal_polynomial((2,), eigs) == pytest.approx((tr ** 2 + 2 * tr2) / 3, rel=1e-10)
        assert zonal_polynomial((1, 1), eigs) == pytest.approx(
            (2.0 / 3.0) * (tr ** 2 - tr2), rel=1e-10)

    def test_more_parts_than_eigenvalues(self):
        assert zonal_polynomial((1, 1, 1), [1.0, 2.0]) == 0.0

    def test_degree_sum_identity(self, rng):
        A = rng.standard_normal((3, 3))
        A = (A + A.T) / 2
        eigs = np.linalg.eigvalsh(A)
        for t in range(13):
            total = sum(zonal_polynomial(p, eigs) for p in partitions_of(t))
            assert total == pytest.approx(np.trace(A) ** t, rel=1e-9)

    def test_homogeneous_scaling(self, rng):
        eigs = rng.uniform(0.2, 2.0, size=3)
        a = 1.7
        for p in partitions_of(5):
            ref = a ** 5 * zonal_polynomial(p, eigs)
            assert zonal_polynomial(p, a * eigs) == pytest.approx(ref, rel=1e-10)

    def test_orthogonal_invariance(self, rng):
        A = rng.standard_normal((3, 3))
        A = (A + A.T) / 2
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        e1 = np.linalg.eigvalsh(A)
        e2 = np.linalg.eigvalsh(Q @ A @ Q.T)
        for p in partitions_of(4):
            assert zonal_polynomial(p, e2) == pytest.approx(
                zonal_polynomial(p, e1), rel=1e-10)


class TestWeightedSeries:
    def test_zero_argument_keeps_degree_zero(self):
        value, diag = weighted_zonal_series(np.zeros((2, 2)), lambda t, k: 7.5 if t == 0 else 1.0)
        assert value == 7.5
        assert diag.converged

    def test_exponential_identity(self, rng):
        A = rng.standard_normal((3, 3))
        A = 0.3 * (A + A.T)
        value, diag = weighted_zonal_series(A, lambda t, k: 1.0 / math.factorial(t))
        assert diag.converged
        assert value == pytest.approx(math.exp(np.trace(A)), rel=1e-11)

    def test_binomial_determinant_identity(self, rng):
        # sum_t sum_kappa (a)_kappa C_kappa(X) / t! = det(I - X)^(-a)
        A = rng.standard_normal((3, 3))
        X = 0.12 * (A + A.T)
        a = 2.3
        value, diag = weighted_zonal_series(
            X, lambda t, k: gen_pochhammer(a, k) / math.factorial(t),
            SeriesControl(max_degree=80, rel_tol=1e-13))
        ref = np.linalg.det(np.eye(3) - X) ** (-a)
        assert diag.converged
        assert value == pytest.approx(ref, rel=1e-10)

    def test_rank_one_bessel_reduction(self):
        # with weight 1/(t! (K/2)_kappa) and a rank-1 argument only single-row
        # partitions survive, so the series is the scalar confluent limit 0F1
        x = 0.8
        K = 2
        value, diag = weighted_zonal_series(
            np.diag([x, 0.0]), lambda t, k: 1.0 / (math.factorial(t) * gen_pochhammer(K / 2, k)))
        assert diag.converged
        assert value == pytest.approx(float(hyp0f1(K / 2, x)), rel=1e-9)

    def test_non_convergence_flag(self):
        value, diag = weighted_zonal_series(
            np.eye(2), lambda t, k: math.factorial(t), SeriesControl(max_degree=10))
        assert not diag.converged
        assert math.isfinite(value)

    def test_truncation_monotone(self, rng):
        A = rng.standard_normal((2, 2))
        A = 0.4 * (A + A.T)
        w = lambda t, k: 1.0 / math.factorial(t)
        v1, d1 = weighted_zonal_series(A, w, SeriesControl(max_degree=40, rel_tol=1e-10))
        v2, d2 = weighted_zonal_series(A, w, SeriesControl(max_degree=80, rel_tol=1e-10))
        assert d1.converged and d2.converged
        assert abs(v2 - v1) <= 1e-10 * abs(v1)

    def test_matrix_must_be_symmetric(self):
        with pytest.raises(DomainError):
            weighted_zonal_series(np.array([[0.0, 1.0], [0.0, 0.0]]), lambda t, k: 1.0)


class TestBackends:
    def test_coefficient_tables_match_python_backend(self):
        from qrshape.zonal import _tables
        for t in (3, 6, 9):
            parts = partition_tuples(t, max_parts=3)
            ref = _backend_py.build_coef_matrix(parts, t)
            cur = _tables._backend.build_coef_matrix(parts, t)
            assert np.allclose(ref, cur, rtol=1e-13, atol=0)

    def test_fused_series_matches_python_backend(self, rng):
        from qrshape.zonal import _tables
        from qrshape.zonal._series import log_series_batch_arrays
        eigs = rng.uniform(0.0, 3.0, size=(6, 2))
        T = 40
        log_w = -0.5 * np.arange(T + 1.0)
        sign_w = np.where(np.arange(T + 1) % 3 == 0, 1.0, -1.0)
        ctrl = SeriesControl(max_degree=T, rel_tol=1e-12)
        la, sg, diag = log_series_batch_arrays(eigs, 1.0, log_w, sign_w, ctrl)
        bundle = _tables.series_bundle(1.0, T, 2)
        from qrshape.zonal._series import _prepare_batch
        pt, log_scale = _prepare_batch(eigs, T)
        la2, sg2, _, conv = _backend_py.signed_degree_series(
            pt, bundle.exponents, bundle.weights, bundle.offsets,
            log_w, sign_w, log_scale, math.log(ctrl.rel_tol))
        assert np.allclose(la, la2, rtol=1e-12, atol=1e-12)
        assert np.array_equal(sg, sg2)

    def test_concurrent_evaluation_is_consistent(self, rng):
        from qrshape.zonal import clear_caches
        clear_caches()
        A = rng.standard_normal((3, 3))
        A = 0.2 * (A + A.T)
        w = lambda t, k: 1.0 / math.factorial(t)

        def evaluate(_):
            return weighted_zonal_series(A, w)[0]

        with ThreadPoolExecutor(max_workers=8) as pool:
            values = list(pool.map(evaluate, range(16)))
        serial = weighted_zonal_series(A, w)[0]
        assert all(v == serial for v in values)
