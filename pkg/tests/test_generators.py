import math

import numpy as np
import pytest
from scipy import integrate

from qrshape.errors import DomainError, UnsupportedModelError
from qrshape.generators import (GeneratorSpec, central_radial_constant,
                                generator_derivative,
                                generator_log_abs_derivative, generator_value,
                                radial_integral, radial_integral_log,
                                radial_integral_magnitude, radial_integral_quad)


def richardson_derivative(spec, k, y, h=1e-5):
    """Central finite difference of the (k-1)-th derivative with one
    Richardson extrapolation step; independent oracle for the closed form."""
    f = (lambda x: generator_value(spec, x)) if k == 1 else \
        (lambda x: generator_derivative(spec, k - 1, x))
    d1 = (f(y + h) - f(y - h)) / (2 * h)
    d2 = (f(y + h / 2) - f(y - h / 2)) / h
    return (4 * d2 - d1) / 3


class TestGeneratorValue:
    def test_gaussian_at_zero(self):
        g = GeneratorSpec.gaussian(dim=2)
        assert generator_value(g, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)

    def test_gaussian_matches_standard_normal(self):
        g = GeneratorSpec.gaussian(dim=10)
        y = 3.7
        assert generator_value(g, y) == pytest.approx(
            (2 * math.pi) ** -5 * math.exp(-y / 2), rel=1e-13)

    def test_exponential_ratio(self):
        for rate in (0.5, 1.3):
            s = GeneratorSpec(dim=6, tau=1.0, rate=rate)
            assert generator_value(s, 2.0) / generator_value(s, 0.0) == pytest.approx(
                math.exp(-2 * rate), rel=1e-13)

    def test_tau_two_vanishes_at_zero(self):
        assert generator_value(GeneratorSpec.kotz(4, 2.0), 0.0) == 0.0

    def test_normalization_over_ambient_space(self):
        # 2 pi^(M/2) / Gamma(M/2) * int r^(M-1) h(r^2) dr must equal one;
        # this pins which placement of the gamma-function ratio in the
        # normalizing constant is the correct one
        for spec in (GeneratorSpec.gaussian(4), GeneratorSpec.kotz(4, 2.0),
                     GeneratorSpec.kotz(4, 3.0, rate=2.0), GeneratorSpec.kotz(2, 2.0)):
            val, _ = integrate.quad(lambda r: r ** (spec.dim - 1) * generator_value(spec, r * r),
                                    0, np.inf)
            total = 2 * math.pi ** (spec.dim / 2) / math.gamma(spec.dim / 2) * val
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_normalization_monte_carlo_importance(self):
        # h(tr Y Y') integrates to one over the matrix space (M = 4),
        # estimated by importance sampling against the Gaussian member
        rng = np.random.default_rng(5)
        spec = GeneratorSpec.kotz(4, 2.0)
        gauss = GeneratorSpec.gaussian(4)
        Y = rng.standard_normal((200_000, 4))
        y2 = np.einsum("bi,bi->b", Y, Y)
        ratio = generator_value(spec, y2) / generator_value(gauss, y2)
        est, se = ratio.mean(), ratio.std(ddof=1) / math.sqrt(len(ratio))
        assert abs(est - 1.0) < max(3 * se, 0.005)

    def test_invalid_specs(self):
        with pytest.raises(UnsupportedModelError):
            GeneratorSpec(dim=4, tau=0.5)
        with pytest.raises(DomainError):
            GeneratorSpec(dim=4, tau=2.0, rate=0.0)
        with pytest.raises(DomainError):
            generator_value(GeneratorSpec.gaussian(4), -1.0)


class TestDerivatives:
    def test_gaussian_derivative_is_geometric(self):
        g = GeneratorSpec.gaussian(8)
        y = 2.3
        for k in range(7):
            assert generator_derivative(g, k, y) == pytest.approx(
                (-0.5) ** k * generator_value(g, y), rel=1e-13)

    def test_order_zero_is_the_generator(self):
        s = GeneratorSpec.kotz(6, 3.0)
        assert generator_derivative(s, 0, 1.7) == pytest.approx(
            generator_value(s, 1.7), rel=1e-14)

    def test_tau_two_first_derivative_analytic(self):
        spec = GeneratorSpec.kotz(10, 2.0, rate=0.5)
        c = math.exp(spec.log_norm_const())
        y = 1.3
        analytic = c * (1 - 0.5 * y) * math.exp(-0.5 * y)
        assert generator_derivative(spec, 1, y) == pytest.approx(analytic, rel=1e-13)
        assert generator_derivative(spec, 1, y) == pytest.approx(
            richardson_derivative(spec, 1, y), rel=1e-8)

    @pytest.mark.parametrize("spec", [GeneratorSpec.gaussian(6),
                                      GeneratorSpec.kotz(10, 2.0),
                                      GeneratorSpec.kotz(10, 3.0),
                                      GeneratorSpec.kotz(8, 5.0, rate=0.8)])
    def test_matches_finite_differences(self, spec):
        for k in range(1, 7):
            for y in (0.5, 1.3, 7.0, 20.0):
                ref = richardson_derivative(spec, k, y)
                assert generator_derivative(spec, k, y) == pytest.approx(
                    ref, rel=1e-6), (spec.tau, k, y)

    def test_singular_at_zero(self):
        with pytest.raises(DomainError):
            generator_derivative(GeneratorSpec.kotz(4, 2.0), 2, 0.0)
        # below the singular order the limit exists
        assert generator_derivative(GeneratorSpec.kotz(4, 3.0), 1, 0.0) == 0.0

    def test_log_form_consistency(self):
        spec = GeneratorSpec.kotz(10, 3.0)
        y = np.array([0.8, 5.0, 40.0])
        for k in (0, 1, 4, 9):
            la, sg = generator_log_abs_derivative(spec, k, y)
            assert np.allclose(sg * np.exp(la), generator_derivative(spec, k, y),
                               rtol=1e-12)

    def test_log_form_high_order_is_finite(self):
        la, sg = generator_log_abs_derivative(GeneratorSpec.kotz(10, 2.0), 240,
                                              np.array([12.0]))
        assert np.isfinite(la).all() and abs(sg[0]) == 1.0


class TestRadialIntegrals:
    def test_gaussian_basic_example(self):
        v = radial_integral(GeneratorSpec.gaussian(2), 2, 0, 1.0, 0.0)
        assert v == pytest.approx(1 / (2 * math.pi), rel=1e-13)

    def test_gaussian_offset_is_exponential(self):
        g = GeneratorSpec.gaussian(4)
        v0 = radial_integral(g, 4, 3, 2.0, 0.0)
        v2 = radial_integral(g, 4, 3, 2.0, 2.0)
        assert v2 == pytest.approx(math.exp(-1.0) * v0, rel=1e-12)

    @pytest.mark.parametrize("M", [4, 10])
    def test_gaussian_closed_vs_quadrature(self, M):
        g = GeneratorSpec.gaussian(M)
        for t in range(11):
            cf = radial_integral(g, M, t, 1.3, 0.7, method="closed")
            q = radial_integral_quad(g, M, t, 1.3, 0.7)
            assert cf == pytest.approx(q, rel=1e-9), (M, t)

    @pytest.mark.parametrize("tau", [2.0, 3.0])
    @pytest.mark.parametrize("M", [4, 10])
    def test_kotz_closed_vs_quadrature(self, tau, M):
        sp = GeneratorSpec.kotz(M, tau)
        for b in (0.0, 1.7, 2.3):
            for t in range(11):
                cf = radial_integral(sp, M, t, 1.3, b, method="closed")
                q = radial_integral_quad(sp, M, t, 1.3, b)
                mag = radial_integral_magnitude(sp, M, t, 1.3, b)
                if abs(cf) < 1e-10 * mag and abs(q) < 1e-10 * mag:
                    continue  # an exact root of the integral
                assert cf == pytest.approx(q, rel=1e-8), (tau, M, t, b)

    def test_exact_root_case(self):
        # bracket (R b - 2t) Gamma(M/2+t) + Gamma(M/2+t+1) vanishes exactly
        sp = GeneratorSpec.kotz(4, 2.0)
        scale = radial_integral_magnitude(sp, 4, 3, 1.0, 2.0)
        assert abs(radial_integral(sp, 4, 3, 1.0, 2.0, method="closed")) < 1e-12 * scale
        assert abs(radial_integral_quad(sp, 4, 3, 1.0, 2.0)) < 1e-12 * scale

    def test_spec_example_kotz_m10(self):
        sp = GeneratorSpec.kotz(10, 2.0)
        cf = radial_integral(sp, 10, 0, 1.0, 2.0, method="closed")
        q = radial_integral_quad(sp, 10, 0, 1.0, 2.0)
        assert cf == pytest.approx(q, rel=1e-8)

    def test_non_integer_tau_routes_to_quadrature(self):
        sp = GeneratorSpec.kotz(4, 2.5)
        v = radial_integral(sp, 4, 1, 1.0, 0.5)  # no error: auto -> quadrature
        assert math.isfinite(v)
        with pytest.raises(UnsupportedModelError):
            radial_integral_log(sp, 4, 1, 1.0, 0.5)

    def test_log_form_consistency(self):
        sp = GeneratorSpec.kotz(10, 3.0)
        for t in (0, 2, 7):
            la, sg = radial_integral_log(sp, 10, t, 0.8, 1.9)
            assert sg * math.exp(la) == pytest.approx(
                radial_integral(sp, 10, t, 0.8, 1.9, method="closed"), rel=1e-12)

    def test_high_degree_stays_finite_in_log_form(self):
        la, sg = radial_integral_log(GeneratorSpec.gaussian(10), 10, 150, 0.3, 5.0)
        assert math.isfinite(la)


class TestCentralConstant:
    def test_small_dimensions(self):
        assert central_radial_constant(2) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
        assert central_radial_constant(10) == pytest.approx(24 / (2 * math.pi ** 5), rel=1e-14)

    def test_generator_free(self):
        # the same half-line integral of the actual generator, any member
        for spec in (GeneratorSpec.gaussian(6), GeneratorSpec.kotz(6, 2.0),
                     GeneratorSpec.kotz(6, 3.0, rate=0.8)):
            val, _ = integrate.quad(lambda r: r ** 5 * generator_value(spec, r * r), 0, np.inf)
            assert val == pytest.approx(central_radial_constant(6), rel=1e-8)

    def test_gaussian_quadrature_tight(self):
        g = GeneratorSpec.gaussian(8)
        val, _ = integrate.quad(lambda r: r ** 7 * generator_value(g, r * r), 0, np.inf)
        assert val == pytest.approx(central_radial_constant(8), rel=1e-10)
