"""Size-and-shape and shape log-densities for matrix elliptical landmark
models with full row covariance and column covariance.

All densities share the layout

    constant(model) * prod_i w_ii^(K-i) * J(u)
      * sum_t sum_kappa  degree_factor(t) * C_kappa(B) / (K/2)_kappa

with a PSD interaction argument B built from the noncentrality and the
observed direction, and a degree factor that is either a generator
derivative (size-and-shape) or a half-line radial integral (shape).  The
factors live in log space; degrees are combined by a signed log-sum-exp.

Reflection handling: when the triangular rank equals K and the mean is rank
deficient, the reflection-excluded density is the reflection-included one
halved (the orthonormal factor's two components contribute equally); the
rank-K mean case has no such rule and is rejected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import (DimensionError, DomainError, NumericsError,
                     SeriesConvergenceWarning, UnsupportedCaseError,
                     UnsupportedModelError)
from .generators import (GeneratorSpec, generator_log_abs_derivative,
                         radial_integral_log, radial_integral_quad)
from .geometry import (ReflectionMode, ShapeCoordinates, SizeAndShape,
                       log_polar_jacobian, pd_sqrt, shape_dims)
from .zonal import SeriesControl, SeriesDiagnostics, log_multivariate_gamma
from .zonal._series import log_series_batch, log_series_batch_arrays

_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class ReflectionAdjustment:
    """Density factor and sign convention implied by a reflection mode."""

    factor: float          # 1.0 or 0.5
    t_kk_nonneg: bool      # whether the last diagonal is pinned nonnegative

    @property
    def log_factor(self) -> float:
        return math.log(self.factor)


def reflection_variant_factor(N: int, K: int, p: int,
                              mode: ReflectionMode) -> ReflectionAdjustment:
    """How a density changes between the reflection variants.

    With n < K the two variants coincide.  With N-1 >= K and mean rank
    p < K the reflection-excluded density is half the reflection-included
    one and the last diagonal is unrestricted; p = K is not covered by
    that rule and raises.
    """
    n = shape_dims(N, K)[0]
    if p < 0 or p > min(N - 1, K):
        raise DomainError(f"mean rank p={p} outside 0..min(N-1, K)")
    if mode is ReflectionMode.INCLUDES_REFLECTION:
        return ReflectionAdjustment(1.0, t_kk_nonneg=(N - 1 >= K))
    if n < K:
        return ReflectionAdjustment(1.0, t_kk_nonneg=False)
    if p == K:
        raise UnsupportedCaseError(
            "reflection-excluded densities with a full-rank mean (p = K) do not "
            "follow the halving rule and are not implemented")
    return ReflectionAdjustment(0.5, t_kk_nonneg=False)


@dataclass(frozen=True)
class ModelSpec:
    """Mean, covariances, generator and reflection convention of one model.

    ``mean`` is the translation-reduced (N-1) x K mean matrix.  ``sigma`` is
    either the full (N-1) x (N-1) row covariance or a positive scalar s2
    standing for s2 * I.  ``theta`` is the K x K column covariance (None
    means the identity).  The instance is immutable; derived quantities are
    computed once and cached, so parameter changes go through ``replace``.
    """

    mean: np.ndarray
    sigma: np.ndarray | float
    generator: GeneratorSpec
    theta: np.ndarray | None = None
    reflection_mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION
    mean_rank: int | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        if mean.ndim != 2:
            raise DimensionError("mean must be an (N-1) x K matrix")
        object.__setattr__(self, "mean", mean)
        if np.isscalar(self.sigma) or np.ndim(self.sigma) == 0:
            if not float(self.sigma) > 0:
                raise DomainError("scalar sigma must be a positive variance")
            object.__setattr__(self, "sigma", float(self.sigma))
        else:
            sig = np.asarray(self.sigma, dtype=np.float64)
            if sig.shape != (mean.shape[0], mean.shape[0]):
                raise DimensionError("sigma must be (N-1) x (N-1)")
            pd_sqrt(sig)  # raises unless symmetric positive definite
            object.__setattr__(self, "sigma", sig)
        if self.theta is not None:
            th = np.asarray(self.theta, dtype=np.float64)
            if th.shape != (mean.shape[1], mean.shape[1]):
                raise DimensionError("theta must be K x K")
            pd_sqrt(th)
            object.__setattr__(self, "theta", th)
        if self.generator.dim != self.M:
            raise DimensionError(
                f"generator dimension {self.generator.dim} != (N-1)K = {self.M}")

    # -- dimension bookkeeping -------------------------------------------
    @property
    def N(self) -> int:
        return self.mean.shape[0] + 1

    @property
    def K(self) -> int:
        return self.mean.shape[1]

    @property
    def n(self) -> int:
        return min(self.N - 1, self.K)

    @property
    def M(self) -> int:
        return (self.N - 1) * self.K

    @property
    def is_sigma_scalar(self) -> bool:
        return isinstance(self.sigma, float)

    @property
    def is_fully_isotropic(self) -> bool:
        return self.is_sigma_scalar and self.theta is None

    # -- derived model quantities ----------------------------------------
    @cached_property
    def p(self) -> int:
        """Rank of the mean, with the shared relative tolerance."""
        if self.mean_rank is not None:
            return self.mean_rank
        sv = np.linalg.svd(self.mean, compute_uv=False)
        if sv.size == 0 or sv[0] == 0.0:
            return 0
        return int(np.sum(sv > _RANK_RTOL * sv[0]))

    @cached_property
    def _sigma_inv(self) -> np.ndarray | float:
        if self.is_sigma_scalar:
            return 1.0 / self.sigma
        return np.linalg.inv(self.sigma)

    @cached_property
    def log_det_sigma(self) -> float:
        if self.is_sigma_scalar:
            return (self.N - 1) * math.log(self.sigma)
        sign, logdet = np.linalg.slogdet(self.sigma)
        if sign <= 0:
            raise DomainError("sigma must be positive definite")
        return logdet

    @cached_property
    def _interaction_root(self) -> np.ndarray:
        """G = Theta^{-1/2} mean' Sigma^{-1}: the eigenvalues of the series
        argument at direction W are the squared singular values of G W."""
        G = self.mean.T if self.theta is None else np.linalg.solve(pd_sqrt(self.theta), self.mean.T)
        if self.is_sigma_scalar:
            return G * self._sigma_inv
        return G @ self._sigma_inv

    @cached_property
    def tr_omega(self) -> float:
        """Trace of the noncentrality matrix Sigma^{-1} mean Theta^{-1} mean'."""
        G = self._interaction_root
        return float(np.sum(G * self.mean.T))

    @cached_property
    def omega(self) -> np.ndarray:
        """The (N-1) x (N-1) noncentrality matrix itself."""
        if self.theta is None:
            right = self.mean.T
        else:
            right = np.linalg.solve(self.theta, self.mean.T)
        if self.is_sigma_scalar:
            return self._sigma_inv * (self.mean @ right)
        return self._sigma_inv @ self.mean @ right

    @cached_property
    def _adjustment(self) -> ReflectionAdjustment:
        return reflection_variant_factor(self.N, self.K, self.p, self.reflection_mode)

    @cached_property
    def _log_gamma_n_half_k(self) -> float:
        return log_multivariate_gamma(self.n, self.K / 2.0)

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace as _replace
        return _replace(self, **changes)

    # -- small helpers shared by the density routines ---------------------
    def interaction_eigs(self, cols: np.ndarray) -> np.ndarray:
        """Nonzero eigenvalues of Omega Sigma^{-1} C C' for a stack of
        (N-1) x n matrices C, via singular values of G C (the product is
        similar to a symmetric PSD matrix, so its spectrum is real and
        nonnegative)."""
        F = np.einsum("kj,bjn->bkn", self._interaction_root, cols)
        sv = np.linalg.svd(F, compute_uv=False)
        return sv ** 2

    def quad_trace(self, cols: np.ndarray) -> np.ndarray:
        """tr Sigma^{-1} C C' for a stack of (N-1) x n matrices."""
        if self.is_sigma_scalar:
            return self._sigma_inv * np.einsum("bjn,bjn->b", cols, cols)
        return np.einsum("jk,bkn,bjn->b", self._sigma_inv, cols, cols)


def gaussian_model(mean, sigma, theta=None,
                   mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION) -> ModelSpec:
    mean = np.asarray(mean, dtype=np.float64)
    M = mean.shape[0] * mean.shape[1]
    return ModelSpec(mean, sigma, GeneratorSpec.gaussian(M), theta, mode)


def kotz_model(mean, sigma, tau, rate=0.5, theta=None,
               mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION) -> ModelSpec:
    mean = np.asarray(mean, dtype=np.float64)
    M = mean.shape[0] * mean.shape[1]
    return ModelSpec(mean, sigma, GeneratorSpec.kotz(M, tau, rate), theta, mode)


# ---------------------------------------------------------------------------
# prefactors shared by every shape density
# ---------------------------------------------------------------------------

def _diag_log_prefactor(W: np.ndarray, K: int) -> float:
    """sum_i (K - i) log w_ii over the triangular diagonal."""
    n = W.shape[1]
    acc = 0.0
    for i in range(n):
        e = K - (i + 1)
        if e == 0:
            continue
        wii = W[i, i]
        if wii <= 0.0:
            return -math.inf
        acc += e * math.log(wii)
    return acc


def shape_log_prefactor(shape: ShapeCoordinates) -> float:
    """log [ prod_i w_ii^(K-i) * J(u) ] for one shape point."""
    return _diag_log_prefactor(shape.W, shape.K) + log_polar_jacobian(shape.u)


def _check_shape(spec: ModelSpec, shape: ShapeCoordinates) -> None:
    if shape.W.shape != (spec.N - 1, spec.n):
        raise DimensionError(
            f"shape has W of {shape.W.shape}, model expects {(spec.N - 1, spec.n)}")


def _radial_log(gen: GeneratorSpec, M: int, t: int, a: float, b: float) -> tuple[float, float]:
    if gen.has_integer_exponent:
        return radial_integral_log(gen, M, t, a, b)
    value = radial_integral_quad(gen, M, t, a, b)
    if value == 0.0:
        return -math.inf, 1.0
    return math.log(abs(value)), math.copysign(1.0, value)


def _finish_series(log_abs: np.ndarray, signs: np.ndarray, diag: SeriesDiagnostics,
                   what: str) -> np.ndarray:
    if not diag.converged:
        warnings.warn(
            f"{what}: series reached max degree {diag.degrees_used} before the "
            f"tolerance (tail ratio {diag.tail_ratio:.2e})", SeriesConvergenceWarning,
            stacklevel=3)
    bad = (signs < 0) & np.isfinite(log_abs)
    if np.any(bad):
        raise NumericsError(f"{what}: series summed to a negative value; "
                            "catastrophic cancellation or an invalid model")
    return np.where(signs > 0, log_abs, -np.inf)


# ---------------------------------------------------------------------------
# size-and-shape density
# ---------------------------------------------------------------------------

def size_and_shape_logdensity(spec: ModelSpec, tri: SizeAndShape,
                              ctrl: SeriesControl | None = None) -> float:
    """Log density of the triangular factor T under the model.

    Central means short-circuit to the single h(tr Sigma^{-1} T T') term;
    otherwise the degree factors are the 2t-th generator derivatives at
    tr(Sigma^{-1} T T') + tr Omega.
    """
    ctrl = ctrl or SeriesControl()
    if tri.T.shape != (spec.N - 1, spec.n):
        raise DimensionError(
            f"T has shape {tri.T.shape}, model expects {(spec.N - 1, spec.n)}")
    T = tri.T[None, :, :]
    y0 = float(spec.quad_trace(T)[0] + spec.tr_omega)
    eigs = spec.interaction_eigs(T)

    def degree_weight(t: int):
        la, sg = generator_log_abs_derivative(spec.generator, 2 * t, np.array([y0]))
        return float(la[0]) - gammaln(t + 1), float(sg[0])

    log_abs, signs, diag = log_series_batch(eigs, spec.K / 2.0, degree_weight, ctrl)
    log_series = _finish_series(log_abs, signs, diag, "size-and-shape density")[0]

    const = (spec.n * math.log(2.0) + (spec.n * spec.K / 2.0) * math.log(math.pi)
             - spec._log_gamma_n_half_k - (spec.K / 2.0) * spec.log_det_sigma
             + spec._adjustment.log_factor)
    return const + _diag_log_prefactor(tri.T, spec.K) + log_series


# ---------------------------------------------------------------------------
# shape densities
# ---------------------------------------------------------------------------

def _shape_logdensity_batch(spec: ModelSpec, W: np.ndarray, log_pre: np.ndarray,
                            ctrl: SeriesControl) -> np.ndarray:
    """Generic route: radial-integral degree factors, any generator."""
    nb = W.shape[0]
    a_vals = spec.quad_trace(W)
    if np.any(a_vals <= 0):
        raise DomainError("tr Sigma^{-1} W W' must be positive")
    eigs = spec.interaction_eigs(W)
    b = spec.tr_omega
    shared_a = bool(np.allclose(a_vals, a_vals[0], rtol=1e-14, atol=0.0))

    if shared_a:
        a0 = float(a_vals[0])
        log_w = np.empty(ctrl.max_degree + 1)
        sign_w = np.empty(ctrl.max_degree + 1)
        for t in range(ctrl.max_degree + 1):
            la, sg = _radial_log(spec.generator, spec.M, t, a0, b)
            log_w[t] = la - gammaln(t + 1)
            sign_w[t] = sg
        log_abs, signs, diag = log_series_batch_arrays(eigs, spec.K / 2.0,
                                                       log_w, sign_w, ctrl)
    else:
        def degree_weight(t: int):
            las = np.empty(nb)
            sgs = np.empty(nb)
            for i in range(nb):
                las[i], sgs[i] = _radial_log(spec.generator, spec.M, t, float(a_vals[i]), b)
            return las - gammaln(t + 1), sgs

        log_abs, signs, diag = log_series_batch(eigs, spec.K / 2.0, degree_weight, ctrl)
    log_series = _finish_series(log_abs, signs, diag, "shape density")

    const = (spec.n * math.log(2.0) + (spec.n * spec.K / 2.0) * math.log(math.pi)
             - spec._log_gamma_n_half_k - (spec.K / 2.0) * spec.log_det_sigma
             + spec._adjustment.log_factor)
    return const + log_pre + log_series


def shape_logdensity(spec: ModelSpec, shape: ShapeCoordinates,
                     ctrl: SeriesControl | None = None) -> float:
    """Log shape density by the generic route, valid for every model in the
    family (the generator enters only through its radial integrals)."""
    ctrl = ctrl or SeriesControl()
    _check_shape(spec, shape)
    log_pre = np.array([shape_log_prefactor(shape)])
    return float(_shape_logdensity_batch(spec, shape.W[None, :, :], log_pre, ctrl)[0])


def shape_logdensity_batch(spec: ModelSpec, shapes: Sequence[ShapeCoordinates],
                           ctrl: SeriesControl | None = None) -> np.ndarray:
    ctrl = ctrl or SeriesControl()
    if len(shapes) == 0:
        return np.zeros(0)
    for s in shapes:
        _check_shape(spec, s)
    W = np.stack([s.W for s in shapes])
    log_pre = np.array([shape_log_prefactor(s) for s in shapes])
    return _shape_logdensity_batch(spec, W, log_pre, ctrl)


def gaussian_shape_logdensity(spec: ModelSpec, shape: ShapeCoordinates,
                              ctrl: SeriesControl | None = None) -> float:
    """Log shape density along the Gaussian closed form: the radial integral
    is spent analytically, leaving gamma-ratio degree factors.  An
    independent code path from ``shape_logdensity`` for the same model."""
    ctrl = ctrl or SeriesControl()
    if not spec.generator.is_gaussian:
        raise UnsupportedModelError("gaussian_shape_logdensity needs the Gaussian generator")
    _check_shape(spec, shape)
    W = shape.W[None, :, :]
    a = float(spec.quad_trace(W)[0])
    eigs = 0.5 * spec.interaction_eigs(W)
    log_a = math.log(a)

    def degree_weight(t: int):
        return gammaln(spec.M / 2.0 + t) - gammaln(t + 1) - t * log_a, 1.0

    log_abs, signs, diag = log_series_batch(eigs, spec.K / 2.0, degree_weight, ctrl)
    log_series = _finish_series(log_abs, signs, diag, "gaussian shape density")[0]

    const = (-0.5 * spec.tr_omega - (spec.M / 2.0) * log_a
             - ((spec.M - spec.n * spec.K) / 2.0) * math.log(math.pi)
             + (spec.n - 1) * math.log(2.0)
             - spec._log_gamma_n_half_k - (spec.K / 2.0) * spec.log_det_sigma
             + spec._adjustment.log_factor)
    return const + shape_log_prefactor(shape) + log_series


def _iso_degree_weights(kind: str, M: int, c0: float, max_degree: int,
                        ) -> tuple[float, np.ndarray, np.ndarray]:
    """Degree factors of the fully isotropic closed forms.

    ``c0`` is tr(mean' mean) / (2 sigma^2).  Returns (extra log constant,
    log_w, sign_w) for degrees 0..max_degree; the series argument in every
    case is the spectrum of mean' W W' mean / (2 sigma^2).
    """
    M2 = M / 2.0
    tt = np.arange(max_degree + 1, dtype=np.float64)
    base = gammaln(M2 + tt) - gammaln(tt + 1)
    if kind == "gaussian":
        return 0.0, base, np.ones_like(base)
    if kind == "kotz2":
        poly = c0 + M2 - tt
        extra = math.log(2.0) - math.log(M)
    elif kind == "kotz3":
        d = c0 - 2.0 * tt
        poly = (d * d - 2.0 * tt) + 2.0 * (M2 + tt) * d + (M2 + tt) * (M2 + tt + 1.0)
        extra = 2.0 * math.log(2.0) - math.log(M) - math.log(M + 2)
    else:
        raise UnsupportedModelError(f"no isotropic closed form for {kind!r}")
    with np.errstate(divide="ignore"):
        log_w = np.where(poly != 0.0, base + np.log(np.abs(poly)), -np.inf)
    sign_w = np.where(poly >= 0.0, 1.0, -1.0)
    return extra, log_w, sign_w


def _iso_kind(spec: ModelSpec) -> str | None:
    if not (spec.is_fully_isotropic and spec.generator.rate == 0.5
            and spec.generator.has_integer_exponent):
        return None
    return {1: "gaussian", 2: "kotz2", 3: "kotz3"}.get(int(spec.generator.tau))


def isotropic_shape_logdensity_batch(spec: ModelSpec, W: np.ndarray,
                                     log_pre: np.ndarray, ctrl: SeriesControl,
                                     ) -> np.ndarray:
    """Fast exact route for sigma^2 I, identity column covariance and the
    Gaussian / tau=2 / tau=3 generators (the likelihood hot loop)."""
    kind = _iso_kind(spec)
    if kind is None:
        raise UnsupportedModelError("isotropic closed forms need sigma^2 I, "
                                    "identity theta and tau in {1, 2, 3} at rate 1/2")
    sigma2 = float(spec.sigma)
    c0 = 0.5 * spec.tr_omega
    eigs = spec.interaction_eigs(W) * (sigma2 / 2.0)  # mean' W W' mean / (2 s^2)
    extra_const, log_w, sign_w = _iso_degree_weights(kind, spec.M, c0, ctrl.max_degree)
    log_abs, signs, diag = log_series_batch_arrays(eigs, spec.K / 2.0, log_w, sign_w, ctrl)
    log_series = _finish_series(log_abs, signs, diag, f"{kind} shape density")
    const = (extra_const + (spec.n - 1) * math.log(2.0) - c0
             - ((spec.M - spec.n * spec.K) / 2.0) * math.log(math.pi)
             - spec._log_gamma_n_half_k
             + spec._adjustment.log_factor)
    return const + log_pre + log_series


def kotz_shape_logdensity(spec: ModelSpec, shape: ShapeCoordinates,
                          ctrl: SeriesControl | None = None) -> float:
    """Log shape density for integer-exponent Kotz models.

    Fully isotropic tau = 2 or 3 with rate 1/2 uses the simplified
    closed-form degree factors; everything else routes through the generic
    radial-integral evaluation.
    """
    ctrl = ctrl or SeriesControl()
    gen = spec.generator
    if not gen.has_integer_exponent or gen.tau < 1:
        raise UnsupportedModelError(f"integer tau >= 1 required, got {gen.tau}")
    _check_shape(spec, shape)
    if _iso_kind(spec) in ("kotz2", "kotz3"):
        log_pre = np.array([shape_log_prefactor(shape)])
        return float(isotropic_shape_logdensity_batch(
            spec, shape.W[None, :, :], log_pre, ctrl)[0])
    return shape_logdensity(spec, shape, ctrl)
