"""Density generators for the implemented elliptical family.

The family is Kotz type I with unit shape exponent:

    h(y) = c * y^(tau-1) * exp(-R y),
    c = R^(tau-1+M/2) Gamma(M/2) / (pi^(M/2) Gamma(tau-1+M/2)),

normalized so that h(|x|^2) integrates to one over R^M.  The Gaussian
generator is the member tau = 1, R = 1/2.  Besides point values this module
supplies the exact k-th derivative of h and the half-line radial integrals

    I_t(a, b) = int_0^inf r^(M+2t-1) h^(2t)(a r^2 + b) dr

that every noncentral shape density consumes: in closed form for integer tau
(the derivative's Leibniz sum terminates) and by adaptive quadrature as an
independent cross-check and as the route for non-integer tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, NumericsError, UnsupportedModelError

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class GeneratorSpec:
    """Kotz type-I generator with exponent ``tau`` >= 1 and rate ``rate`` > 0,
    normalized for an ambient dimension ``dim`` (the total count of real
    coordinates the generator's density lives on)."""

    dim: int
    tau: float = 1.0
    rate: float = 0.5
    family: str = "kotz-type1"

    def __post_init__(self):
        if self.family != "kotz-type1":
            raise UnsupportedModelError(f"unknown generator family {self.family!r}")
        if self.dim < 1:
            raise DomainError("generator dimension must be >= 1")
        if self.tau < 1:
            raise UnsupportedModelError(f"tau must be >= 1, got {self.tau}")
        if self.rate <= 0:
            raise DomainError(f"rate must be positive, got {self.rate}")

    @classmethod
    def gaussian(cls, dim: int) -> "GeneratorSpec":
        return cls(dim=dim, tau=1.0, rate=0.5)

    @classmethod
    def kotz(cls, dim: int, tau: float, rate: float = 0.5) -> "GeneratorSpec":
        return cls(dim=dim, tau=tau, rate=rate)

    @property
    def is_gaussian(self) -> bool:
        return self.tau == 1.0 and self.rate == 0.5

    @property
    def has_integer_exponent(self) -> bool:
        return float(self.tau).is_integer()

    def log_norm_const(self) -> float:
        """log c for the normalization that integrates to one in ``dim``
        real dimensions."""
        M2 = self.dim / 2.0
        return ((self.tau - 1 + M2) * math.log(self.rate) + gammaln(M2)
                - M2 * math.log(math.pi) - gammaln(self.tau - 1 + M2))


def generator_value(spec: GeneratorSpec, y) -> float | np.ndarray:
    """h(y) for y >= 0."""
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(y_arr < 0):
        raise DomainError("generator argument must be nonnegative")
    c = math.exp(spec.log_norm_const())
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.where(y_arr > 0, y_arr ** (spec.tau - 1), 1.0 if spec.tau == 1 else 0.0)
    out = c * core * np.exp(-spec.rate * y_arr)
    return float(out) if np.isscalar(y) or y_arr.ndim == 0 else out


def _leibniz_bracket(spec: GeneratorSpec, k: int, y: np.ndarray) -> np.ndarray:
    """1 + sum_{m>=1} C(k,m) [prod_{i<m}(tau-1-i)] (-R y)^(-m); the series
    terminates at m = tau-1 for integer tau and at m = k otherwise."""
    tau, R = spec.tau, spec.rate
    out = np.ones_like(y)
    prod = 1.0
    m_max = min(k, int(tau) - 1) if spec.has_integer_exponent else k
    for m in range(1, m_max + 1):
        prod *= tau - 1 - (m - 1)
        out = out + math.comb(k, m) * prod * (-R * y) ** (-m)
    return out


def generator_derivative(spec: GeneratorSpec, k: int, y) -> float | np.ndarray:
    """Exact k-th derivative of h, including the normalizing constant.

    For tau = 1 this collapses to (-R)^k h(y).  At y = 0 the value exists
    only while the Leibniz sum stays clear of negative powers (k < tau).
    """
    if k < 0:
        raise DomainError("derivative order must be >= 0")
    y_arr = np.asarray(y, dtype=np.float64)
    scalar = np.isscalar(y) or y_arr.ndim == 0
    if np.any(y_arr < 0):
        raise DomainError("generator argument must be nonnegative")
    if spec.tau == 1:
        out = (-spec.rate) ** k * generator_value(spec, y_arr)
        return float(out) if scalar else out
    if np.any(y_arr == 0) and k >= spec.tau:
        raise DomainError(f"h^({k}) is singular at y=0 for tau={spec.tau}")
    c = math.exp(spec.log_norm_const())
    if np.any(y_arr == 0):
        # k < tau here: at zero only the y^0 Leibniz term can survive,
        # which happens exactly at k = tau-1 (integer tau) with value
        # c * (tau-1)!; every lower order vanishes.
        out = np.empty_like(y_arr)
        pos = y_arr > 0
        out[pos] = generator_derivative(spec, k, y_arr[pos])
        at_zero = 0.0
        if spec.has_integer_exponent and k == int(spec.tau) - 1:
            at_zero = c * math.factorial(int(spec.tau) - 1)
        out[~pos] = at_zero
        return float(out) if scalar else out
    out = (c * (-spec.rate) ** k * y_arr ** (spec.tau - 1) * np.exp(-spec.rate * y_arr)
           * _leibniz_bracket(spec, k, y_arr))
    return float(out) if scalar else out


def generator_log_abs_derivative(spec: GeneratorSpec, k: int, y) -> tuple[np.ndarray, np.ndarray]:
    """(log |h^(k)(y)|, sign) elementwise, overflow-safe in k."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if np.any(y_arr <= 0):
        raise DomainError("log-derivative form requires y > 0")
    base = (spec.log_norm_const() + k * math.log(spec.rate)
            + (spec.tau - 1) * np.log(y_arr) - spec.rate * y_arr)
    sign = np.full_like(y_arr, (-1.0) ** k)
    if spec.tau == 1:
        return base, sign
    bracket = _leibniz_bracket(spec, k, y_arr)
    with np.errstate(divide="ignore"):
        log_abs = base + np.log(np.abs(bracket))
    log_abs = np.where(bracket == 0.0, _NEG_INF, log_abs)
    return log_abs, sign * np.sign(bracket)


def radial_integral_log(spec: GeneratorSpec, M: int, t: int, a: float, b: float,
                        ) -> tuple[float, float]:
    """(log |I_t(a, b)|, sign) by the closed form for integer tau.

    Expands h^(2t) by Leibniz and (a r^2 + b)^j binomially; every piece
    integrates to a gamma function, leaving a finite signed double sum.
    """
    if not spec.has_integer_exponent:
        raise UnsupportedModelError("closed-form radial integral needs integer tau")
    if a <= 0:
        raise DomainError("quadratic coefficient a must be positive")
    if b < 0:
        raise DomainError("offset b must be nonnegative")
    if t < 0:
        raise DomainError("series degree t must be nonnegative")
    tau = int(spec.tau)
    R = spec.rate
    k = 2 * t
    M2 = M / 2.0
    log_R, log_a = math.log(R), math.log(a)
    log_b = math.log(b) if b > 0 else _NEG_INF

    logs: list[float] = []
    signs: list[float] = []
    prod = 1.0  # prod_{i<m} (tau-1-i)
    for m in range(0, min(k, tau - 1) + 1):
        if m >= 1:
            prod *= tau - 1 - (m - 1)
        if prod == 0.0:
            break
        p = tau - 1 - m  # remaining power of y
        for j in range(0, p + 1):
            pow_b = p - j
            if pow_b > 0 and b == 0.0:
                continue
            log_term = (math.log(math.comb(k, m)) + math.log(abs(prod))
                        + (k - m) * log_R + math.log(math.comb(p, j))
                        + j * log_a + (pow_b * log_b if pow_b > 0 else 0.0)
                        + gammaln(M2 + t + j) - (M2 + t + j) * (log_R + log_a))
            logs.append(log_term)
            signs.append(math.copysign(1.0, prod) * (-1.0) ** m)
    if not logs:
        return _NEG_INF, 1.0
    top = max(logs)
    acc = sum(s * math.exp(l - top) for l, s in zip(logs, signs))
    if acc == 0.0:
        return _NEG_INF, 1.0
    log_abs = (spec.log_norm_const() - R * b - math.log(2.0) + top + math.log(abs(acc)))
    return log_abs, math.copysign(1.0, acc)


def radial_integral_magnitude(spec: GeneratorSpec, M: int, t: int, a: float, b: float) -> float:
    """Sum of the absolute closed-form terms of I_t(a, b): the natural scale
    against which cancellation (the integral can have exact zeros) should be
    judged."""
    if not spec.has_integer_exponent:
        raise UnsupportedModelError("closed-form magnitude needs integer tau")
    tau = int(spec.tau)
    k = 2 * t
    M2 = M / 2.0
    R = spec.rate
    total = 0.0
    prod = 1.0
    for m in range(0, min(k, tau - 1) + 1):
        if m >= 1:
            prod *= tau - 1 - (m - 1)
        if prod == 0.0:
            break
        p = tau - 1 - m
        for j in range(0, p + 1):
            if p - j > 0 and b == 0.0:
                continue
            total += math.exp(math.log(math.comb(k, m)) + math.log(abs(prod))
                              + (k - m) * math.log(R) + math.log(math.comb(p, j))
                              + j * math.log(a) + ((p - j) * math.log(b) if p - j > 0 else 0.0)
                              + gammaln(M2 + t + j) - (M2 + t + j) * (math.log(R) + math.log(a)))
    return math.exp(spec.log_norm_const() - R * b - math.log(2.0)) * total


def radial_integral_quad(spec: GeneratorSpec, M: int, t: int, a: float, b: float) -> float:
    """Adaptive-quadrature evaluation of I_t(a, b) on (0, inf); the
    independent cross-check of the closed form and the route for
    non-integer tau."""
    if a <= 0 or b < 0 or t < 0:
        raise DomainError("need a > 0, b >= 0, t >= 0")

    def integrand(r: float) -> float:
        return r ** (M + 2 * t - 1) * generator_derivative(spec, 2 * t, a * r * r + b)

    value, abserr = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-11, limit=400)
    if not math.isfinite(value) or (value != 0 and abserr > 1e-6 * abs(value) + 1e-12):
        raise NumericsError(f"radial quadrature did not converge (value={value}, abserr={abserr})")
    return value


def radial_integral(spec: GeneratorSpec, M: int, t: int, a: float, b: float,
                    method: str = "auto") -> float:
    """I_t(a, b), dispatching between the closed form and quadrature."""
    if method not in ("auto", "closed", "quadrature"):
        raise DomainError(f"unknown method {method!r}")
    if method == "quadrature" or (method == "auto" and not spec.has_integer_exponent):
        return radial_integral_quad(spec, M, t, a, b)
    log_abs, sign = radial_integral_log(spec, M, t, a, b)
    return sign * math.exp(log_abs)


def central_radial_constant(M: int, spec: GeneratorSpec | None = None) -> float:
    """int_0^inf r^(M-1) h(r^2) dr = Gamma(M/2) / (2 pi^(M/2)), which holds
    for every normalized generator; ``spec`` is accepted only for symmetry
    with the quadrature cross-check."""
    if M < 1:
        raise DomainError("dimension must be >= 1")
    return math.exp(gammaln(M / 2.0) - math.log(2.0) - (M / 2.0) * math.log(math.pi))
