"""Series evaluation: truncated, tolerance-controlled sums of weighted zonal
polynomials, in plain and in log-magnitude-safe batched form.

The noncentral densities all reduce to sums

    sum_t  d(t) * sum_{kappa |- t} C_kappa(B) / (a)_kappa

with a degree factor ``d(t)`` that may involve huge gamma ratios and a PSD
argument ``B``.  The batched evaluator keeps everything in log magnitude plus
sign: eigenvalues are rescaled to [0, 1], the rescale re-enters through the
degree weight, and degrees are combined by a signed log-sum-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ..errors import DimensionError, DomainError
from ._partitions import Partition, as_parts
from ._tables import (contracted_degree_sum, degree_table, monomial_values,
                      pochhammer_vector, power_table, series_bundle,
                      signed_degree_series)

_LOG_EPS = -745.0  # below exp() underflow; stands in for log(0)


@dataclass
class SeriesControl:
    """Truncation policy: hard degree cap plus a relative tail tolerance.

    A series stops once the absolute degree contribution has stayed below
    ``rel_tol`` times the running partial sum for two consecutive degrees
    (single-degree checks can false-stop on sign-alternating weights).
    """

    max_degree: int = 120
    rel_tol: float = 1e-10

    def __post_init__(self):
        if self.max_degree < 0:
            raise DomainError("max_degree must be >= 0")
        if self.rel_tol <= 0:
            raise DomainError("rel_tol must be positive")


@dataclass
class SeriesDiagnostics:
    converged: bool
    degrees_used: int
    last_term: float
    tail_ratio: float


def gen_pochhammer(a: float, kappa) -> float:
    """Generalized rising factorial prod_j (a - (j-1)/2)_{k_j}."""
    acc = 1.0
    for j, tj in enumerate(as_parts(kappa), start=1):
        base = a - (j - 1) / 2.0
        for i in range(tj):
            acc *= base + i
    return acc


def multivariate_gamma(s: int, a: float) -> float:
    """Gamma_s(a) = pi^{s(s-1)/4} prod_{j=1}^{s} Gamma(a - (j-1)/2)."""
    if s < 1:
        raise DimensionError("order s must be >= 1")
    acc = math.pi ** (s * (s - 1) / 4.0)
    for j in range(1, s + 1):
        arg = a - (j - 1) / 2.0
        if arg <= 0 and float(arg).is_integer():
            raise DomainError(f"Gamma pole at a - (j-1)/2 = {arg} (j={j})")
        acc *= math.gamma(arg)
    return acc


def log_multivariate_gamma(s: int, a: float) -> float:
    """log Gamma_s(a); requires a > (s-1)/2 so every factor is positive."""
    if s < 1:
        raise DimensionError("order s must be >= 1")
    if a <= (s - 1) / 2.0:
        raise DomainError(f"log Gamma_{s}({a}) needs a > (s-1)/2")
    return (s * (s - 1) / 4.0) * math.log(math.pi) + sum(
        math.lgamma(a - (j - 1) / 2.0) for j in range(1, s + 1))


def _eigs_of(matrix_or_eigs) -> np.ndarray:
    arr = np.asarray(matrix_or_eigs, dtype=np.float64)
    if arr.ndim == 1:
        return arr
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        if not np.allclose(arr, arr.T, rtol=0, atol=1e-10 * max(1.0, float(np.abs(arr).max()))):
            raise DomainError("matrix argument must be symmetric")
        return np.linalg.eigvalsh(arr)
    raise DimensionError(f"expected square matrix or eigenvalue vector, got shape {arr.shape}")


def zonal_polynomial(kappa, eigs) -> float:
    """C_kappa at the given eigenvalues, normalized so that the polynomials
    of one degree sum to (trace)^degree.  Zero when the partition has more
    parts than there are eigenvalues."""
    parts = as_parts(kappa)
    x = np.asarray(eigs, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError("eigs must be a nonempty 1-d array")
    if len(parts) > x.size:
        return 0.0
    t = sum(parts)
    if t == 0:
        return 1.0
    table = degree_table(t, x.size)
    row = table.parts.index(parts)
    pt = power_table(x[None, :], t)
    mono = monomial_values(table, pt)[:, 0]
    return float(table.coef[row] @ mono)


def weighted_zonal_series(matrix_or_eigs, weight: Callable[[int, Partition], float],
                          ctrl: SeriesControl | None = None,
                          ) -> tuple[float, SeriesDiagnostics]:
    """sum_{t=0}^{T} sum_{kappa |- t} weight(t, kappa) * C_kappa(A), truncated
    by the control's tolerance rule.  Returns the value and diagnostics; a
    missed tolerance sets ``converged=False`` rather than raising."""
    ctrl = ctrl or SeriesControl()
    x = _eigs_of(matrix_or_eigs)
    r = x.size
    pt = power_table(x[None, :], ctrl.max_degree)
    total = 0.0
    below = 0
    last_term = 0.0
    tail_ratio = math.inf
    degrees_used = 0
    for t in range(ctrl.max_degree + 1):
        table = degree_table(t, r)
        if table.n_partitions:
            mono = monomial_values(table, pt)[:, 0]
            cvals = table.coef @ mono
            term = sum(weight(t, Partition(p)) * cvals[k]
                       for k, p in enumerate(table.parts))
        else:
            term = 0.0
        total += term
        degrees_used = t
        last_term = abs(term)
        tail_ratio = last_term / abs(total) if total != 0.0 else math.inf
        if t > 0:
            below = below + 1 if tail_ratio < ctrl.rel_tol else 0
            if below >= 2:
                return total, SeriesDiagnostics(True, degrees_used, last_term, tail_ratio)
    converged = ctrl.max_degree == 0 or below >= 2
    return total, SeriesDiagnostics(converged, degrees_used, last_term, tail_ratio)


def _prepare_batch(eigs: np.ndarray, max_degree: int):
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.ndim != 2:
        raise DimensionError("eigs batch must be 2-d (points x eigenvalues)")
    if np.any(eigs < -1e-12):
        raise DomainError("batch series requires nonnegative eigenvalues")
    eigs = np.clip(eigs, 0.0, None)
    scale = eigs.max(axis=1)
    safe_scale = np.where(scale > 0, scale, 1.0)
    log_scale = np.log(safe_scale)
    pt = power_table(eigs / safe_scale[:, None], max_degree)
    return pt, log_scale


def log_series_batch_arrays(eigs: np.ndarray, denominator_a: float | None,
                            log_w: np.ndarray, sign_w: np.ndarray,
                            ctrl: SeriesControl,
                            ) -> tuple[np.ndarray, np.ndarray, SeriesDiagnostics]:
    """Fused-kernel variant of ``log_series_batch`` for scalar-per-degree
    weights given as arrays of length max_degree + 1."""
    pt, log_scale = _prepare_batch(eigs, ctrl.max_degree)
    bundle = series_bundle(denominator_a, ctrl.max_degree, eigs.shape[1])
    log_w = np.ascontiguousarray(log_w, dtype=np.float64)
    sign_w = np.ascontiguousarray(sign_w, dtype=np.float64)
    if log_w.shape != (ctrl.max_degree + 1,) or sign_w.shape != log_w.shape:
        raise DimensionError("weight arrays must have length max_degree + 1")
    log_abs, signs, degrees_used, converged = signed_degree_series(
        pt, bundle, log_w, sign_w, log_scale, math.log(ctrl.rel_tol))
    diag = SeriesDiagnostics(bool(converged), int(degrees_used), math.nan, math.nan)
    return log_abs, signs, diag


def log_series_batch(eigs: np.ndarray,
                     denominator_a: float | None,
                     degree_logweight: Callable[[int], tuple],
                     ctrl: SeriesControl,
                     ) -> tuple[np.ndarray, np.ndarray, SeriesDiagnostics]:
    """Signed log-magnitude evaluation of a weighted zonal series at a batch
    of PSD spectra.

    ``eigs`` is (nb, r) with nonnegative entries.  ``degree_logweight(t)``
    returns ``(log_abs, sign)`` as scalars or (nb,) arrays; the inner
    partition weights are 1/(a)_kappa (or 1 when ``denominator_a`` is None).
    Returns (log_abs_sum, sign_sum, diagnostics); the stopping rule matches
    ``weighted_zonal_series``.
    """
    nb, r = np.asarray(eigs).shape
    pt, log_scale = _prepare_batch(eigs, ctrl.max_degree)

    run_max = np.full(nb, -np.inf)
    acc = np.zeros(nb)             # signed sum rescaled by exp(run_max)
    below = np.zeros(nb, dtype=np.int64)
    last_log_term = np.full(nb, -np.inf)
    tail_ratio = np.full(nb, np.inf)
    degrees_used = 0

    for t in range(ctrl.max_degree + 1):
        table = degree_table(t, r)
        if table.n_partitions:
            if denominator_a is None:
                pweights = np.ones(table.n_partitions)
            else:
                poch = pochhammer_vector(denominator_a, t, r)
                if np.any(poch <= 0):
                    raise DomainError("partition denominators must be positive")
                pweights = 1.0 / poch
            s_t = contracted_degree_sum(table, pweights, pt[:, :, :t + 1])
        else:
            s_t = np.zeros(nb)
        logw, sign_w = degree_logweight(t)
        logw = np.broadcast_to(np.asarray(logw, dtype=np.float64), (nb,))
        sign_w = np.broadcast_to(np.asarray(sign_w, dtype=np.float64), (nb,))
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(s_t != 0.0,
                                logw + t * log_scale + np.log(np.abs(s_t)),
                                -np.inf)
        log_term = np.where(np.isfinite(logw), log_term, -np.inf)
        sign_term = sign_w * np.sign(s_t)

        # fold the degree into the running signed log-sum-exp
        grow = log_term > run_max
        if np.any(grow):
            shrink = np.where(grow, np.exp(run_max - np.maximum(log_term, _LOG_EPS)), 1.0)
            shrink = np.where(np.isfinite(run_max), shrink, 0.0)
            acc = np.where(grow, acc * shrink, acc)
            run_max = np.where(grow, log_term, run_max)
        contrib = np.where(np.isfinite(log_term),
                           sign_term * np.exp(log_term - np.where(np.isfinite(run_max), run_max, 0.0)),
                           0.0)
        acc += contrib
        degrees_used = t

        with np.errstate(divide="ignore", invalid="ignore"):
            log_partial = run_max + np.log(np.abs(acc))
        log_partial = np.where(np.abs(acc) > 0, log_partial, -np.inf)
        is_below = log_term < math.log(ctrl.rel_tol) + log_partial
        is_below |= np.isneginf(log_term) & np.isneginf(log_partial)
        last_log_term = log_term
        with np.errstate(invalid="ignore"):
            tail_ratio = np.exp(np.minimum(log_term - log_partial, 700.0))
        if t > 0:
            below = np.where(is_below, below + 1, 0)
            if np.all(below >= 2):
                break

    converged = bool(np.all(below >= 2)) or ctrl.max_degree == 0
    log_abs = run_max + np.where(np.abs(acc) > 0, np.log(np.maximum(np.abs(acc), 1e-308)), -np.inf)
    log_abs = np.where(np.isfinite(run_max), log_abs, -np.inf)
    signs = np.sign(acc)
    diag = SeriesDiagnostics(converged, degrees_used,
                             float(np.max(np.where(np.isfinite(last_log_term), last_log_term, -np.inf))),
                             float(np.nanmax(tail_ratio)))
    return log_abs, signs, diag
