"""Pure NumPy implementation of the series kernels.

Mirrors the compiled backend in ``_backend_cy.pyx``; either can serve the
tables/series layer.  Kept dependency-free beyond NumPy so the package works
without a C toolchain.
"""

from __future__ import annotations

import math

import numpy as np

from ._partitions import dominates, log_leading_coefficient, rho

BACKEND_NAME = "python"


def build_coef_matrix(parts: list[tuple[int, ...]], degree: int) -> np.ndarray:
    """Monomial coefficients of degree-normalized zonal polynomials.

    Row ``i``, column ``j`` holds the coefficient of the monomial symmetric
    function of ``parts[j]`` in the polynomial indexed by ``parts[i]``.
    Lower rows are filled through the eigenfunction recursion of the radial
    Laplace-Beltrami operator, seeded by the closed-form dominant coefficient.
    ``parts`` must be in reverse-lexicographic (descending) order so that
    every partition needed by the recursion is already processed.
    """
    n = len(parts)
    coef = np.zeros((n, n))
    if n == 0:
        return coef
    index = {p: k for k, p in enumerate(parts)}
    rhos = [rho(p) for p in parts]

    for i, kappa in enumerate(parts):
        coef[i, i] = math.exp(log_leading_coefficient(kappa))
        for j in range(i + 1, n):
            lam = parts[j]
            if not dominates(kappa, lam):
                continue
            acc = 0.0
            llen = len(lam)
            for jj in range(1, llen):
                lam_j = lam[jj]
                for ii in range(jj):
                    lam_i = lam[ii]
                    for s in range(1, lam_j + 1):
                        raised = list(lam)
                        raised[ii] = lam_i + s
                        raised[jj] = lam_j - s
                        mu = tuple(sorted((p for p in raised if p > 0), reverse=True))
                        k = index.get(mu)
                        if k is None:
                            continue
                        acc += (lam_i - lam_j + 2 * s) * coef[i, k]
            if acc != 0.0:
                coef[i, j] = acc / (rhos[i] - rhos[j])
    return coef


def power_table(x: np.ndarray, max_degree: int) -> np.ndarray:
    """pow[b, i, e] = x[b, i] ** e for e = 0..max_degree."""
    x = np.asarray(x, dtype=np.float64)
    nb, r = x.shape
    out = np.empty((nb, r, max_degree + 1))
    out[:, :, 0] = 1.0
    for e in range(1, max_degree + 1):
        out[:, :, e] = out[:, :, e - 1] * x
    return out


def monomial_matrix(exponents: np.ndarray, part_index: np.ndarray,
                    n_partitions: int, pow_table: np.ndarray) -> np.ndarray:
    """Evaluate all monomial symmetric functions of one degree.

    Returns M with M[k, b] = m_{parts[k]}(x_b), from the distinct-permutation
    exponent rows and a precomputed power table.
    """
    nb, r, _ = pow_table.shape
    if exponents.shape[0] == 0:
        return np.zeros((n_partitions, nb))
    gathered = pow_table[:, np.arange(r)[None, :], exponents]
    prods = gathered.prod(axis=2)  # (nb, n_perms)
    out = np.zeros((n_partitions, nb))
    np.add.at(out, part_index, prods.T)
    return out


def weighted_monomial_sums(weights_per_perm: np.ndarray, exponents: np.ndarray,
                           pow_table: np.ndarray) -> np.ndarray:
    """sum_p w_p * prod_i x_b[i] ** exponents[p, i] for each batch point b.

    This is the per-degree contraction of a zonal series once the coefficient
    matrix and per-partition weights have been folded into per-permutation
    weights.
    """
    nb, r, _ = pow_table.shape
    if exponents.shape[0] == 0:
        return np.zeros(nb)
    gathered = pow_table[:, np.arange(r)[None, :], exponents]
    prods = gathered.prod(axis=2)  # (nb, n_perms)
    return prods @ weights_per_perm


def signed_degree_series(pow_table: np.ndarray, exponents: np.ndarray,
                         perm_weights: np.ndarray, offsets: np.ndarray,
                         log_w: np.ndarray, sign_w: np.ndarray,
                         log_scale: np.ndarray, log_rel_tol: float,
                         ) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Fused evaluation of a whole signed log-space series.

    Degree t uses permutation rows offsets[t]:offsets[t+1]; the per-degree
    batch sums are combined by a running signed log-sum-exp, stopping after
    two consecutive degrees fall below the tolerance relative to the partial
    sums of every batch point.  Returns (log_abs, sign, degrees_used,
    converged).
    """
    nb = pow_table.shape[0]
    r = pow_table.shape[1]
    max_degree = log_w.shape[0] - 1
    run_max = np.full(nb, -np.inf)
    acc = np.zeros(nb)
    below = np.zeros(nb, dtype=np.int64)
    degrees_used = 0
    cols = np.arange(r)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(max_degree + 1):
            lo, hi = offsets[t], offsets[t + 1]
            if hi > lo:
                gathered = pow_table[:, cols, exponents[lo:hi]]
                s_t = gathered.prod(axis=2) @ perm_weights[lo:hi]
            else:
                s_t = np.zeros(nb)
            log_term = np.where(s_t != 0.0,
                                log_w[t] + t * log_scale + np.log(np.abs(s_t)),
                                -np.inf)
            if not np.isfinite(log_w[t]):
                log_term = np.full(nb, -np.inf)
            sign_term = sign_w[t] * np.sign(s_t)
            grow = log_term > run_max
            if np.any(grow):
                shrink = np.where(np.isfinite(run_max),
                                  np.exp(run_max - np.maximum(log_term, -745.0)), 0.0)
                acc = np.where(grow, acc * shrink, acc)
                run_max = np.where(grow, log_term, run_max)
            contrib = np.where(np.isfinite(log_term),
                               sign_term * np.exp(log_term - np.where(np.isfinite(run_max), run_max, 0.0)),
                               0.0)
            acc += contrib
            degrees_used = t
            log_partial = np.where(np.abs(acc) > 0, run_max + np.log(np.abs(acc)), -np.inf)
            is_below = (log_term < log_rel_tol + log_partial) | (
                np.isneginf(log_term) & np.isneginf(log_partial))
            if t > 0:
                below = np.where(is_below, below + 1, 0)
                if np.all(below >= 2):
                    break
    converged = bool(np.all(below >= 2)) or max_degree == 0
    log_abs = np.where(np.abs(acc) > 0, run_max + np.log(np.maximum(np.abs(acc), 1e-308)), -np.inf)
    log_abs = np.where(np.isfinite(run_max), log_abs, -np.inf)
    return log_abs, np.sign(acc), degrees_used, converged
