# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled series kernels: coefficient-table recursion and the per-degree
monomial contractions.  Interface-compatible with ``_backend_py``."""

import math

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

from ._partitions import dominates, log_leading_coefficient, rho

cnp.import_array()

BACKEND_NAME = "cython"


def build_coef_matrix(parts, int degree):
    """See ``_backend_py.build_coef_matrix``; same contract, C inner loops."""
    cdef int n = len(parts)
    coef_arr = np.zeros((n, n))
    if n == 0:
        return coef_arr
    cdef double[:, :] coef = coef_arr

    rho_arr = np.array([rho(p) for p in parts])
    cdef double[:] rhos = rho_arr
    lead_arr = np.array([math.exp(log_leading_coefficient(p)) for p in parts])
    cdef double[:] lead = lead_arr

    index = {p: k for k, p in enumerate(parts)}
    dom_arr = np.zeros((n, n), dtype=np.uint8)
    for a, kappa in enumerate(parts):
        for b in range(a, n):
            dom_arr[a, b] = 1 if dominates(kappa, parts[b]) else 0
    cdef unsigned char[:, :] dom = dom_arr

    # Precompute, for every partition lam, its raising moves: target index
    # in ``parts`` plus the integer factor (lam_i - lam_j + 2 s).
    move_targets = []
    move_factors = []
    for lam in parts:
        tgt = []
        fac = []
        llen = len(lam)
        for jj in range(1, llen):
            for ii in range(jj):
                for s in range(1, lam[jj] + 1):
                    raised = list(lam)
                    raised[ii] = lam[ii] + s
                    raised[jj] = lam[jj] - s
                    mu = tuple(sorted((p for p in raised if p > 0), reverse=True))
                    k = index.get(mu)
                    if k is None:
                        continue
                    tgt.append(k)
                    fac.append(lam[ii] - lam[jj] + 2 * s)
        move_targets.append(np.asarray(tgt, dtype=np.int64))
        move_factors.append(np.asarray(fac, dtype=np.float64))
    offsets_arr = np.zeros(n + 1, dtype=np.int64)
    for m in range(n):
        offsets_arr[m + 1] = offsets_arr[m] + move_targets[m].shape[0]
    if offsets_arr[n] > 0:
        flat_tgt_arr = np.concatenate(move_targets)
        flat_fac_arr = np.concatenate(move_factors)
    else:
        flat_tgt_arr = np.zeros(0, dtype=np.int64)
        flat_fac_arr = np.zeros(0, dtype=np.float64)
    cdef long long[:] offsets = offsets_arr
    cdef long long[:] flat_tgt = flat_tgt_arr
    cdef double[:] flat_fac = flat_fac_arr

    cdef int i, j
    cdef long long q
    cdef double acc
    for i in range(n):
        coef[i, i] = lead[i]
        for j in range(i + 1, n):
            if not dom[i, j]:
                continue
            acc = 0.0
            for q in range(offsets[j], offsets[j + 1]):
                acc += flat_fac[q] * coef[i, flat_tgt[q]]
            if acc != 0.0:
                coef[i, j] = acc / (rhos[i] - rhos[j])
    return coef_arr


def power_table(x, int max_degree):
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef int nb = x.shape[0]
    cdef int r = x.shape[1]
    out_arr = np.empty((nb, r, max_degree + 1))
    cdef double[:, :, :] out = out_arr
    cdef double[:, :] xv = x
    cdef int b, i, e
    for b in range(nb):
        for i in range(r):
            out[b, i, 0] = 1.0
            for e in range(1, max_degree + 1):
                out[b, i, e] = out[b, i, e - 1] * xv[b, i]
    return out_arr


def monomial_matrix(exponents, part_index, int n_partitions, pow_table):
    cdef const long long[:, :] exps = np.ascontiguousarray(exponents, dtype=np.int64)
    cdef const long long[:] owner = np.ascontiguousarray(part_index, dtype=np.int64)
    cdef const double[:, :, :] pt = np.ascontiguousarray(pow_table)
    cdef int nb = pt.shape[0]
    cdef int r = pt.shape[1]
    cdef int np_total = exps.shape[0]
    out_arr = np.zeros((n_partitions, nb))
    cdef double[:, :] out = out_arr
    cdef int p, b, i
    cdef double prod
    for p in range(np_total):
        for b in range(nb):
            prod = 1.0
            for i in range(r):
                prod *= pt[b, i, exps[p, i]]
            out[owner[p], b] += prod
    return out_arr


def weighted_monomial_sums(weights_per_perm, exponents, pow_table):
    cdef const double[:] w = np.ascontiguousarray(weights_per_perm, dtype=np.float64)
    cdef const long long[:, :] exps = np.ascontiguousarray(exponents, dtype=np.int64)
    cdef const double[:, :, :] pt = np.ascontiguousarray(pow_table)
    cdef int nb = pt.shape[0]
    cdef int r = pt.shape[1]
    cdef int np_total = exps.shape[0]
    out_arr = np.zeros(nb)
    cdef double[:] out = out_arr
    cdef int p, b, i
    cdef double prod
    for b in range(nb):
        for p in range(np_total):
            prod = w[p]
            for i in range(r):
                prod *= pt[b, i, exps[p, i]]
            out[b] += prod
    return out_arr


def signed_degree_series(pow_table, exponents, perm_weights, offsets,
                         log_w, sign_w, log_scale, double log_rel_tol):
    """See ``_backend_py.signed_degree_series``; same contract."""
    cdef const double[:, :, :] pt = np.ascontiguousarray(pow_table)
    cdef const long long[:, :] exps = np.ascontiguousarray(exponents, dtype=np.int64)
    cdef const double[:] w = np.ascontiguousarray(perm_weights, dtype=np.float64)
    cdef const long long[:] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:] lw = np.ascontiguousarray(log_w, dtype=np.float64)
    cdef const double[:] sw = np.ascontiguousarray(sign_w, dtype=np.float64)
    cdef const double[:] ls = np.ascontiguousarray(log_scale, dtype=np.float64)

    cdef int nb = pt.shape[0]
    cdef int r = pt.shape[1]
    cdef int max_degree = lw.shape[0] - 1
    cdef double NEG_INF = -np.inf

    run_max_arr = np.full(nb, NEG_INF)
    acc_arr = np.zeros(nb)
    below_arr = np.zeros(nb, dtype=np.int64)
    cdef double[:] run_max = run_max_arr
    cdef double[:] acc = acc_arr
    cdef long long[:] below = below_arr

    cdef int t, b, i, n_below
    cdef long long p
    cdef double s, prod, log_term, sign_term, log_partial, a
    cdef int degrees_used = 0
    cdef bint lw_finite

    for t in range(max_degree + 1):
        lw_finite = lw[t] > NEG_INF
        n_below = 0
        for b in range(nb):
            s = 0.0
            for p in range(offs[t], offs[t + 1]):
                prod = w[p]
                for i in range(r):
                    prod *= pt[b, i, exps[p, i]]
                s += prod
            if s != 0.0 and lw_finite:
                log_term = lw[t] + t * ls[b] + log(fabs(s))
                sign_term = sw[t] * (1.0 if s > 0 else -1.0)
            else:
                log_term = NEG_INF
                sign_term = 0.0
            if log_term > run_max[b]:
                if run_max[b] > NEG_INF:
                    acc[b] *= exp(run_max[b] - log_term)
                run_max[b] = log_term
            if log_term > NEG_INF:
                acc[b] += sign_term * exp(log_term - run_max[b])
            a = fabs(acc[b])
            if a > 0.0 and run_max[b] > NEG_INF:
                log_partial = run_max[b] + log(a)
            else:
                log_partial = NEG_INF
            if (log_term < log_rel_tol + log_partial) or \
                    (log_term == NEG_INF and log_partial == NEG_INF):
                below[b] += 1
            else:
                below[b] = 0
            if below[b] >= 2:
                n_below += 1
        degrees_used = t
        if t > 0 and n_below == nb:
            break

    log_abs_arr = np.empty(nb)
    sign_arr = np.empty(nb)
    cdef double[:] log_abs = log_abs_arr
    cdef double[:] sign_out = sign_arr
    cdef bint converged = True
    for b in range(nb):
        a = fabs(acc[b])
        if a > 0.0 and run_max[b] > NEG_INF:
            log_abs[b] = run_max[b] + log(a)
        else:
            log_abs[b] = NEG_INF
        sign_out[b] = 0.0 if acc[b] == 0.0 else (1.0 if acc[b] > 0 else -1.0)
        if below[b] < 2:
            converged = False
    if max_degree == 0:
        converged = True
    return log_abs_arr, sign_arr, degrees_used, converged
