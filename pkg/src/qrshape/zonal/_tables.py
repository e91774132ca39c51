"""Cached per-degree tables: partitions, coefficient matrices, permutation
plans and generalized-Pochhammer vectors.

All tables are immutable once built.  Construction is guarded by a lock so
concurrent callers see either a fully built table or build their own; results
are identical either way.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import numpy as np

from ._partitions import MonomialPlan, partition_tuples

_FORCED_PURE = os.environ.get("QRSHAPE_PURE_PYTHON", "") not in ("", "0")

if _FORCED_PURE:
    from . import _backend_py as _backend
else:
    try:
        from . import _backend_cy as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _backend_py as _backend

BACKEND_NAME: str = _backend.BACKEND_NAME


@dataclass(frozen=True)
class DegreeTable:
    """Everything needed to evaluate one degree of a zonal series at up to
    ``nvars`` eigenvalues."""

    degree: int
    nvars: int
    parts: tuple[tuple[int, ...], ...]
    coef: np.ndarray          # (n, n) monomial coefficients, row = polynomial
    plan: MonomialPlan

    @property
    def n_partitions(self) -> int:
        return len(self.parts)


_tables: dict[tuple[int, int], DegreeTable] = {}
_poch: dict[tuple[float, int, int], np.ndarray] = {}
_lock = threading.Lock()


def degree_table(degree: int, nvars: int) -> DegreeTable:
    key = (degree, nvars)
    table = _tables.get(key)
    if table is not None:
        return table
    with _lock:
        table = _tables.get(key)
        if table is not None:
            return table
        parts = partition_tuples(degree, max_parts=nvars)
        coef = _backend.build_coef_matrix(parts, degree)
        coef.setflags(write=False)
        table = DegreeTable(degree=degree, nvars=nvars, parts=tuple(parts),
                            coef=coef, plan=MonomialPlan.build(parts, nvars))
        _tables[key] = table
        return table


def pochhammer_vector(a: float, degree: int, nvars: int) -> np.ndarray:
    """(a)_kappa for every partition of ``degree`` with at most ``nvars``
    parts, in table order."""
    key = (float(a), degree, nvars)
    vec = _poch.get(key)
    if vec is not None:
        return vec
    with _lock:
        vec = _poch.get(key)
        if vec is not None:
            return vec
        parts = partition_tuples(degree, max_parts=nvars)
        out = np.empty(len(parts))
        for k, kappa in enumerate(parts):
            acc = 1.0
            for j, tj in enumerate(kappa, start=1):
                base = a - (j - 1) / 2.0
                for i in range(tj):
                    acc *= base + i
            out[k] = acc
        out.setflags(write=False)
        _poch[key] = out
        return out


@dataclass(frozen=True)
class SeriesBundle:
    """Degrees 0..max_degree packed for the fused series kernel: distinct
    permutation exponents, per-permutation weights (coefficient matrix times
    inverse Pochhammer vector, spread over permutations) and degree offsets."""

    max_degree: int
    nvars: int
    denominator_a: float | None
    exponents: np.ndarray   # (P_total, nvars) int64
    weights: np.ndarray     # (P_total,)
    offsets: np.ndarray     # (max_degree + 2,) int64


_bundles: dict[tuple[float | None, int, int], SeriesBundle] = {}


def series_bundle(denominator_a: float | None, max_degree: int, nvars: int) -> SeriesBundle:
    key = (None if denominator_a is None else float(denominator_a), max_degree, nvars)
    bundle = _bundles.get(key)
    if bundle is not None:
        return bundle
    exps = []
    weights = []
    offsets = np.zeros(max_degree + 2, dtype=np.int64)
    for t in range(max_degree + 1):
        table = degree_table(t, nvars)
        if table.n_partitions:
            if denominator_a is None:
                pweights = np.ones(table.n_partitions)
            else:
                poch = pochhammer_vector(denominator_a, t, nvars)
                if np.any(poch <= 0):
                    raise ValueError("partition denominators must be positive")
                pweights = 1.0 / poch
            per_part = table.coef.T @ pweights
            exps.append(table.plan.exponents)
            weights.append(per_part[table.plan.part_index])
            offsets[t + 1] = offsets[t] + table.plan.exponents.shape[0]
        else:
            offsets[t + 1] = offsets[t]
    exponents = (np.concatenate(exps) if exps else np.zeros((0, nvars), dtype=np.int64))
    wvec = (np.concatenate(weights) if weights else np.zeros(0))
    exponents.setflags(write=False)
    wvec.setflags(write=False)
    bundle = SeriesBundle(max_degree=max_degree, nvars=nvars,
                          denominator_a=denominator_a, exponents=exponents,
                          weights=wvec, offsets=offsets)
    with _lock:
        return _bundles.setdefault(key, bundle)


def signed_degree_series(pow_table: np.ndarray, bundle: SeriesBundle,
                         log_w: np.ndarray, sign_w: np.ndarray,
                         log_scale: np.ndarray, log_rel_tol: float):
    return _backend.signed_degree_series(pow_table, bundle.exponents, bundle.weights,
                                         bundle.offsets, log_w, sign_w, log_scale,
                                         log_rel_tol)


def clear_caches() -> None:
    with _lock:
        _tables.clear()
        _poch.clear()
        _bundles.clear()


def power_table(x: np.ndarray, max_degree: int) -> np.ndarray:
    return _backend.power_table(x, max_degree)


def monomial_values(table: DegreeTable, pow_table: np.ndarray) -> np.ndarray:
    """m_lambda(x_b) for all partitions of the table: shape (n, nb)."""
    return _backend.monomial_matrix(table.plan.exponents, table.plan.part_index,
                                    table.n_partitions, pow_table)


def contracted_degree_sum(table: DegreeTable, partition_weights: np.ndarray,
                          pow_table: np.ndarray) -> np.ndarray:
    """sum_kappa partition_weights[kappa] * C_kappa(x_b) for each batch
    point, returned as shape (nb,)."""
    if table.n_partitions == 0:
        return np.zeros(pow_table.shape[0])
    per_part = table.coef.T @ partition_weights
    per_perm = per_part[table.plan.part_index]
    return _backend.weighted_monomial_sums(per_perm, table.plan.exponents, pow_table)
