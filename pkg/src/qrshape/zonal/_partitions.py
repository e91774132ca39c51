"""Integer partitions and the combinatorial tables behind the series kernels.

Partitions of a degree ``t`` index the terms of every matrix-argument series
in this package.  For evaluation at ``r`` eigenvalues only partitions with at
most ``r`` parts contribute, and that restriction is closed under the
coefficient recursion, so all tables are built per ``(t, r)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


@dataclass(frozen=True)
class Partition:
    """A partition of a nonnegative integer: non-increasing positive parts."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if any(p <= 0 for p in parts):
            raise DimensionError(f"partition parts must be positive, got {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise DimensionError(f"partition parts must be non-increasing, got {parts}")

    @property
    def weight(self) -> int:
        return sum(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, i):
        return self.parts[i]


def as_parts(kappa) -> tuple[int, ...]:
    """Coerce a Partition or iterable of parts to a plain tuple."""
    if isinstance(kappa, Partition):
        return kappa.parts
    return Partition(tuple(kappa)).parts


def partition_tuples(t: int, max_parts: int | None = None) -> list[tuple[int, ...]]:
    """All partitions of ``t`` (optionally with at most ``max_parts`` parts)
    in reverse-lexicographic (descending) order, e.g. (4), (3,1), (2,2), ...
    """
    if t < 0:
        raise DimensionError(f"cannot partition a negative integer: {t}")
    limit = t if max_parts is None else max_parts
    out: list[tuple[int, ...]] = []

    def rec(remaining: int, cap: int, prefix: tuple[int, ...], slots: int):
        if remaining == 0:
            out.append(prefix)
            return
        if slots == 0:
            return
        for p in range(min(remaining, cap), 0, -1):
            rec(remaining - p, p, prefix + (p,), slots - 1)

    rec(t, t, (), limit)
    return out


def partitions_of(t: int, max_parts: int | None = None) -> list[Partition]:
    """Public enumeration: all partitions of ``t`` as Partition objects."""
    return [Partition(p) for p in partition_tuples(t, max_parts)]


def dominates(kappa: tuple[int, ...], lam: tuple[int, ...]) -> bool:
    """True when ``kappa`` >= ``lam`` in the dominance (majorization) order.

    Both arguments must partition the same integer.
    """
    acc_k = acc_l = 0
    for i in range(max(len(kappa), len(lam))):
        acc_k += kappa[i] if i < len(kappa) else 0
        acc_l += lam[i] if i < len(lam) else 0
        if acc_k < acc_l:
            return False
    return acc_k == acc_l


def conjugate(kappa: tuple[int, ...]) -> tuple[int, ...]:
    if not kappa:
        return ()
    return tuple(sum(1 for p in kappa if p > j) for j in range(kappa[0]))


def rho(kappa: tuple[int, ...]) -> float:
    """Laplace-Beltrami eigenvalue component sum_i k_i * (k_i - i), 1-based i."""
    return float(sum(p * (p - i) for i, p in enumerate(kappa, start=1)))


def log_leading_coefficient(kappa: tuple[int, ...]) -> float:
    """log of the dominant monomial coefficient of the degree-normalized
    zonal polynomial: 2^t * t! / prod_cells (2*arm + leg + 2)."""
    t = sum(kappa)
    conj = conjugate(kappa)
    acc = t * math.log(2.0) + math.lgamma(t + 1)
    for i, p in enumerate(kappa):  # row i (0-based), columns j = 0..p-1
        for j in range(p):
            arm = p - 1 - j
            leg = conj[j] - i - 1
            acc -= math.log(2 * arm + leg + 2)
    return acc


@dataclass
class MonomialPlan:
    """Distinct-permutation exponent table for evaluating all monomial
    symmetric functions of one degree at ``nvars`` variables.

    exponents[p] is one exponent vector (length nvars); rows with
    part_index[p] == k belong to partition index k of the degree table.
    """

    exponents: np.ndarray  # (n_perms, nvars) int64
    part_index: np.ndarray  # (n_perms,) int64
    n_partitions: int = field(default=0)

    @classmethod
    def build(cls, parts: list[tuple[int, ...]], nvars: int) -> "MonomialPlan":
        rows: list[tuple[int, ...]] = []
        owner: list[int] = []
        for k, lam in enumerate(parts):
            padded = lam + (0,) * (nvars - len(lam))
            for perm in sorted(set(itertools.permutations(padded))):
                rows.append(perm)
                owner.append(k)
        if rows:
            exponents = np.asarray(rows, dtype=np.int64)
        else:
            exponents = np.zeros((0, nvars), dtype=np.int64)
        return cls(exponents=exponents, part_index=np.asarray(owner, dtype=np.int64),
                   n_partitions=len(parts))
