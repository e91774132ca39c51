"""Landmark geometry: Helmert reduction, covariance whitening, triangular QR
coordinates and generalized polar (angle) coordinates.

A raw N x K landmark matrix X is reduced in stages

    Y = L X Theta^{-1/2}   (translation removed, column covariance whitened)
    Y = T H                (T lower triangular, H with orthonormal rows)
    T = r W(u)             (unit-norm direction W, angles u, size r)

Dimension bookkeeping used throughout: n = min(N-1, K), M = (N-1)K and
m = (N-1)K - nK + n(n+1)/2 - 1 (the number of angles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import (DegenerateConfigurationError, DegenerateSizeError,
                     DimensionError, DomainError)

RANK_RTOL = 1e-12  # a pivot below RANK_RTOL * ||Y||_F counts as zero


class ReflectionMode(Enum):
    """Whether the orthonormal factor may include reflections.

    INCLUDES_REFLECTION pins the last triangular diagonal nonnegative and
    identifies mirror images; EXCLUDES_REFLECTION keeps the orthonormal
    factor special-orthogonal and lets that diagonal carry the sign.
    The distinction only exists when N-1 >= K.
    """

    INCLUDES_REFLECTION = "reflect"
    EXCLUDES_REFLECTION = "noreflect"


def shape_dims(N: int, K: int) -> tuple[int, int, int, int]:
    """(n, M, n_coords, m): triangular rank, total dimension, number of
    nonzero triangular coordinates and number of angles."""
    if N < 2 or K < 1:
        raise DimensionError(f"need N >= 2 and K >= 1, got N={N}, K={K}")
    n = min(N - 1, K)
    M = (N - 1) * K
    n_coords = M - n * K + n * (n + 1) // 2
    return n, M, n_coords, n_coords - 1


@dataclass(frozen=True)
class LandmarkConfiguration:
    """An N x K matrix of K-dimensional coordinates of N labeled points."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"landmark data must be 2-d, got shape {arr.shape}")
        if arr.shape[0] < 2 or arr.shape[1] < 1:
            raise DimensionError(f"need at least 2 landmarks and 1 dimension, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("landmark data contains non-finite entries")
        object.__setattr__(self, "data", arr)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def K(self) -> int:
        return self.data.shape[1]

    @property
    def n(self) -> int:
        return min(self.N - 1, self.K)

    @property
    def M(self) -> int:
        return (self.N - 1) * self.K

    @property
    def m(self) -> int:
        return shape_dims(self.N, self.K)[3]


def triangular_pattern(N: int, K: int) -> list[tuple[int, int]]:
    """Positions (row, col) of the nonzero triangular entries, column-major.

    This fixed ordering defines the coordinate vector ("vech") used by the
    polar transform, so it must never change.
    """
    n = shape_dims(N, K)[0]
    return [(i, j) for j in range(n) for i in range(j, N - 1)]


@lru_cache(maxsize=None)
def _pattern_arrays(N: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    pat = triangular_pattern(N, K)
    rows = np.array([i for i, _ in pat], dtype=np.intp)
    cols = np.array([j for _, j in pat], dtype=np.intp)
    return rows, cols


def vech(T: np.ndarray, N: int, K: int) -> np.ndarray:
    rows, cols = _pattern_arrays(N, K)
    return np.asarray(T)[rows, cols]


def unvech(x: np.ndarray, N: int, K: int) -> np.ndarray:
    n = shape_dims(N, K)[0]
    rows, cols = _pattern_arrays(N, K)
    if x.shape != rows.shape:
        raise DimensionError(f"coordinate vector has length {len(x)}, expected {len(rows)}")
    T = np.zeros((N - 1, n))
    T[rows, cols] = x
    return T


def _positive_diagonal_indices(N: int, K: int, mode: ReflectionMode) -> tuple[list[int], int | None]:
    """Diagonal (i, i) entries constrained strictly positive, plus the index
    of the sign-carrying entry (K-1, K-1) when it is merely nonnegative."""
    n = shape_dims(N, K)[0]
    strict = list(range(min(n, K - 1)))
    last = None
    if N - 1 >= K and mode is ReflectionMode.INCLUDES_REFLECTION:
        last = K - 1
    return strict, last


@dataclass(frozen=True)
class SizeAndShape:
    """Lower-triangular factor T of the QR step, with its reflection mode.

    Invariants: zero above the diagonal; t_ii > 0 for i up to min(n, K-1);
    in reflection-including mode with N-1 >= K the entry t_KK is >= 0, in
    reflection-excluding mode it is unrestricted.
    """

    T: np.ndarray
    reflection_mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION
    K: int = field(default=0)  # 0 means "infer from the column count"

    def __post_init__(self):
        T = np.asarray(self.T, dtype=np.float64)
        if T.ndim != 2:
            raise DimensionError("T must be 2-d")
        K = self.K if self.K else T.shape[1]
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "K", K)
        N = T.shape[0] + 1
        n = shape_dims(N, K)[0]
        if T.shape[1] != n:
            raise DimensionError(f"T has {T.shape[1]} columns, expected n={n}")
        scale = np.linalg.norm(T)
        for i in range(T.shape[0]):
            for j in range(i + 1, T.shape[1]):
                if abs(T[i, j]) > RANK_RTOL * max(scale, 1.0):
                    raise DomainError(f"T must be lower triangular; entry {(i, j)} is {T[i, j]}")
        strict, last = _positive_diagonal_indices(N, K, self.reflection_mode)
        for i in strict:
            if not T[i, i] > 0:
                raise DomainError(f"diagonal entry t_{i+1}{i+1} must be positive, got {T[i, i]}")
        if last is not None and T[last, last] < 0:
            raise DomainError("last diagonal entry must be nonnegative when reflections are included")

    @property
    def N(self) -> int:
        return self.T.shape[0] + 1

    @property
    def n(self) -> int:
        return self.T.shape[1]

    @property
    def size(self) -> float:
        return float(np.linalg.norm(self.T))

    def coords(self) -> np.ndarray:
        return vech(self.T, self.N, self.K)


@dataclass(frozen=True)
class ShapeCoordinates:
    """Unit-norm direction matrix W, its angle vector u and the size r."""

    W: np.ndarray
    u: np.ndarray
    r: float
    reflection_mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION
    K: int = field(default=0)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        u = np.asarray(self.u, dtype=np.float64)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "K", self.K if self.K else W.shape[1])
        if not self.r > 0:
            raise DegenerateSizeError(f"size must be positive, got {self.r}")
        if abs(np.linalg.norm(W) - 1.0) > 1e-12:
            raise DomainError("W must have unit Frobenius norm")
        m = shape_dims(W.shape[0] + 1, self.K)[3]
        if u.shape != (m,):
            raise DimensionError(f"angle vector has length {u.size}, expected m={m}")

    @property
    def N(self) -> int:
        return self.W.shape[0] + 1

    def coords(self) -> np.ndarray:
        return vech(self.W, self.N, self.K)


def helmert_submatrix(N: int) -> np.ndarray:
    """The (N-1) x N submatrix with orthonormal rows orthogonal to the ones
    vector, in the standard ascending ordering: row j has j entries
    1/sqrt(j(j+1)) followed by -j/sqrt(j(j+1))."""
    if N < 2:
        raise DimensionError(f"need at least two landmarks, got N={N}")
    L = np.zeros((N - 1, N))
    for j in range(1, N):
        c = 1.0 / math.sqrt(j * (j + 1))
        L[j - 1, :j] = c
        L[j - 1, j] = -j * c
    return L


def pd_sqrt(theta: np.ndarray) -> np.ndarray:
    """Symmetric positive-definite square root via the eigendecomposition."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {theta.shape}")
    scale = float(np.abs(theta).max()) if theta.size else 0.0
    if not np.allclose(theta, theta.T, rtol=0, atol=1e-10 * max(scale, 1.0)):
        raise DomainError("matrix is not symmetric")
    w, V = np.linalg.eigh(theta)
    if np.any(w <= 1e-12 * max(w.max(), 0.0)) or w.max() <= 0:
        raise DomainError(f"matrix is not positive definite (eigenvalues {w})")
    root = (V * np.sqrt(w)) @ V.T
    return (root + root.T) / 2.0


def whiten_and_center(config: LandmarkConfiguration, theta: np.ndarray | None = None) -> np.ndarray:
    """Y = L X Theta^{-1/2}: remove translation with the Helmert submatrix
    and whiten the column covariance."""
    X = config.data
    L = helmert_submatrix(config.N)
    Y = L @ X
    if theta is not None:
        Y = np.linalg.solve(pd_sqrt(theta).T, Y.T).T
    return Y


def qr_size_and_shape(Y: np.ndarray, mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION,
                      ) -> tuple[SizeAndShape, np.ndarray]:
    """Factor Y = T H with T lower triangular and H with orthonormal rows,
    under the sign conventions of the requested reflection mode.

    Raises DegenerateConfigurationError when Y is (numerically) rank
    deficient.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise DimensionError("Y must be 2-d")
    Nm1, K = Y.shape
    n = min(Nm1, K)
    Q, R = np.linalg.qr(Y.T)  # Y' = Q R, Q: K x n, R: n x (N-1)
    scale = np.linalg.norm(Y)
    pivots = np.abs(np.diag(R)[:n])
    if scale == 0 or np.any(pivots <= RANK_RTOL * scale):
        raise DegenerateConfigurationError(
            f"configuration is rank deficient (pivots {pivots}, scale {scale})")
    T = R.T.copy()       # (N-1) x n, lower triangular
    H = Q.T.copy()       # n x K, orthonormal rows

    strict, last = _positive_diagonal_indices(Nm1 + 1, K, mode)
    for i in strict + ([last] if last is not None else []):
        if T[i, i] < 0:
            T[:, i] = -T[:, i]
            H[i, :] = -H[i, :]
    if mode is ReflectionMode.EXCLUDES_REFLECTION and Nm1 >= K:
        # H must be a rotation; a stray reflection is absorbed by t_KK.
        if np.linalg.det(H) < 0:
            T[:, n - 1] = -T[:, n - 1]
            H[n - 1, :] = -H[n - 1, :]
    return SizeAndShape(T, mode, K=K), H


def landmark_shape(config: LandmarkConfiguration, theta: np.ndarray | None = None,
                   mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION,
                   ) -> "ShapeCoordinates":
    """Full pipeline: landmarks -> whitened Y -> triangular T -> angles."""
    tri, _ = qr_size_and_shape(whiten_and_center(config, theta), mode)
    return to_polar(tri)


def batch_shape_coords(Y: np.ndarray, mode: ReflectionMode = ReflectionMode.INCLUDES_REFLECTION,
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized triangular + polar reduction of a (b, N-1, K) stack.

    Returns (W, u, r) with shapes (b, N-1, n), (b, m) and (b,).  Matches the
    per-matrix path bit for bit up to floating-point associativity; rank
    deficiency anywhere in the batch raises.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 3:
        raise DimensionError("expected a (batch, N-1, K) stack")
    b, Nm1, K = Y.shape
    N = Nm1 + 1
    n = min(Nm1, K)
    Q, R = np.linalg.qr(np.transpose(Y, (0, 2, 1)))
    T = np.ascontiguousarray(np.transpose(R, (0, 2, 1)))
    H = np.ascontiguousarray(np.transpose(Q, (0, 2, 1)))
    scale = np.linalg.norm(Y, axis=(1, 2))
    diag = np.einsum("bii->bi", T[:, :n, :])
    if np.any(scale == 0) or np.any(np.abs(diag) <= RANK_RTOL * scale[:, None]):
        raise DegenerateConfigurationError("batch contains a rank-deficient configuration")

    strict, last = _positive_diagonal_indices(N, K, mode)
    for i in strict + ([last] if last is not None else []):
        flip = T[:, i, i] < 0
        T[flip, :, i] *= -1.0
        H[flip, i, :] *= -1.0
    if mode is ReflectionMode.EXCLUDES_REFLECTION and Nm1 >= K:
        flip = np.linalg.det(H) < 0
        T[flip, :, n - 1] *= -1.0
        H[flip, n - 1, :] *= -1.0

    rows, cols = _pattern_arrays(N, K)
    x = T[:, rows, cols]
    r = np.linalg.norm(x, axis=1)
    m = x.shape[1] - 1
    tail = np.sqrt(np.cumsum(x[:, ::-1] ** 2, axis=1))[:, ::-1]
    u = np.empty((b, m))
    if m >= 1:
        u[:, :m - 1] = np.arctan2(tail[:, 1:m], x[:, :m - 1])
        u[:, m - 1] = np.arctan2(x[:, m], x[:, m - 1])
    return T / r[:, None, None], u, r


def to_polar(tri: SizeAndShape) -> ShapeCoordinates:
    """Split T into size r and angles u under the pinned spherical convention

        x_i = r cos(u_i) prod_{j<i} sin(u_j),   x_{m+1} = r prod_{j<=m} sin(u_j)

    over the column-major triangular coordinates x."""
    x = tri.coords()
    r = float(np.linalg.norm(x))
    if r <= 0:
        raise DegenerateSizeError("zero size-and-shape matrix")
    m = x.size - 1
    u = np.zeros(m)
    # tail[i] = ||x[i+1:]||
    tail = np.sqrt(np.cumsum(x[::-1] ** 2))[::-1]
    for i in range(m - 1):
        u[i] = math.atan2(tail[i + 1], x[i])
    if m >= 1:
        u[m - 1] = math.atan2(x[m], x[m - 1])
    return ShapeCoordinates(W=tri.T / r, u=u, r=r, reflection_mode=tri.reflection_mode, K=tri.K)


def from_polar(shape: ShapeCoordinates) -> SizeAndShape:
    """Rebuild T = r W(u) from angles; inverse of ``to_polar``."""
    u = shape.u
    m = u.size
    x = np.empty(m + 1)
    sin_prod = 1.0
    for i in range(m):
        x[i] = shape.r * sin_prod * math.cos(u[i])
        sin_prod *= math.sin(u[i])
    x[m] = shape.r * sin_prod
    T = unvech(x, shape.N, shape.K)
    return SizeAndShape(T, shape.reflection_mode, K=shape.K)


def polar_jacobian(u: np.ndarray) -> float:
    """The size-free angle factor prod_{i=1}^{m} sin^{m-i}(u_i) of the polar
    volume element; strictly positive on the interior of the angle domain."""
    u = np.asarray(u, dtype=np.float64)
    m = u.size
    if m == 0:
        return 1.0
    if np.any(u[:-1] <= 0) or np.any(u[:-1] >= math.pi):
        raise DomainError("angles before the last must lie in (0, pi)")
    if u[-1] <= -math.pi or u[-1] > math.pi:
        raise DomainError("last angle must lie in (-pi, pi]")
    exponents = m - 1 - np.arange(m)
    return float(np.prod(np.sin(u) ** exponents))


def log_polar_jacobian(u: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    m = u.size
    if m <= 1:
        return 0.0
    exponents = m - 1 - np.arange(m - 1)
    return float(np.sum(exponents * np.log(np.sin(u[:-1]))))


def angle_domains(N: int, K: int, mode: ReflectionMode) -> list[tuple[float, float]]:
    """Open angle boxes on which the shape density lives.

    Positivity constraints on triangular coordinates cut the generic domains
    (0, pi) x ... x (-pi, pi] down: a cos-controlled constrained coordinate
    halves its own angle, and a constraint on the final coordinate restricts
    the last angle's sine to be positive.
    """
    n, _, n_coords, m = shape_dims(N, K)
    pat = triangular_pattern(N, K)
    strict, last = _positive_diagonal_indices(N, K, mode)
    constrained = {pat.index((i, i)) for i in strict}
    if last is not None:
        constrained.add(pat.index((last, last)))
    domains: list[tuple[float, float]] = []
    for q in range(m):
        if q < m - 1:
            domains.append((0.0, math.pi / 2 if q in constrained else math.pi))
        else:
            lo, hi = -math.pi, math.pi
            if q in constrained:          # cos(u_m) > 0
                lo, hi = -math.pi / 2, math.pi / 2
            if (m) in constrained:        # sin(u_m) > 0 keeps x_{m+1} positive
                lo = max(lo, 0.0)
                hi = min(hi, math.pi)
            domains.append((lo, hi))
    return domains
