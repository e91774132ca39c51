"""Samplers for matrix elliptical distributions and uniform Stiefel frames,
plus the Monte Carlo oracles used to validate the series identities and the
density formulas.

Sampling uses the stochastic representation

    X = mean + r * row_cov^{1/2} U col_cov^{1/2}

with U uniform on the unit sphere of the flattened matrix space and r^2
following the radial law of the generator (a gamma distribution for the
Kotz family).  Streams are seeded and reproducible; parallel replication
should partition seeds rather than share a generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .densities import ModelSpec, shape_logdensity_batch
from .errors import DimensionError, DomainError
from .generators import GeneratorSpec
from .geometry import (LandmarkConfiguration, ReflectionMode, ShapeCoordinates,
                       angle_domains, batch_shape_coords, from_polar, pd_sqrt,
                       shape_dims)
from .zonal import SeriesControl, gen_pochhammer, partitions_of, zonal_polynomial
from .zonal._series import log_multivariate_gamma


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float

    def z_against(self, reference: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.value == reference else math.inf
        return (self.value - reference) / self.stderr


def radial_squared_law(generator: GeneratorSpec, dim: int, count: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Draws of r^2 with density proportional to y^(dim/2 - 1) h(y): for the
    Kotz family a gamma law with shape tau - 1 + dim/2 and rate R."""
    shape = generator.tau - 1.0 + dim / 2.0
    return rng.gamma(shape, scale=1.0 / generator.rate, size=count)


def sample_matrix_elliptical(mean: np.ndarray, row_cov, generator: GeneratorSpec,
                             col_cov=None, count: int = 1, seed: int = 0) -> np.ndarray:
    """(count, rows, cols) draws from the matrix elliptical law on matrices
    the size of ``mean``.  ``row_cov`` is a matrix or a scalar variance;
    ``col_cov`` defaults to the identity.  Only (tau, rate) of the generator
    matter here; the radial dimension is rows * cols of ``mean``."""
    mean = np.asarray(mean, dtype=np.float64)
    if mean.ndim != 2:
        raise DimensionError("mean must be 2-d")
    rows, cols = mean.shape
    dim = rows * cols
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, dim))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    r = np.sqrt(radial_squared_law(generator, dim, count, rng))
    U = (r[:, None] * u).reshape(count, rows, cols)
    if np.isscalar(row_cov) or np.ndim(row_cov) == 0:
        if not float(row_cov) > 0:
            raise DomainError("scalar row covariance must be positive")
        U = math.sqrt(float(row_cov)) * U
    else:
        U = np.einsum("ij,bjk->bik", pd_sqrt(np.asarray(row_cov, dtype=np.float64)), U)
    if col_cov is not None:
        U = np.einsum("bij,jk->bik", U, pd_sqrt(np.asarray(col_cov, dtype=np.float64)))
    return mean[None, :, :] + U


def sample_elliptical(mean, row_cov, theta, generator: GeneratorSpec,
                      count: int, seed: int = 0) -> list[LandmarkConfiguration]:
    """i.i.d. landmark configurations from the elliptical model on the raw
    N x K matrices."""
    draws = sample_matrix_elliptical(np.asarray(mean, dtype=np.float64), row_cov,
                                     generator, col_cov=theta, count=count, seed=seed)
    return [LandmarkConfiguration(d) for d in draws]


def sample_stiefel_uniform(s: int, m: int, count: int, seed: int = 0) -> np.ndarray:
    """(count, s, m) row-orthonormal frames, invariant under right rotation.

    Built by orthonormalizing a Gaussian matrix with the triangular factor's
    diagonal pinned positive, which makes the factorization unique."""
    if s > m:
        raise DimensionError(f"need s <= m for row-orthonormal frames, got s={s} > m={m}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((count, m, s))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.einsum("bii->bi", R))
    signs[signs == 0] = 1.0
    return np.transpose(Q * signs[:, None, :], (0, 2, 1))


def stiefel_volume(s: int, m: int) -> float:
    """Total mass 2^s pi^(s m / 2) / Gamma_s(m/2) of the unnormalized frame
    measure on s x m row-orthonormal matrices."""
    return math.exp(s * math.log(2.0) + (s * m / 2.0) * math.log(math.pi)
                    - log_multivariate_gamma(s, m / 2.0))


def stiefel_moment_closed_form(A: np.ndarray, t: int, m: int) -> float:
    """Closed form of the unnormalized moment integral of (tr A H)^(2t) over
    s x m frames: Vol * (1/2)_t * sum_kappa C_kappa(A A') / (m/2)_kappa."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != m:
        raise DimensionError(f"A must be m x s with m={m}, got {A.shape}")
    s = A.shape[1]
    eigs = np.linalg.eigvalsh(A @ A.T)
    half_t = math.exp(gammaln(0.5 + t) - gammaln(0.5))
    total = sum(zonal_polynomial(kappa, eigs) / gen_pochhammer(m / 2.0, kappa)
                for kappa in partitions_of(t))
    return stiefel_volume(s, m) * half_t * total


def mc_stiefel_moment(A: np.ndarray, t: int, m: int, count: int, seed: int = 0,
                      power: int | None = None) -> MCEstimate:
    """Monte Carlo estimate of Vol * E[(tr A H)^power] with H uniform on the
    s x m frames; ``power`` defaults to 2t.  Odd powers integrate to zero."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != m:
        raise DimensionError(f"A must be m x s with m={m}, got {A.shape}")
    s = A.shape[1]
    if power is None:
        power = 2 * t
    H = sample_stiefel_uniform(s, m, count, seed)
    traces = np.einsum("ij,bji->b", A, H)
    vals = traces ** power
    vol = stiefel_volume(s, m)
    value = vol * float(vals.mean())
    stderr = vol * float(vals.std(ddof=1)) / math.sqrt(count)
    return MCEstimate(value, stderr)


# ---------------------------------------------------------------------------
# density validation against simulated shapes
# ---------------------------------------------------------------------------

def sample_shapes_from_model(spec: ModelSpec, count: int, seed: int = 0,
                             ) -> list[ShapeCoordinates]:
    """Shapes of draws from the translation-reduced model the densities
    describe: (N-1) x K matrices around mean Theta^{-1/2}-adjusted, with row
    covariance Sigma and the model's own radial law."""
    mean_y = spec.mean if spec.theta is None else np.linalg.solve(
        pd_sqrt(spec.theta).T, spec.mean.T).T
    draws = sample_matrix_elliptical(mean_y, spec.sigma, spec.generator,
                                     col_cov=None, count=count, seed=seed)
    W, u, r = batch_shape_coords(draws, spec.reflection_mode)
    return [ShapeCoordinates(W=W[i], u=u[i], r=float(r[i]),
                             reflection_mode=spec.reflection_mode, K=spec.K)
            for i in range(count)]


@dataclass
class DensityCheckReport:
    edges: list[np.ndarray]
    counts: np.ndarray
    empirical: np.ndarray
    analytic: np.ndarray
    z_scores: np.ndarray
    n_samples: int

    @property
    def max_abs_z(self) -> float:
        return float(np.nanmax(np.abs(self.z_scores)))


def _cell_probabilities(spec: ModelSpec, edges: list[np.ndarray], nodes: int,
                        ctrl: SeriesControl) -> np.ndarray:
    """Tensor Gauss-Legendre integral of the shape density over each cell."""
    x01, w01 = np.polynomial.legendre.leggauss(nodes)
    x01 = (x01 + 1.0) / 2.0
    w01 = w01 / 2.0
    grids = []
    weights = []
    for e in edges:
        widths = np.diff(e)
        pts = e[:-1, None] + widths[:, None] * x01[None, :]
        grids.append(pts.ravel())
        weights.append(np.repeat(widths, nodes) * np.tile(w01, len(widths)))
    mesh = np.meshgrid(*grids, indexing="ij")
    wmesh = np.meshgrid(*weights, indexing="ij")
    u_flat = np.stack([g.ravel() for g in mesh], axis=1)
    w_flat = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
    shapes = []
    for u in u_flat:
        tri = from_polar(ShapeCoordinates(
            W=_unit_ref(spec), u=u, r=1.0, reflection_mode=spec.reflection_mode, K=spec.K))
        shapes.append(ShapeCoordinates(W=tri.T, u=u, r=1.0,
                                       reflection_mode=spec.reflection_mode, K=spec.K))
    dens = np.exp(shape_logdensity_batch(spec, shapes, ctrl))
    cells = tuple(len(e) - 1 for e in edges)
    per_node = (dens * w_flat).reshape(tuple(c * nodes for c in cells))
    for axis, c in enumerate(cells):
        per_node = per_node.reshape(per_node.shape[:axis] + (c, nodes) + per_node.shape[axis + 1:]).sum(axis=axis + 1)
    return per_node


def _unit_ref(spec: ModelSpec) -> np.ndarray:
    # any valid unit-norm W: only used to satisfy the container's invariant
    W = np.zeros((spec.N - 1, spec.n))
    W[0, 0] = 1.0
    return W


def mc_density_check(spec: ModelSpec, cells_per_angle: int = 10, count: int = 100_000,
                     seed: int = 0, quad_nodes: int = 6,
                     ctrl: SeriesControl | None = None) -> DensityCheckReport:
    """Simulate shapes from the model, bin their angles on a tensor grid and
    compare cell frequencies with the integrated analytic density.

    Feasible for small angle counts (the grid is full-dimensional); the
    number of angles m is capped at 3.
    """
    ctrl = ctrl or SeriesControl()
    m = shape_dims(spec.N, spec.K)[3]
    if m > 3:
        raise DimensionError(
            f"cell comparison needs a full m-dimensional grid; m={m} is too large "
            "(use the two-sample invariance checks for bigger configurations)")
    domains = angle_domains(spec.N, spec.K, spec.reflection_mode)
    edges = [np.linspace(lo, hi, cells_per_angle + 1) for lo, hi in domains]
    shapes = sample_shapes_from_model(spec, count, seed)
    angles = np.stack([s.u for s in shapes])
    counts, _ = np.histogramdd(angles, bins=edges)
    analytic = _cell_probabilities(spec, edges, quad_nodes, ctrl)
    empirical = counts / count
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (counts - count * analytic) / np.sqrt(count * analytic * (1.0 - analytic))
    return DensityCheckReport(edges=edges, counts=counts, empirical=empirical,
                              analytic=analytic, z_scores=z, n_samples=count)
