import numpy as np
import pytest

from qrshape.generators import GeneratorSpec
from qrshape.geometry import (ReflectionMode, ShapeCoordinates, batch_shape_coords,
                              helmert_submatrix, qr_size_and_shape, to_polar)
from qrshape.inference import Sample
from qrshape.simulate import sample_matrix_elliptical


def random_shape(N, K, rng, mode=ReflectionMode.INCLUDES_REFLECTION):
    Y = rng.standard_normal((N - 1, K))
    tri, _ = qr_size_and_shape(Y, mode)
    return to_polar(tri)


def gaussian_landmark_sample(mu_x, sigma2, count, seed,
                             mode=ReflectionMode.INCLUDES_REFLECTION) -> Sample:
    """Shapes of landmark configurations drawn around mu_x with isotropic
    Gaussian noise, reduced through the full pipeline."""
    N, K = mu_x.shape
    X = sample_matrix_elliptical(mu_x, sigma2, GeneratorSpec.gaussian(N * K),
                                 count=count, seed=seed)
    L = helmert_submatrix(N)
    Y = np.einsum("ij,bjk->bik", L, X)
    W, u, r = batch_shape_coords(Y, mode)
    return Sample([ShapeCoordinates(W=W[i], u=u[i], r=float(r[i]),
                                    reflection_mode=mode, K=K)
                   for i in range(count)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def square_mean(N, K, scale=4.0):
    """A deterministic non-degenerate N x K mean configuration (centered)."""
    rng = np.random.default_rng(12345)
    mu = rng.standard_normal((N, K)) * scale
    return mu - mu.mean(axis=0)
