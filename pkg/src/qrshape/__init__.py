"""Shape analysis of landmark data under matrix elliptical models.

Landmark configurations are reduced to triangular (QR) size-and-shape and
polar shape coordinates; exact noncentral densities are evaluated as
truncated series of zonal polynomials; and isotropic models are fitted by
maximum likelihood with model selection and mean-shape testing on top.
"""

__version__ = "0.1.0"

from .densities import (ModelSpec, ReflectionAdjustment, gaussian_model,
                        gaussian_shape_logdensity, kotz_model,
                        kotz_shape_logdensity, reflection_variant_factor,
                        shape_logdensity, shape_logdensity_batch,
                        size_and_shape_logdensity)
from .generators import (GeneratorSpec, central_radial_constant,
                         generator_derivative, generator_value,
                         radial_integral)
from .geometry import (LandmarkConfiguration, ReflectionMode, ShapeCoordinates,
                       SizeAndShape, angle_domains, from_polar,
                       helmert_submatrix, landmark_shape, pd_sqrt,
                       polar_jacobian, qr_size_and_shape, shape_dims, to_polar,
                       whiten_and_center)
from .inference import (EvidenceGrade, FitOptions, FitResult, LRTestResult,
                        Sample, bic_star, evidence_grade, fit_mle,
                        log_likelihood, lr_test_equal_mean_shape)
from .simulate import (MCEstimate, mc_density_check, mc_stiefel_moment,
                       sample_elliptical, sample_shapes_from_model,
                       sample_stiefel_uniform, stiefel_moment_closed_form,
                       stiefel_volume)
from .zonal import (BACKEND_NAME, Partition, SeriesControl, SeriesDiagnostics,
                    gen_pochhammer, multivariate_gamma, partitions_of,
                    weighted_zonal_series, zonal_polynomial)

ZONAL_BACKEND = BACKEND_NAME

__all__ = [
    "__version__",
    "ZONAL_BACKEND",
    # geometry
    "LandmarkConfiguration", "SizeAndShape", "ShapeCoordinates", "ReflectionMode",
    "helmert_submatrix", "pd_sqrt", "whiten_and_center", "qr_size_and_shape",
    "to_polar", "from_polar", "polar_jacobian", "angle_domains", "shape_dims",
    "landmark_shape",
    # zonal
    "Partition", "partitions_of", "gen_pochhammer", "multivariate_gamma",
    "zonal_polynomial", "weighted_zonal_series", "SeriesControl",
    "SeriesDiagnostics",
    # generators
    "GeneratorSpec", "generator_value", "generator_derivative",
    "radial_integral", "central_radial_constant",
    # densities
    "ModelSpec", "gaussian_model", "kotz_model", "shape_logdensity",
    "shape_logdensity_batch", "gaussian_shape_logdensity",
    "kotz_shape_logdensity", "size_and_shape_logdensity",
    "reflection_variant_factor", "ReflectionAdjustment",
    # inference
    "Sample", "FitOptions", "FitResult", "fit_mle", "log_likelihood",
    "bic_star", "evidence_grade", "EvidenceGrade", "lr_test_equal_mean_shape",
    "LRTestResult",
    # simulation
    "sample_elliptical", "sample_stiefel_uniform", "sample_shapes_from_model",
    "mc_stiefel_moment", "stiefel_moment_closed_form", "stiefel_volume",
    "mc_density_check", "MCEstimate",
]
