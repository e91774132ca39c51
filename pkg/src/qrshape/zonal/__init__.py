"""Zonal polynomials and weighted matrix-argument series.

Public surface: partition enumeration, generalized Pochhammer symbols, the
multivariate gamma function, per-partition zonal polynomial evaluation and a
tolerance-controlled weighted series evaluator.  A compiled kernel is used
when available; set ``QRSHAPE_PURE_PYTHON=1`` to force the NumPy fallback.
"""

from ._partitions import Partition, partitions_of
from ._series import (SeriesControl, SeriesDiagnostics, gen_pochhammer,
                      log_multivariate_gamma, log_series_batch,
                      multivariate_gamma, weighted_zonal_series,
                      zonal_polynomial)
from ._tables import BACKEND_NAME, clear_caches

__all__ = [
    "Partition",
    "partitions_of",
    "gen_pochhammer",
    "multivariate_gamma",
    "log_multivariate_gamma",
    "zonal_polynomial",
    "weighted_zonal_series",
    "log_series_batch",
    "SeriesControl",
    "SeriesDiagnostics",
    "BACKEND_NAME",
    "clear_caches",
]
