"""Volumes, thresholds and Monte Carlo intersection volumes of l_p and Schatten balls."""

from .balls import (
    LogVolume,
    LpBallSpec,
    SchattenBallSpec,
    critical_offset_R,
    delta,
    gumbel_constants,
    log_volume,
    schatten_dimension,
    threshold_lp_inf,
    threshold_schatten,
)
from .errors import (
    BlowUpError,
    ConvergenceError,
    CritballsError,
    DomainError,
    IntegrandNaNError,
    MonotonicityError,
    UnsupportedPairError,
)
from .sampling import EigSample, LpSample, RandomStream
from .tracywidom import TWTable, tw_cdf, tw_cdf_table

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "LogVolume",
    "LpBallSpec",
    "SchattenBallSpec",
    "critical_offset_R",
    "delta",
    "gumbel_constants",
    "log_volume",
    "schatten_dimension",
    "threshold_lp_inf",
    "threshold_schatten",
    "BlowUpError",
    "ConvergenceError",
    "CritballsError",
    "DomainError",
    "IntegrandNaNError",
    "MonotonicityError",
    "UnsupportedPairError",
    "EigSample",
    "LpSample",
    "RandomStream",
    "TWTable",
    "tw_cdf",
    "tw_cdf_table",
]
