"""Covariance tapering for multivariate Gaussian random fields."""

from .covmodel import (
    ModelConfig,
    MultiMaternParams,
    ParamBox,
    SizeError,
    check_validity,
    matern_cov,
    pack,
    preset_model,
    unpack,
)
from .geometry import (
    GridDesign,
    LocationSet,
    ParameterError,
    min_pairwise_distance,
    neighbors_within,
    sample_perturbed_grid,
)
from .taper import TaperSpec, make_taper, support_radius, taper_value, validate_condition4

__version__ = "0.1.0"
