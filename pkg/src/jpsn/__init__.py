"""Joint projected-normal / skew-normal modelling of poly-cylindrical data.

The package couples a projected-normal block for p circular variables with a
(diagonal-skew) skew-normal block for q linear variables through one joint
Gaussian covariance, and provides exact simulation, augmented-density
evaluation, a pure-Gibbs Bayesian sampler with identification
post-processing, dependence summaries, and CRPS-based predictive comparison
against cylindrical baselines.
"""

__version__ = "0.1.0"

from .core import (
    PolyCylDataset,
    PolyCylObservation,
    TrackFeatures,
    angular_distance,
    atan_star,
    derive_track_features,
    polar_embed,
    wrap_angle,
)
from .dists import (
    AbeLeyParams,
    MvnParams,
    NiwParams,
    abeley_log_density,
    mvn_cdf_mc,
    pn1_log_density,
    sample_mvn,
    sample_niw,
    sample_trunc_normal_lower,
    ssn_log_density,
    std_normal_cdf,
)
from .errors import (
    DegenerateStepWarning,
    DomainError,
    InitializationError,
    InsufficientDataError,
    JpsnError,
    NumericalError,
    ParseError,
)
from .model import (
    CMatrix,
    JpsnParams,
    LatentState,
    circ_circ_corr,
    circ_lin_r2,
    conditional_circular_params,
    conditional_linear_params,
    dependence_matrix,
    identify,
    identify_params,
    jpsn_aug_log_density,
    simulate_jpsn,
    ssn_moments,
    transform_pn_params,
)
from .mcmc import (
    ChainConfig,
    GibbsState,
    PosteriorDraws,
    PriorSpec,
    ess,
    run_gibbs,
)
from .baselines import (
    AbeLeyDraws,
    AbeLeyPrior,
    MhConfig,
    fit_abeley_mh,
    fit_cylindrical_jpsn,
    simulate_abeley,
)
from .scoring import (
    compare_models,
    crps_circular,
    crps_linear,
    holdout_split,
)
