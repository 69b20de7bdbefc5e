"""Subordinated Wright-Fisher priors: exact simulation and computable filtering.

A Wright-Fisher diffusion run on a random clock (a Levy subordinator, the
inverse of one, or a composition) keeps a Dirichlet stationary law while
gaining jumps or long memory.  This package provides the clock families,
the dual-process series weights and their exact sampler, transition and
path simulation, and conjugate filtering/smoothing on finite Dirichlet
mixtures, plus clock-posterior inference for the non-Markovian case.
"""

__version__ = "0.1.0"

from .clocks import (
    ClockKind,
    ClockSpec,
    Family,
    SubordinatorFamily,
    clock_laplace,
    composed_clock,
    double_laplace,
    drift_family,
    gamma_family,
    identity_clock,
    identity_family,
    inverse_clock,
    inverse_gaussian_family,
    laplace_exponent,
    poisson_family,
    sample_clock_path,
    sample_inverse_clock,
    sample_subordinator_increment,
    sample_subordinator_increments,
    stable_family,
    subordinator_clock,
    tempered_stable_family,
)
from .dual import (
    AdmissibleStableLike,
    AdmissibleWithDrift,
    DualWeightQuery,
    NotAdmissible,
    check_admissible,
    dual_jump_rates,
    dual_path_sample,
    dual_transition_pmf,
    hypergeom_pmf,
    hypergeom_sample,
    qtilde_sample,
    qtilde_weight,
)
from .errors import (
    ConfigError,
    InadmissibleClockError,
    NonConvergenceError,
    NumericalError,
    RejectionExhaustedError,
    SubwfError,
    ToleranceError,
)
from .filtering import (
    ClockPosteriorSample,
    FilterStep,
    FilterTrace,
    ObservationRecord,
    clock_posterior_sample,
    filter_markov,
    log_marginal_likelihood,
    nonmarkov_filter,
    predict,
    predictive_log_mass,
    smooth,
    update,
)
from .mixtures import DirichletMixture
from .sampler import (
    FixedPoint,
    MixtureStart,
    Mode,
    Stationary,
    SwfModel,
    sampling_status,
    swf_path_sample,
    swf_transition_batch,
    swf_transition_sample,
)
from .special import (
    SignedLog,
    coeff_a,
    coeff_a_cond,
    falling_factorial,
    log_rising_factorial,
    mittag_leffler_neg,
)
from .wf import (
    Theta,
    dirichlet_log_density,
    dirichlet_sample,
    duality_g,
    lambda_n,
    multinomial_log_pmf,
    multinomial_sample,
    wf_transition_sample,
)
