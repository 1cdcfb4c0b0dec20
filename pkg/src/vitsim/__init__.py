"""Thompson sampling from variationally approximated posteriors, with
exact-posterior and Langevin baselines, synthetic bandit environments, and a
reproducible simulation harness."""

__version__ = "0.1.0"

from .engine import (  # noqa: F401
    GaussianVariationalState,
    Mode,
    Schedule,
    compute_schedule,
    init_state,
    sample_state,
    update_posterior,
)
from .envs import (  # noqa: F401
    ArmSet,
    Environment,
    build_synthetic_arms,
    instantaneous_regret,
    pull,
    random_environment,
    select_arm,
)
from .errors import DivergenceError, NumericsError, ValidationError  # noqa: F401
from .params import HyperParams, compute_eta  # noqa: F401
from .potentials import LinearPotential, LogisticPotential, Potential  # noqa: F401
from .stats import ExactPosterior, SufficientStats, exact_posterior, sherman_morrison_update  # noqa: F401
