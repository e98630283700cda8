"""Probabilistic shared control for assistive navigation through crowds."""

__version__ = "0.1.0"

from .arbitration import (
    ArbitrationReport,
    BlendGains,
    SharedControl,
    ctb,
    default_gains,
    linear_blend,
    ltb,
    ltbo,
    psc_map,
)
from .gaussians import (
    GaussianDensity,
    GaussianMixture,
    LogNormalizer,
    laplace_approximation,
    mixture_argmax,
    mixture_times_gaussian,
    precision_combine,
    product_of_gaussians,
)
from .interaction import (
    InteractionParams,
    JointModels,
    agreeability_log,
    crowd_avoidance_log,
    joint_log_density,
)
from .prediction import (
    GPPrior,
    OperatorStatistic,
    TrajectoryBelief,
    fit_mixture,
    goal_conditioned_posterior,
    gp_posterior,
    sample_trajectories,
)
from .trajectory import ObservationLog, Trajectory

__all__ = [
    "ArbitrationReport",
    "BlendGains",
    "GaussianDensity",
    "GaussianMixture",
    "GPPrior",
    "InteractionParams",
    "JointModels",
    "LogNormalizer",
    "ObservationLog",
    "OperatorStatistic",
    "SharedControl",
    "Trajectory",
    "TrajectoryBelief",
    "agreeability_log",
    "crowd_avoidance_log",
    "ctb",
    "default_gains",
    "fit_mixture",
    "goal_conditioned_posterior",
    "gp_posterior",
    "joint_log_density",
    "laplace_approximation",
    "linear_blend",
    "ltb",
    "ltbo",
    "mixture_argmax",
    "mixture_times_gaussian",
    "precision_combine",
    "product_of_gaussians",
    "psc_map",
    "sample_trajectories",
]
