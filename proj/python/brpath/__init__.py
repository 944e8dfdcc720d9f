"""Monte Carlo checks of path-space curvature inequalities."""

from ._brpath import (
    InvalidArgument,
    VerdictReport,
    check_r2,
    check_r3,
    cone_distance,
    cone_holonomy,
    exact_kappa,
    experiment_ids,
    run_experiment,
    validate_config,
)

__all__ = [
    "InvalidArgument",
    "VerdictReport",
    "check_r2",
    "check_r3",
    "cone_distance",
    "cone_holonomy",
    "exact_kappa",
    "experiment_ids",
    "run_experiment",
    "validate_config",
]
