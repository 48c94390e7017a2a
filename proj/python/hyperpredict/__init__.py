"""Learned prediction of registration quality across regularization hyperparameters."""

from ._hyperpredict import (
    ConfigError,
    InfeasibleSelection,
    NumericalError,
    Predictor,
    count_folded,
    dice,
    dice_all,
    generate_pair,
    jacobian_determinant,
    make_grid,
    register_pair,
    run,
    select_optimal,
    warp,
)

__all__ = [
    "ConfigError",
    "InfeasibleSelection",
    "NumericalError",
    "Predictor",
    "count_folded",
    "dice",
    "dice_all",
    "generate_pair",
    "jacobian_determinant",
    "make_grid",
    "register_pair",
    "run",
    "select_optimal",
    "warp",
]
