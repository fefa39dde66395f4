"""Solvers for the forward-backward degenerate parabolic problem."""

from ._fbflow import (
    ConfigError,
    NumericalError,
    eval_expression,
    g0,
    run_config,
    solve_shear,
)

__all__ = ["ConfigError", "NumericalError", "eval_expression", "g0", "run_config", "solve_shear"]
