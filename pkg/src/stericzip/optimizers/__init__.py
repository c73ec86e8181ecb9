"""Optimizers behind a common ObjectiveHandle contract."""

from .base import (
    ObjectiveHandle,
    OptimizationResult,
    OptimizerConfig,
    SAConfig,
    SAECConfig,
    TracePoint,
    finite_diff_gradient,
    gradient_relative_error,
    grad_stats,
    parse_config,
    parse_config_items,
    trace_csv,
)
from .hybrid import sdcg_sa_sdcg
from .local import conjugate_gradient, lbfgs, sd_then_cg, steepest_descent, two_loop_direction
from .stochastic import default_box, saec, simulated_annealing

__all__ = [
    "ObjectiveHandle",
    "OptimizationResult",
    "OptimizerConfig",
    "SAConfig",
    "SAECConfig",
    "TracePoint",
    "finite_diff_gradient",
    "gradient_relative_error",
    "grad_stats",
    "parse_config",
    "parse_config_items",
    "trace_csv",
    "steepest_descent",
    "conjugate_gradient",
    "lbfgs",
    "sd_then_cg",
    "two_loop_direction",
    "simulated_annealing",
    "saec",
    "sdcg_sa_sdcg",
    "default_box",
    "OPTIMIZERS",
    "run_optimizer",
]

OPTIMIZERS = ("sd", "cg", "lbfgs", "sa", "sdcg-sa-sdcg", "saec")


def run_optimizer(name: str, obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None, bounds=None) -> OptimizationResult:
    """Dispatch by name. ``bounds`` is used by SA-based methods only."""
    cfg = cfg or OptimizerConfig()
    if name == "sd":
        return steepest_descent(obj, x0, cfg)
    if name == "cg":
        return conjugate_gradient(obj, x0, cfg)
    if name == "lbfgs":
        return lbfgs(obj, x0, cfg)
    if name == "sa":
        return simulated_annealing(obj, x0, cfg, bounds=bounds)
    if name == "sdcg-sa-sdcg":
        return sdcg_sa_sdcg(obj, x0, cfg, bounds=bounds)
    if name == "saec":
        return saec(obj, cfg, bounds=bounds, x0=x0)
    raise ValueError(f"unknown optimizer {name!r}; choose from {', '.join(OPTIMIZERS)}")
