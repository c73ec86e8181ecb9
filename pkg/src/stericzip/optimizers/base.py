"""Objective contract, configuration and result types shared by all optimizers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from ..errors import DivergenceError, DomainError, ParseError


@dataclass(frozen=True)
class ObjectiveHandle:
    """An n-dimensional objective.

    ``evaluator(x)`` returns ``(value, gradient)``; gradient-free objectives
    return ``(value, None)``. Evaluators must be deterministic and hold no
    hidden mutable state. ``value_fn`` is an optional cheaper value-only path
    used by the gradient-free methods.
    """

    evaluator: Callable[[np.ndarray], tuple]
    dimension: int
    has_gradient: bool = True
    name: str = ""
    value_fn: Callable[[np.ndarray], float] | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"{self.name or 'objective'}: expected {self.dimension} variables, got {x.shape}")
        out = self.evaluator(x)
        if isinstance(out, tuple):
            f, g = out
        else:
            f, g = out, None
        if g is not None:
            g = np.asarray(g, dtype=float)
        return float(f), g

    def value(self, x) -> float:
        if self.value_fn is not None:
            return float(self.value_fn(np.asarray(x, dtype=float)))
        return self(x)[0]


@dataclass(frozen=True)
class SAConfig:
    t_initial: float = 10.0
    cooling_factor: float = 0.95
    steps_per_temperature: int = 50
    step_scale: float = 1.0
    t_final: float = 1e-4


@dataclass(frozen=True)
class SAECConfig:
    population_size: int = 20
    parent_fraction: float = 0.5
    mutation_scale: float = 0.1
    generations: int = 150
    local_steps: int = 10
    local_levels: int = 3


@dataclass(frozen=True)
class OptimizerConfig:
    grad_rms_tol: float = 1e-9
    gmax_tol: float = 1e-9
    max_iters: int = 5000
    sa: SAConfig = field(default_factory=SAConfig)
    saec: SAECConfig = field(default_factory=SAECConfig)
    lbfgs_memory: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.grad_rms_tol > 0 and self.gmax_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not 0 < self.sa.cooling_factor < 1:
            raise ValueError("sa.cooling_factor must lie in (0, 1)")
        if not (self.sa.t_initial > 0 and self.sa.t_final > 0 and self.sa.step_scale > 0):
            raise ValueError("sa temperatures and step_scale must be positive")
        if self.sa.steps_per_temperature < 1:
            raise ValueError("sa.steps_per_temperature must be >= 1")
        if self.saec.population_size < 2:
            raise ValueError("saec.population_size must be >= 2")
        if not 0 < self.saec.parent_fraction <= 1:
            raise ValueError("saec.parent_fraction must lie in (0, 1]")
        if not self.saec.mutation_scale > 0:
            raise ValueError("saec.mutation_scale must be positive")
        if self.lbfgs_memory < 0:
            raise ValueError("lbfgs_memory must be >= 0")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    def updated(self, **changes) -> "OptimizerConfig":
        """Copy with dotted-key overrides, e.g. ``updated(**{"sa.t_initial": 5})``."""
        top, sa, saec = {}, {}, {}
        for key, value in changes.items():
            if key.startswith("sa."):
                sa[key[3:]] = value
            elif key.startswith("saec."):
                saec[key[5:]] = value
            else:
                top[key] = value
        if sa:
            top["sa"] = replace(self.sa, **sa)
        if saec:
            top["saec"] = replace(self.saec, **saec)
        return replace(self, **top)


def _config_types():
    types = {}
    for f in fields(OptimizerConfig):
        if f.name == "sa":
            types.update({f"sa.{g.name}": g.type for g in fields(SAConfig)})
        elif f.name == "saec":
            types.update({f"saec.{g.name}": g.type for g in fields(SAECConfig)})
        else:
            types[f.name] = f.type
    return types


def parse_config_items(text: str) -> dict:
    """Dotted-key overrides from a flat ``key = value`` file (``#`` comments)."""
    types = _config_types()
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in types:
            raise ParseError(f"config line {lineno}: unknown key {key!r}")
        try:
            changes[key] = int(value) if types[key] in (int, "int") else float(value)
        except ValueError:
            raise ParseError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return changes


def parse_config(text: str, base: OptimizerConfig | None = None) -> OptimizerConfig:
    """Apply a config file's overrides to ``base`` (default settings if omitted)."""
    changes = parse_config_items(text)
    try:
        return (base or OptimizerConfig()).updated(**changes)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid config: {exc}") from None


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    f: float
    grad_rms: float  # nan for gradient-free steps


@dataclass
class OptimizationResult:
    x_best: np.ndarray
    f_best: float
    iterations: int
    function_evals: int
    gradient_evals: int
    converged: bool
    reason: str
    trace: list = field(default_factory=list)
    method: str = ""
    stages: list = field(default_factory=list)

    def trace_csv(self) -> str:
        return trace_csv(self.trace)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "f_best": self.f_best,
            "x_best": [float(v) for v in self.x_best],
            "iterations": self.iterations,
            "function_evals": self.function_evals,
            "gradient_evals": self.gradient_evals,
            "converged": self.converged,
            "reason": self.reason,
        }


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "f", "grad_rms"])
    for p in trace:
        w.writerow([p.iteration, repr(float(p.f)), repr(float(p.grad_rms))])
    return buf.getvalue()


def grad_stats(g: np.ndarray) -> tuple[float, float]:
    """(RMS, max-abs) of a gradient vector."""
    if g.size == 0:
        return 0.0, 0.0
    return float(np.linalg.norm(g) / math.sqrt(g.size)), float(np.max(np.abs(g)))


class Counted:
    """Per-run evaluation counter around an ObjectiveHandle."""

    def __init__(self, obj: ObjectiveHandle):
        self.obj = obj
        self.fevals = 0
        self.gevals = 0

    @property
    def n(self):
        return self.obj.dimension

    def value_grad(self, x):
        self.fevals += 1
        self.gevals += 1
        with np.errstate(all="ignore"):
            f, g = self.obj(x)
        if g is None:
            raise ValueError(f"{self.obj.name or 'objective'} provides no gradient")
        return f, g

    def value(self, x):
        self.fevals += 1
        with np.errstate(all="ignore"):
            return self.obj.value(x)

    def safe_value_grad(self, x):
        """Like value_grad but maps domain errors to (nan, None)."""
        try:
            return self.value_grad(x)
        except (DomainError, FloatingPointError, OverflowError):
            return math.nan, None

    def safe_value(self, x):
        try:
            return self.value(x)
        except (DomainError, FloatingPointError, OverflowError):
            return math.nan


def finite(f, g=None) -> bool:
    if not math.isfinite(f):
        return False
    return g is None or bool(np.all(np.isfinite(g)))


def finalize(counter: Counted, x, *, iterations, converged, reason, trace, method, use_gradient=True, stages=None):
    """Re-evaluate at ``x`` and package the result."""
    x = np.array(x, dtype=float)
    f = counter.value(x)
    if not math.isfinite(f):
        raise DivergenceError(f"{method}: non-finite objective at returned point", last_x=x, last_f=f)
    return OptimizationResult(
        x_best=x,
        f_best=f,
        iterations=iterations,
        function_evals=counter.fevals,
        gradient_evals=counter.gevals,
        converged=converged,
        reason=reason,
        trace=list(trace),
        method=method,
        stages=list(stages or []),
    )


def finite_diff_gradient(obj, x, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``obj`` (an ObjectiveHandle or f(x) callable)."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(x, dtype=float)

    def f(v):
        out = obj(v)
        return float(out[0] if isinstance(out, tuple) else out)

    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fp, fm = f(xp), f(xm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise DomainError(f"non-finite objective while differencing coordinate {i}")
        g[i] = (fp - fm) / (2.0 * step)
    return g


def gradient_relative_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)
