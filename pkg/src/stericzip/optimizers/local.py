"""Gradient-based local minimizers: steepest descent, nonlinear CG, L-BFGS."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..errors import DivergenceError
from .base import (
    Counted,
    ObjectiveHandle,
    OptimizationResult,
    OptimizerConfig,
    TracePoint,
    finalize,
    finite,
    grad_stats,
)
from .linesearch import backtracking_armijo, strong_wolfe

# SD -> CG handoff: hand over once grad RMS improves by less than
# STALL_FRACTION over STALL_WINDOW iterations.
STALL_WINDOW = 10
STALL_FRACTION = 0.01


def _start(counter: Counted, x0, method):
    x = np.array(x0, dtype=float)
    f, g = counter.safe_value_grad(x)
    if not finite(f, g):
        raise DivergenceError(f"{method}: non-finite objective or gradient at the start point", last_x=x, last_f=f)
    return x, f, g


def _is_converged(g, cfg: OptimizerConfig):
    rms, gmax = grad_stats(g)
    return rms <= cfg.grad_rms_tol and gmax <= cfg.gmax_tol, rms


def _first_step(g):
    gmax = float(np.max(np.abs(g)))
    return min(1.0, 1.0 / gmax) if gmax > 0 else 1.0


def _descent(counter: Counted, x0, cfg: OptimizerConfig, method: str, stop_on_stall=False, iter_offset=0):
    """Shared SD / PR+ CG loop. Returns (x, f, g, iterations, converged, reason, trace)."""
    x, f, g = _start(counter, x0, method)
    conv, rms = _is_converged(g, cfg)
    trace = [TracePoint(iter_offset, f, rms)]
    rms_hist = [rms]
    if conv:
        return x, f, g, 0, True, "gradient tolerance met", trace
    d = -g
    prev_alpha = None
    prev_slope = None
    for it in range(1, cfg.max_iters + 1):
        slope = float(g @ d)
        if slope >= 0:  # not a descent direction: restart along -g
            d = -g
            slope = float(g @ d)
        if prev_alpha is None:
            alpha0 = _first_step(g)
        else:
            alpha0 = min(prev_alpha * prev_slope / slope, 1e6 * prev_alpha)
        ls = backtracking_armijo(counter, x, f, g, d, alpha0=alpha0)
        if not ls.ok and method == "cg" and not np.array_equal(d, -g):
            d = -g
            slope = float(g @ d)
            ls = backtracking_armijo(counter, x, f, g, d, alpha0=_first_step(g))
        if not ls.ok:
            return x, f, g, it - 1, False, "line search failed", trace
        x_new, f_new, g_new = ls.x, ls.f, ls.g
        if method == "cg":
            beta = float(g_new @ (g_new - g)) / float(g @ g)
            d = -g_new + max(beta, 0.0) * d
        else:
            d = -g_new
        prev_alpha, prev_slope = ls.alpha, slope
        no_progress = f_new >= f and np.array_equal(x_new, x)
        x, f, g = x_new, f_new, g_new
        conv, rms = _is_converged(g, cfg)
        trace.append(TracePoint(iter_offset + it, f, rms))
        rms_hist.append(rms)
        if conv:
            return x, f, g, it, True, "gradient tolerance met", trace
        if no_progress:
            return x, f, g, it, False, "no progress", trace
        if stop_on_stall and len(rms_hist) > STALL_WINDOW:
            past = rms_hist[-1 - STALL_WINDOW]
            if rms > (1.0 - STALL_FRACTION) * past:
                return x, f, g, it, False, "stalled", trace
    return x, f, g, cfg.max_iters, False, "max_iters reached", trace


def steepest_descent(obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None) -> OptimizationResult:
    """Steepest descent with Armijo backtracking."""
    cfg = cfg or OptimizerConfig()
    counter = Counted(obj)
    x, _, _, its, conv, reason, trace = _descent(counter, x0, cfg, "sd")
    return finalize(counter, x, iterations=its, converged=conv, reason=reason, trace=trace, method="sd")


def conjugate_gradient(obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None) -> OptimizationResult:
    """Polak-Ribiere (PR+) nonlinear conjugate gradient.

    A negative PR coefficient or a non-descent direction restarts along the
    negative gradient.
    """
    cfg = cfg or OptimizerConfig()
    counter = Counted(obj)
    x, _, _, its, conv, reason, trace = _descent(counter, x0, cfg, "cg")
    return finalize(counter, x, iterations=its, converged=conv, reason=reason, trace=trace, method="cg")


def sd_then_cg(obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None, counter=None, iter_offset=0):
    """Steepest descent until it stalls, then conjugate gradient."""
    cfg = cfg or OptimizerConfig()
    counter = counter or Counted(obj)
    x, f, g, its1, conv, reason, trace = _descent(counter, x0, cfg, "sd", stop_on_stall=True, iter_offset=iter_offset)
    its = its1
    if not conv:
        x, f, g, its2, conv, reason, trace2 = _descent(counter, x, cfg, "cg", iter_offset=iter_offset + its1)
        trace = trace + trace2[1:]
        its += its2
    return x, its, conv, reason, trace, counter


def two_loop_direction(g, pairs) -> np.ndarray:
    """L-BFGS search direction -H g from curvature pairs ``(s, y, rho)``.

    With no pairs the initial inverse Hessian is the identity.
    """
    q = np.array(g, dtype=float)
    if not pairs:
        return -q
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def lbfgs(obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None) -> OptimizationResult:
    """Limited-memory BFGS with a strong-Wolfe line search (c1=1e-4, c2=0.9)."""
    cfg = cfg or OptimizerConfig()
    if cfg.lbfgs_memory < 1:
        raise ValueError("lbfgs needs lbfgs_memory >= 1")
    counter = Counted(obj)
    x, f, g = _start(counter, x0, "lbfgs")
    conv, rms = _is_converged(g, cfg)
    trace = [TracePoint(0, f, rms)]
    pairs: deque = deque(maxlen=cfg.lbfgs_memory)
    reason = "gradient tolerance met" if conv else "max_iters reached"
    its = 0
    for it in range(1, cfg.max_iters + 1 if not conv else 1):
        d = two_loop_direction(g, pairs)
        if float(g @ d) >= 0:
            pairs.clear()
            d = -g
        alpha0 = 1.0 if pairs else _first_step(g)
        ls = strong_wolfe(counter, x, f, g, d, alpha0=alpha0)
        if not ls.ok and ls.alpha == 0.0 and pairs:
            pairs.clear()
            d = -g
            ls = strong_wolfe(counter, x, f, g, d, alpha0=_first_step(g))
        if ls.alpha == 0.0:
            its = it - 1
            reason = "line search failed"
            break
        s = ls.x - x
        y = ls.g - g
        sy = float(s @ y)
        if sy > 1e-300:  # skip pairs without positive curvature
            pairs.append((s, y, 1.0 / sy))
        no_progress = ls.f >= f
        x, f, g = ls.x, ls.f, ls.g
        its = it
        conv, rms = _is_converged(g, cfg)
        trace.append(TracePoint(it, f, rms))
        if conv:
            reason = "gradient tolerance met"
            break
        if no_progress:
            reason = "no progress"
            break
        if not ls.ok:
            reason = "line search failed"
            break
    return finalize(counter, x, iterations=its, converged=conv, reason=reason, trace=trace, method="lbfgs")
