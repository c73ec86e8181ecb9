"""Simulated annealing and the SA-refined evolutionary strategy (SAEC)."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from .base import Counted, ObjectiveHandle, OptimizationResult, OptimizerConfig, SAConfig, TracePoint, finalize

NAN = float("nan")


def _anneal(counter: Counted, x0, sa: SAConfig, rng: np.random.Generator, bounds=None, f0=None, max_levels=None):
    """Core Metropolis loop.

    Proposals are uniform in a box of full width ``step_scale * T / t_initial``
    (per coordinate) around the current point, clipped to ``bounds`` when
    given. Temperature falls geometrically after every
    ``steps_per_temperature`` proposals until it drops below ``t_final``.

    Returns ``(x_best, f_best, levels, rejected_nonfinite, trace)``.
    """
    x = np.array(x0, dtype=float)
    f = counter.safe_value(x) if f0 is None else f0
    if not math.isfinite(f):
        raise DomainError("simulated annealing needs a finite objective at the start point")
    step = np.asarray(sa.step_scale, dtype=float)
    lo, hi = (None, None) if bounds is None else bounds
    best_x, best_f = x.copy(), f
    t = sa.t_initial
    level = 0
    nonfinite = 0
    trace = []
    while t >= sa.t_final and (max_levels is None or level < max_levels):
        width = step * (t / sa.t_initial)
        for _ in range(sa.steps_per_temperature):
            prop = x + width * (rng.random(x.size) - 0.5)
            if lo is not None:
                np.clip(prop, lo, hi, out=prop)
            fp = counter.safe_value(prop)
            if not math.isfinite(fp):
                nonfinite += 1
                continue
            delta = fp - f
            if delta <= 0 or rng.random() < math.exp(-delta / t):
                x, f = prop, fp
                if f < best_f:
                    best_x, best_f = x.copy(), f
        level += 1
        trace.append(TracePoint(level, best_f, NAN))
        t *= sa.cooling_factor
    return best_x, best_f, level, nonfinite, trace


def simulated_annealing(
    obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None, bounds=None, rng=None
) -> OptimizationResult:
    """Metropolis simulated annealing with geometric cooling; returns the best point seen."""
    cfg = cfg or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    counter = Counted(obj)
    x, _, levels, nonfinite, trace = _anneal(counter, x0, cfg.sa, rng, bounds=bounds)
    reason = "schedule complete"
    if nonfinite:
        reason += f" ({nonfinite} non-finite proposals rejected)"
    return finalize(counter, x, iterations=levels, converged=True, reason=reason, trace=trace, method="sa")


def default_box(n: int, half_width: float = 5.0):
    return np.full(n, -half_width), np.full(n, half_width)


def _check_box(bounds, n):
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (n,)).copy() for b in bounds)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi <= lo):
        raise ValueError("search box must be finite with upper > lower in every coordinate")
    return lo, hi


def saec(
    obj: ObjectiveHandle, cfg: OptimizerConfig | None = None, bounds=None, x0=None
) -> OptimizationResult:
    """Evolutionary strategy whose offspring are polished by short SA runs.

    Each individual carries a self-adapted mutation scale (log-normal
    update). Per generation: rank the population (stable sort, lower index
    wins ties), take the best ``parent_fraction`` as parents in round-robin,
    mutate with Gaussian noise, anneal each child briefly inside the box,
    then keep the best ``population_size`` of parents plus children.
    ``x0``, when given, replaces the first random individual.
    """
    cfg = cfg or OptimizerConfig()
    p = cfg.saec
    n = obj.dimension
    lo, hi = _check_box(bounds if bounds is not None else default_box(n), n)
    width = hi - lo
    rng = np.random.default_rng(cfg.rng_seed)
    counter = Counted(obj)
    tau = 1.0 / math.sqrt(2.0 * n)

    pop = lo + width * rng.random((p.population_size, n))
    if x0 is not None:
        pop[0] = np.clip(np.asarray(x0, dtype=float), lo, hi)
    sigma = np.full(p.population_size, p.mutation_scale)
    fit = np.array([counter.safe_value(x) for x in pop])
    fit[~np.isfinite(fit)] = math.inf
    n_parents = max(1, int(round(p.parent_fraction * p.population_size)))

    order = np.argsort(fit, kind="stable")
    best_x, best_f = pop[order[0]].copy(), float(fit[order[0]])
    trace = [TracePoint(0, best_f, NAN)]
    for gen in range(1, p.generations + 1):
        parents = order[:n_parents]
        spread = float(np.std(fit[np.isfinite(fit)])) if np.any(np.isfinite(fit)) else 1.0
        t0 = max(spread, 1e-300)
        kids, kid_fit, kid_sigma = [], [], []
        for k in range(p.population_size):
            par = parents[k % n_parents]
            s = sigma[par] * math.exp(tau * rng.standard_normal())
            child = np.clip(pop[par] + s * width * rng.standard_normal(n), lo, hi)
            fc = counter.safe_value(child)
            if math.isfinite(fc):
                # short anneal: temperature from the population's fitness
                # spread, proposal width from the child's own mutation scale
                local = SAConfig(
                    t_initial=t0,
                    cooling_factor=0.5,
                    steps_per_temperature=p.local_steps,
                    step_scale=s * width,
                    t_final=t0 * 0.5 ** (p.local_levels - 1),
                )
                child, fc, _, _, _ = _anneal(counter, child, local, rng, bounds=(lo, hi), f0=fc)
            else:
                fc = math.inf
            kids.append(child)
            kid_fit.append(fc)
            kid_sigma.append(s)
        pool = np.vstack([pop, np.array(kids)])
        pool_fit = np.concatenate([fit, np.array(kid_fit)])
        pool_sigma = np.concatenate([sigma, np.array(kid_sigma)])
        keep = np.argsort(pool_fit, kind="stable")[: p.population_size]
        pop, fit, sigma = pool[keep], pool_fit[keep], pool_sigma[keep]
        order = np.arange(p.population_size)  # pool already sorted
        if fit[0] < best_f:
            best_x, best_f = pop[0].copy(), float(fit[0])
        trace.append(TracePoint(gen, best_f, NAN))

    return finalize(
        counter,
        best_x,
        iterations=p.generations,
        converged=True,
        reason="generations complete",
        trace=trace,
        method="saec",
    )
