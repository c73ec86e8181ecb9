"""Three-stage SD/CG -> SA -> SD/CG hybrid."""

from __future__ import annotations

import numpy as np

from .base import Counted, ObjectiveHandle, OptimizationResult, OptimizerConfig, TracePoint, finalize
from .local import sd_then_cg
from .stochastic import _anneal


def sdcg_sa_sdcg(obj: ObjectiveHandle, x0, cfg: OptimizerConfig | None = None, bounds=None) -> OptimizationResult:
    """Local SD->CG descent, an SA global search from its minimizer, then SD->CG again.

    ``result.stages`` records ``(stage, f)`` after each stage. The trace is
    the concatenation of all three stages with a running iteration count.
    """
    cfg = cfg or OptimizerConfig()
    rng = np.random.default_rng(cfg.rng_seed)
    counter = Counted(obj)

    x1, its1, _, reason1, trace1, _ = sd_then_cg(obj, x0, cfg, counter=counter)
    f1 = counter.value(x1)

    x2, f2, levels, _, sa_trace = _anneal(counter, x1, cfg.sa, rng, bounds=bounds, f0=f1)
    offset = its1
    trace2 = [TracePoint(offset + p.iteration, p.f, p.grad_rms) for p in sa_trace]
    offset += levels

    x3, its3, conv3, reason3, trace3, _ = sd_then_cg(obj, x2, cfg, counter=counter, iter_offset=offset)
    f3 = counter.value(x3)
    stages = [("sdcg-1", f1), ("sa", f2), ("sdcg-2", f3)]
    return finalize(
        counter,
        x3,
        iterations=its1 + levels + its3,
        converged=conv3,
        reason=f"stage 3: {reason3}",
        trace=trace1 + trace2 + trace3,
        method="sdcg-sa-sdcg",
        stages=stages,
    )
