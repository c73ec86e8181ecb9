"""Line searches.

Both searches treat a non-finite trial value as "step too long".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import Counted, finite


REFINE_TRIES = 2


@dataclass
class LineSearchResult:
    ok: bool
    alpha: float
    x: np.ndarray
    f: float
    g: np.ndarray | None


def _quad_min(f0, slope, alpha, fa):
    """Minimizer of the parabola through f(0), f'(0) and f(alpha)."""
    curv = fa - f0 - slope * alpha
    if curv <= 0:
        return math.inf
    return -slope * alpha * alpha / (2.0 * curv)


def _refine(counter, x, d, f0, slope0, alpha, fa, ga, c1, c2=None, max_tries=1, tol=1e-3):
    """Try cubic-interpolated minimizers along ``d`` past an accepted step.

    A trial replaces the current point only when it lowers f and still
    satisfies the acceptance conditions. Exact on quadratics.
    """
    for _ in range(max_tries):
        sa = float(ga @ d)
        if abs(sa) <= tol * abs(slope0):
            break
        a = _cubic_min(0.0, f0, slope0, alpha, fa, sa)
        if a is None or not math.isfinite(a) or a <= 0 or abs(a - alpha) <= 1e-3 * alpha or a > 10.0 * alpha:
            break
        fq, gq = counter.safe_value_grad(x + a * d)
        if not finite(fq, gq) or fq >= fa or fq > f0 + c1 * a * slope0:
            break
        if c2 is not None and abs(float(gq @ d)) > -c2 * slope0:
            break
        alpha, fa, ga = a, fq, gq
    return alpha, fa, ga


def backtracking_armijo(
    counter: Counted,
    x,
    f0,
    g0,
    d,
    alpha0=1.0,
    c1=1e-4,
    max_steps=60,
    refine=True,
) -> LineSearchResult:
    """Armijo backtracking with safeguarded quadratic interpolation.

    With ``refine`` the accepted step is followed by up to REFINE_TRIES
    cubic-interpolation trials, each kept only when it lowers f further.
    This makes the search exact on quadratics.
    """
    slope = float(g0 @ d)
    if not slope < 0:
        return LineSearchResult(False, 0.0, x, f0, g0)
    alpha = alpha0
    for _ in range(max_steps):
        xn = x + alpha * d
        fn, gn = counter.safe_value_grad(xn)
        if finite(fn, gn) and fn <= f0 + c1 * alpha * slope:
            if refine:
                alpha, fn, gn = _refine(counter, x, d, f0, slope, alpha, fn, gn, c1, max_tries=REFINE_TRIES)
            return LineSearchResult(True, alpha, x + alpha * d, fn, gn)
        if math.isfinite(fn):
            a_q = _quad_min(f0, slope, alpha, fn)
            alpha = min(max(a_q, 0.1 * alpha), 0.5 * alpha)
        else:
            alpha *= 0.1
    return LineSearchResult(False, 0.0, x, f0, g0)


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating f and f' at a and b (or None)."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def strong_wolfe(
    counter: Counted,
    x,
    f0,
    g0,
    d,
    alpha0=1.0,
    c1=1e-4,
    c2=0.9,
    alpha_max=1e10,
    max_iters=40,
    refine=True,
) -> LineSearchResult:
    """Bracketing/zoom line search for the strong Wolfe conditions."""
    slope0 = float(g0 @ d)
    if not slope0 < 0:
        return LineSearchResult(False, 0.0, x, f0, g0)
    best = LineSearchResult(False, 0.0, x, f0, g0)

    def note(alpha, f, g):
        nonlocal best
        if finite(f, g) and f <= f0 + c1 * alpha * slope0 and f < best.f:
            best = LineSearchResult(False, alpha, x + alpha * d, f, g)

    def zoom(lo, f_lo, s_lo, hi, f_hi, s_hi):
        for _ in range(max_iters):
            width = hi - lo
            a = None
            if s_hi is not None and math.isfinite(f_hi):
                a = _cubic_min(lo, f_lo, s_lo, hi, f_hi, s_hi)
            elif math.isfinite(f_hi):
                # quadratic through f(lo), f'(lo), f(hi)
                curv = (f_hi - f_lo - s_lo * width) / (width * width)
                if curv > 0:
                    a = lo - s_lo / (2.0 * curv)
            lo_b, hi_b = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if a is None or not math.isfinite(a) or not lo_b <= a <= hi_b:
                a = lo + 0.5 * width
            xa = x + a * d
            fa, ga = counter.safe_value_grad(xa)
            if not finite(fa, ga):
                hi, f_hi, s_hi = a, math.inf, None
                continue
            note(a, fa, ga)
            sa = float(ga @ d)
            if fa > f0 + c1 * a * slope0 or fa >= f_lo:
                hi, f_hi, s_hi = a, fa, sa
            else:
                if abs(sa) <= -c2 * slope0:
                    return LineSearchResult(True, a, xa, fa, ga)
                if sa * (hi - lo) >= 0:
                    hi, f_hi, s_hi = lo, f_lo, s_lo
                lo, f_lo, s_lo = a, fa, sa
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        return best

    a_prev, f_prev, s_prev = 0.0, f0, slope0
    alpha = alpha0
    for i in range(max_iters):
        xa = x + alpha * d
        fa, ga = counter.safe_value_grad(xa)
        if not finite(fa, ga):
            return zoom(a_prev, f_prev, s_prev, alpha, math.inf, None)
        note(alpha, fa, ga)
        sa = float(ga @ d)
        if fa > f0 + c1 * alpha * slope0 or (i > 0 and fa >= f_prev):
            return zoom(a_prev, f_prev, s_prev, alpha, fa, sa)
        if abs(sa) <= -c2 * slope0:
            if refine:
                alpha, fa, ga = _refine(counter, x, d, f0, slope0, alpha, fa, ga, c1, c2, max_tries=REFINE_TRIES)
            return LineSearchResult(True, alpha, x + alpha * d, fa, ga)
        if sa >= 0:
            return zoom(alpha, fa, sa, a_prev, f_prev, s_prev)
        a_prev, f_prev, s_prev = alpha, fa, sa
        alpha = min(2.0 * alpha, alpha_max)
    return best
