import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import rosen, rosen_der

from stericzip.errors import DivergenceError, ParseError
from stericzip.optimizers import (
    OPTIMIZERS,
    ObjectiveHandle,
    OptimizerConfig,
    conjugate_gradient,
    grad_stats,
    lbfgs,
    parse_config,
    run_optimizer,
    saec,
    simulated_annealing,
    steepest_descent,
    two_loop_direction,
)
from stericzip.optimizers.linesearch import backtracking_armijo, strong_wolfe
from stericzip.optimizers.base import Counted

A = np.diag([1.0, 4.0, 9.0])


def quad(x):
    return 0.5 * x @ A @ x, A @ x


QUAD = ObjectiveHandle(quad, 3, name="quad")
ROSEN = ObjectiveHandle(lambda x: (rosen(x), rosen_der(x)), 4, name="rosen")


@pytest.mark.parametrize("method", [steepest_descent, conjugate_gradient, lbfgs])
def test_quadratic_converges(method):
    res = method(QUAD, [1.0, -2.0, 0.5])
    assert res.converged
    np.testing.assert_allclose(res.x_best, 0.0, atol=1e-9)
    rms, gmax = grad_stats(A @ res.x_best)
    assert rms <= 1e-9 and gmax <= 1e-9


@pytest.mark.parametrize("method", [conjugate_gradient, lbfgs])
def test_rosenbrock(method):
    res = method(ROSEN, [-1.2, 1.0, -1.2, 1.0], OptimizerConfig(max_iters=20000))
    np.testing.assert_allclose(res.x_best, 1.0, atol=1e-6)


def test_lbfgs_fewer_evals_than_sd():
    x0 = [-1.2, 1.0, -1.2, 1.0]
    cfg = OptimizerConfig(max_iters=50000, grad_rms_tol=1e-6, gmax_tol=1e-6)
    assert lbfgs(ROSEN, x0, cfg).function_evals < steepest_descent(ROSEN, x0, cfg).function_evals


def test_convergence_needs_both_tolerances():
    loose = OptimizerConfig(grad_rms_tol=1.0, gmax_tol=1e-12)
    res = steepest_descent(QUAD, [1.0, 1.0, 1.0], loose)
    _, gmax = grad_stats(A @ res.x_best)
    assert gmax <= 1e-12


def test_max_iters_reported():
    res = steepest_descent(ROSEN, [-1.2, 1.0, -1.2, 1.0], OptimizerConfig(max_iters=3))
    assert not res.converged and res.reason == "max_iters reached" and res.iterations == 3


def test_trace_monotone_for_descent():
    res = conjugate_gradient(ROSEN, [-1.2, 1.0, -1.2, 1.0])
    f = [p.f for p in res.trace]
    assert all(b <= a for a, b in zip(f, f[1:]))


def test_non_finite_start():
    bad = ObjectiveHandle(lambda x: (float("nan"), x), 2)
    with pytest.raises(DivergenceError):
        lbfgs(bad, [1.0, 1.0])


def test_two_loop_empty_memory_is_negative_gradient():
    g = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(two_loop_direction(g, []), -g)


def test_two_loop_recovers_inverse_hessian():
    pairs = []
    for e in np.eye(3):
        y = A @ e
        pairs.append((e, y, 1.0 / (y @ e)))
    g = np.array([1.0, 1.0, 1.0])
    np.testing.assert_allclose(two_loop_direction(g, pairs), -np.linalg.solve(A, g))


def test_line_searches():
    c = Counted(QUAD)
    x = np.array([1.0, 1.0, 1.0])
    f, g = quad(x)
    ls = backtracking_armijo(c, x, f, g, -g, alpha0=1.0)
    assert ls.ok and ls.f < f
    c = Counted(ROSEN)
    x = np.array([-1.2, 1.0, -1.2, 1.0])
    f, g = ROSEN(x)
    ls = strong_wolfe(c, x, f, g, -g, alpha0=1e-3)
    assert ls.ok
    assert abs(ls.g @ -g) <= 0.9 * abs(g @ -g) + 1e-12


def test_sa_respects_bounds_and_improves():
    box = (np.full(3, -0.5), np.full(3, 2.0))
    res = simulated_annealing(QUAD, [1.5, 1.5, 1.5], OptimizerConfig(rng_seed=3), bounds=box)
    assert res.f_best < QUAD([1.5, 1.5, 1.5])[0]
    assert np.all((res.x_best >= box[0]) & (res.x_best <= box[1]))
    assert res.gradient_evals == 0


def test_saec_finds_quadratic_minimum():
    cfg = OptimizerConfig(rng_seed=0).updated(**{"saec.generations": 40})
    res = saec(QUAD, cfg, bounds=(np.full(3, -3.0), np.full(3, 3.0)))
    assert res.f_best < 1e-3
    assert res.gradient_evals == 0
    assert [p.f for p in res.trace] == sorted((p.f for p in res.trace), reverse=True)


def test_saec_bad_box():
    with pytest.raises(ValueError):
        saec(QUAD, bounds=(np.zeros(3), np.zeros(3)))


def test_hybrid_stages():
    res = run_optimizer("sdcg-sa-sdcg", QUAD, [1.0, 1.0, 1.0], bounds=(np.full(3, -2.0), np.full(3, 2.0)))
    assert [s for s, _ in res.stages] == ["sdcg-1", "sa", "sdcg-2"]
    assert res.stages[2][1] <= res.stages[1][1] <= res.stages[0][1]
    iters = [p.iteration for p in res.trace]
    assert iters == sorted(iters)


def test_run_optimizer_names():
    for name in OPTIMIZERS:
        cfg = OptimizerConfig().updated(**{"saec.generations": 5, "sa.t_final": 1.0})
        res = run_optimizer(name, QUAD, [0.5, 0.5, 0.5], cfg, bounds=(np.full(3, -1.0), np.full(3, 1.0)))
        assert res.method == name and math.isfinite(res.f_best)
    with pytest.raises(ValueError):
        run_optimizer("newton", QUAD, [0, 0, 0])


def test_config_parsing():
    cfg = parse_config("# comment\nsa.t_initial = 5\nsaec.generations=12\nmax_iters = 7  # trailing\n")
    assert cfg.sa.t_initial == 5.0 and cfg.saec.generations == 12 and cfg.max_iters == 7
    for bad in ("nonsense", "sa.nope = 1", "max_iters = lots", "sa.cooling_factor = 1.5"):
        with pytest.raises(ParseError):
            parse_config(bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.5, 0.99))
def test_sa_deterministic_property(seed, cooling):
    cfg = OptimizerConfig(rng_seed=seed).updated(**{"sa.cooling_factor": cooling, "sa.t_final": 1e-2})
    a = simulated_annealing(QUAD, [1.0, 1.0, 1.0], cfg)
    b = simulated_annealing(QUAD, [1.0, 1.0, 1.0], cfg)
    assert a.trace_csv() == b.trace_csv()
