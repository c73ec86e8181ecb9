import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stericzip.errors import DomainError, ParseError
from stericzip.problems import (
    AxisFitProblem,
    DistanceGeometryProblem,
    Edge,
    axis_objective,
    dg_objective,
    dg_search_box,
    dg_value,
    edge_distances,
    inertia_matrix,
    infeasibility_margins,
    model_problem,
    smallest_eigenpair,
)


def _toy():
    anchors = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]])
    edges = (Edge("s0", "a0", 2.5), Edge("s0", "a1", 2.5), Edge("s0", "s1", 1.0))
    return DistanceGeometryProblem(anchors, 2, edges, np.zeros(6))


def test_dg_zero_at_exact_solution():
    p = _toy()
    x = np.array([2.0, 1.5, 0.0, 2.0, 2.5, 0.0])
    assert dg_objective(p, x)[0] == pytest.approx(0.0, abs=1e-24)
    np.testing.assert_allclose(edge_distances(p, x), [2.5, 2.5, 1.0])
    np.testing.assert_allclose(dg_objective(p, x)[1], 0.0, atol=1e-12)


def test_dg_value_by_hand():
    p = _toy()
    x = np.zeros(6)
    # edges: (0 - 6.25)^2/2, (16 - 6.25)^2/2, (0 - 1)^2/2
    assert dg_value(p, x) == pytest.approx(0.5 * (6.25**2 + 9.75**2 + 1.0))
    assert dg_objective(p, x)[0] == pytest.approx(dg_value(p, x))


def test_dg_validation():
    with pytest.raises(ParseError):
        Edge("x0", "a0", 1.0)
    with pytest.raises(ValueError):
        Edge("s0", "a0", 0.0)
    with pytest.raises(ValueError):
        Edge("a0", "a1", 1.0)
    with pytest.raises(ValueError):
        DistanceGeometryProblem(np.zeros((1, 3)), 1, (Edge("s0", "a3", 1.0),), np.zeros(3))
    with pytest.raises(ValueError):
        DistanceGeometryProblem(np.zeros((1, 3)), 1, (), np.zeros(4))


def test_json_round_trip(schema):
    p = model_problem(2)
    doc = p.to_json()
    jsonschema.validate(doc, schema("dg-problem"))
    q = DistanceGeometryProblem.from_json(doc)
    np.testing.assert_array_equal(q.anchors, p.anchors)
    assert q.edges == p.edges
    assert q.sensor_labels == p.sensor_labels
    with pytest.raises(ParseError):
        DistanceGeometryProblem.from_json("{not json")
    with pytest.raises(ParseError):
        DistanceGeometryProblem.from_json({"anchors": []})


def test_infeasibility_by_model():
    assert [m.infeasible for m in infeasibility_margins(model_problem(1))] == [False]
    (m3,) = infeasibility_margins(model_problem(3))
    assert m3.infeasible and m3.sensor == "G4.ALA.CB"
    assert m3.margin == pytest.approx(m3.anchor_gap - 6.8)


def test_search_box_contains_start():
    for k in (1, 2, 3):
        p = model_problem(k)
        lo, hi = dg_search_box(p)
        assert np.all((p.initial_guess > lo) & (p.initial_guess < hi))


def test_model_problem_bad():
    with pytest.raises(ValueError):
        model_problem(4)


pts = arrays(float, (6, 3), elements=st.floats(-20, 20))


@settings(max_examples=60, deadline=None)
@given(pts, arrays(float, 3, elements=st.floats(-5, 5)))
def test_axis_objective_matches_projection(points, w):
    if not np.any(points) or np.linalg.norm(w) < 1e-3:
        return
    p = AxisFitProblem(points)
    u = w / np.linalg.norm(w)
    perp = points - np.outer(points @ u, u)
    assert axis_objective(p, w)[0] == pytest.approx(np.sum(perp**2), rel=1e-9, abs=1e-9)


def test_axis_zero_direction():
    with pytest.raises(DomainError):
        axis_objective(AxisFitProblem(np.eye(3)), np.zeros(3))


@settings(max_examples=100, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-50, 50)))
def test_smallest_eigenpair_vs_eigh(a):
    m = a + a.T
    lam, v = smallest_eigenpair(m)
    ref = np.linalg.eigvalsh(m)
    scale = max(1.0, np.abs(ref).max())
    assert lam == pytest.approx(ref[0], abs=1e-9 * scale)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    # residual relative to the spectrum scale; tolerant of clustered eigenvalues
    assert np.linalg.norm(m @ v - lam * v) <= 1e-6 * scale


def test_eigenpair_minimizes_axis_objective():
    rng = np.random.default_rng(2)
    p = AxisFitProblem(np.outer(np.arange(1, 8), [1.0, 2.0, -0.5]) + rng.normal(scale=0.1, size=(7, 3)))
    lam, v = smallest_eigenpair(inertia_matrix(p))
    assert lam == pytest.approx(axis_objective(p, v)[0], rel=1e-10)
    for _ in range(50):
        assert axis_objective(p, v + rng.normal(scale=0.3, size=3))[0] >= lam - 1e-9
    assert abs(v @ np.array([1.0, 2.0, -0.5])) / np.linalg.norm([1.0, 2.0, -0.5]) > 0.999
