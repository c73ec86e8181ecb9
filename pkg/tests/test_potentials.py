import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stericzip.errors import DomainError
from stericzip.potentials import (
    LJ_DIMER_DISTANCE,
    HBParams,
    LJABParams,
    LJParams,
    cluster_box,
    curve_csv,
    hb_pair,
    lj_cluster_objective,
    lj_cluster_value,
    lj_cluster_value_grad,
    lj_curve,
    lj_pair,
    lj_pair_ab,
    random_cluster,
)

pos = st.floats(min_value=0.1, max_value=10.0)


@given(pos, pos, st.floats(min_value=0.5, max_value=5.0))
def test_ab_form_matches(eps, sigma, r):
    p = LJParams(eps, sigma)
    assert lj_pair_ab(r, p.to_ab()) == pytest.approx(lj_pair(r, p), rel=1e-9, abs=1e-12)


@given(pos, pos)
def test_lj_minimum(eps, sigma):
    p = LJParams(eps, sigma)
    assert p.to_ab().r_min == pytest.approx(LJ_DIMER_DISTANCE * sigma, rel=1e-12)
    assert lj_pair(LJ_DIMER_DISTANCE * sigma, p) == pytest.approx(-eps, rel=1e-12)
    assert lj_pair(sigma, p) == pytest.approx(0.0, abs=1e-12 * eps)


def test_hb_minimum():
    p = HBParams(C=5.0, D=6.0)
    r = np.linspace(0.5, 3.0, 20001)
    assert r[np.argmin(hb_pair(r, p))] == pytest.approx(p.r_min, abs=2e-4)


def test_pair_domain_and_params():
    with pytest.raises(DomainError):
        lj_pair(0.0, LJParams(1, 1))
    with pytest.raises(DomainError):
        hb_pair(np.array([1.0, -1.0]), HBParams(1, 1))
    with pytest.raises(ValueError):
        LJParams(0.0, 1.0)
    with pytest.raises(ValueError):
        LJABParams(1.0, -1.0)


def test_cluster_pair_sum_oracle():
    rng = np.random.default_rng(0)
    x = random_cluster(6, rng)
    p = x.reshape(6, 3)
    ref = sum(lj_pair(np.linalg.norm(p[i] - p[j]), LJParams(1, 1)) for i in range(6) for j in range(i + 1, 6))
    e, _ = lj_cluster_value_grad(x)
    assert e == pytest.approx(ref, rel=1e-12)
    assert lj_cluster_value(x, 6) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-np.pi, np.pi), st.floats(-5, 5))
def test_cluster_rigid_invariance(seed, theta, shift):
    x = random_cluster(4, np.random.default_rng(seed)).reshape(4, 3)
    rot = np.array([[np.cos(theta), -np.sin(theta), 0], [np.sin(theta), np.cos(theta), 0], [0, 0, 1]])
    y = x @ rot.T + shift
    assert lj_cluster_value(y.ravel(), 4) == pytest.approx(lj_cluster_value(x.ravel(), 4), rel=1e-9)
    # gradient sums to zero (no net force)
    _, g = lj_cluster_value_grad(y.ravel())
    assert np.abs(g.reshape(4, 3).sum(axis=0)).max() < 1e-8 * max(1.0, np.abs(g).max())


def test_cluster_errors():
    with pytest.raises(DomainError):
        lj_cluster_value_grad(np.zeros(6))
    with pytest.raises(ValueError):
        lj_cluster_value_grad(np.zeros(3))
    with pytest.raises(ValueError):
        lj_cluster_objective(1)


def test_cluster_helpers():
    lo, hi = cluster_box(4)
    assert lo.shape == hi.shape == (12,)
    x = random_cluster(4, np.random.default_rng(1))
    assert np.all((x >= lo) & (x <= hi))
    h = lj_cluster_objective(4)
    assert h.value(x) == pytest.approx(h(x)[0], rel=1e-12)


def test_curve():
    table = lj_curve(LJParams(1.0, 1.0), 0.9, 3.0, 5)
    assert table.shape == (5, 2)
    text = curve_csv(table)
    assert text.splitlines()[0] == "r,V"
    assert len(text.splitlines()) == 6
    with pytest.raises(ValueError):
        lj_curve(LJParams(1, 1), 2.0, 1.0, 5)
