"""Pair potentials and the reduced-unit Lennard-Jones cluster objective."""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "LJParams",
    "LJABParams",
    "HBParams",
    "lj_pair",
    "lj_pair_ab",
    "hb_pair",
    "lj_cluster_value_grad",
    "lj_cluster_value",
    "lj_cluster_objective",
    "lj_curve",
    "curve_csv",
    "random_cluster",
    "cluster_box",
    "LJ_DIMER_DISTANCE",
]

LJ_DIMER_DISTANCE = 2.0 ** (1.0 / 6.0)


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


@dataclass(frozen=True)
class LJParams:
    epsilon: float
    sigma: float

    def __post_init__(self):
        _positive(epsilon=self.epsilon, sigma=self.sigma)

    def to_ab(self) -> "LJABParams":
        return LJABParams(A=4 * self.epsilon * self.sigma**12, B=4 * self.epsilon * self.sigma**6)


@dataclass(frozen=True)
class LJABParams:
    A: float
    B: float

    def __post_init__(self):
        _positive(A=self.A, B=self.B)

    @property
    def r_min(self) -> float:
        return (2 * self.A / self.B) ** (1 / 6)


@dataclass(frozen=True)
class HBParams:
    C: float
    D: float

    def __post_init__(self):
        _positive(C=self.C, D=self.D)

    @property
    def r_min(self) -> float:
        return (6 * self.C / (5 * self.D)) ** 0.5


def _distances(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("pair distance must be positive")
    return r


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def lj_pair(r, p: LJParams):
    """12-6 Lennard-Jones energy in the epsilon/sigma form."""
    s6 = (p.sigma / _distances(r)) ** 6
    return _out(4.0 * p.epsilon * (s6 * s6 - s6))


def lj_pair_ab(r, p: LJABParams):
    r6 = _distances(r) ** -6
    return _out(p.A * r6 * r6 - p.B * r6)


def hb_pair(r, p: HBParams):
    """12-10 hydrogen-bond energy."""
    r2 = _distances(r) ** -2
    r10 = r2**5
    return _out(p.C * r10 * r2 - p.D * r10)


def lj_cluster_value_grad(x, n_atoms: int | None = None):
    """Reduced-unit LJ cluster energy and its gradient.

    ``x`` is the flattened (x1, y1, z1, x2, ...) vector. The energy is
    4 * sum_{i<j} (t^-6 - t^-3) where t is the squared distance.
    """
    x = np.asarray(x, dtype=float)
    if n_atoms is None:
        n_atoms = x.size // 3
    if n_atoms < 2 or x.size != 3 * n_atoms:
        raise ValueError(f"need 3N coordinates with N >= 2, got {x.size} for N={n_atoms}")
    pos = x.reshape(n_atoms, 3)
    diff = pos[:, None, :] - pos[None, :, :]
    t = np.einsum("ijk,ijk->ij", diff, diff)
    if np.any(t[_pairs(n_atoms)] <= 0.0):
        raise DomainError("coincident atoms: squared distance is zero")
    np.fill_diagonal(t, 1.0)
    inv3 = t**-3
    inv6 = inv3 * inv3
    np.fill_diagonal(inv3, 0.0)
    np.fill_diagonal(inv6, 0.0)
    energy = 2.0 * float(np.sum(inv6 - inv3))  # each pair counted twice
    # d/dt of 4 (t^-6 - t^-3) is 4 (-6 t^-7 + 3 t^-4); dt/dx_i = 2 (x_i - x_j)
    dfdt = 4.0 * (-6.0 * inv6 + 3.0 * inv3) / t
    grad = 2.0 * np.einsum("ij,ijk->ik", dfdt, diff)
    return energy, grad.ravel()


@functools.lru_cache(maxsize=64)
def _pairs(n_atoms: int):
    i, j = np.triu_indices(n_atoms, 1)
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def lj_cluster_value(x, n_atoms: int) -> float:
    """Energy only, over the i < j pairs; used by gradient-free methods."""
    pos = np.asarray(x, dtype=float).reshape(n_atoms, 3)
    i, j = _pairs(n_atoms)
    d = pos[i] - pos[j]
    t = np.einsum("ij,ij->i", d, d)
    if np.any(t <= 0.0):
        raise DomainError("coincident atoms: squared distance is zero")
    inv3 = t**-3
    return 4.0 * float(np.sum(inv3 * inv3 - inv3))


def lj_cluster_objective(n_atoms: int):
    """ObjectiveHandle for the N-atom reduced-unit cluster."""
    from .optimizers import ObjectiveHandle

    if n_atoms < 2:
        raise ValueError("a cluster needs at least two atoms")
    return ObjectiveHandle(
        lambda x: lj_cluster_value_grad(x, n_atoms),
        3 * n_atoms,
        name=f"lj-cluster-{n_atoms}",
        value_fn=lambda x: lj_cluster_value(x, n_atoms),
    )


def _cluster_side(n_atoms: int) -> float:
    return max(1.5, 1.2 * n_atoms ** (1 / 3))


def cluster_box(n_atoms: int, pad: float = 1.0):
    """Search box for SA-based methods: the start cube padded on every side."""
    side = _cluster_side(n_atoms)
    return np.full(3 * n_atoms, -pad), np.full(3 * n_atoms, side + pad)


def random_cluster(n_atoms: int, rng: np.random.Generator, min_distance: float = 0.8) -> np.ndarray:
    """Random start configuration in a cube sized for roughly liquid density."""
    side = _cluster_side(n_atoms)
    while True:
        pos = rng.uniform(0.0, side, size=(n_atoms, 3))
        d = np.linalg.norm(pos[:, None] - pos[None, :], axis=2)
        if np.all(d[np.triu_indices(n_atoms, 1)] >= min_distance):
            return pos.ravel()


def lj_curve(p: LJParams, r_min: float, r_max: float, samples: int) -> np.ndarray:
    """(samples, 2) table of r and V(r) on an even grid."""
    if not (0 < r_min < r_max):
        raise ValueError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    if samples < 2:
        raise ValueError("need at least two samples")
    r = np.linspace(r_min, r_max, samples)
    return np.column_stack([r, lj_pair(r, p)])


def curve_csv(table: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "V"])
    for r, v in table:
        w.writerow([f"{r:.9g}", f"{v:.9g}"])
    return buf.getvalue()
