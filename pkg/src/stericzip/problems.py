"""Least-squares problem builders: sensor/anchor distance geometry and axis fitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError
from .optimizers import ObjectiveHandle

__all__ = [
    "CONTACT_DISTANCE",
    "Edge",
    "DistanceGeometryProblem",
    "dg_objective",
    "dg_handle",
    "dg_value",
    "edge_distances",
    "infeasibility_margins",
    "dg_search_box",
    "model_problem",
    "PUBLISHED_OPTIMA",
    "AxisFitProblem",
    "axis_objective",
    "axis_handle",
    "strand_axis_data",
    "PUBLISHED_AXES",
    "inertia_matrix",
    "smallest_eigenpair",
]

# Twice the carbon van der Waals radius, in angstroms.
CONTACT_DISTANCE = 3.4

DG_SCHEMA = "stericzip.dg-problem/1"


# ---------------------------------------------------------------------------
# Distance geometry


def _parse_ref(ref: str) -> tuple[str, int]:
    if len(ref) < 2 or ref[0] not in "as" or not ref[1:].isdigit():
        raise ParseError(f"endpoint reference must look like 's0' or 'a1', got {ref!r}")
    return ("anchor" if ref[0] == "a" else "sensor"), int(ref[1:])


@dataclass(frozen=True)
class Edge:
    u: str  # "s<i>" for sensor i, "a<j>" for anchor j
    v: str
    d: float

    def __post_init__(self):
        _parse_ref(self.u)
        _parse_ref(self.v)
        if not self.d > 0:
            raise ValueError(f"edge {self.u}-{self.v}: target distance must be positive")
        if self.u[0] == "a" and self.v[0] == "a":
            raise ValueError(f"edge {self.u}-{self.v} joins two anchors; it is a constant")


@dataclass(frozen=True, eq=False)
class DistanceGeometryProblem:
    anchors: np.ndarray
    n_sensors: int
    edges: tuple[Edge, ...]
    initial_guess: np.ndarray
    anchor_labels: tuple[str, ...] = ()
    sensor_labels: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        anchors = np.array(self.anchors, dtype=float).reshape(-1, 3)
        x0 = np.array(self.initial_guess, dtype=float).ravel()
        if self.n_sensors < 1:
            raise ValueError("need at least one sensor")
        if x0.size != 3 * self.n_sensors:
            raise ValueError(f"initial guess has {x0.size} values, expected {3 * self.n_sensors}")
        edges = tuple(self.edges)
        for e in edges:
            for ref in (e.u, e.v):
                kind, i = _parse_ref(ref)
                limit = len(anchors) if kind == "anchor" else self.n_sensors
                if i >= limit:
                    raise ValueError(f"edge endpoint {ref} out of range")
        anchors.setflags(write=False)
        x0.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "initial_guess", x0)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "anchor_labels", tuple(self.anchor_labels) or tuple(f"a{i}" for i in range(len(anchors))))
        object.__setattr__(self, "sensor_labels", tuple(self.sensor_labels) or tuple(f"s{i}" for i in range(self.n_sensors)))

    @property
    def dimension(self) -> int:
        return 3 * self.n_sensors

    def label(self, ref: str) -> str:
        kind, i = _parse_ref(ref)
        return self.anchor_labels[i] if kind == "anchor" else self.sensor_labels[i]

    def to_json(self) -> dict:
        return {
            "schema": DG_SCHEMA,
            "name": self.name,
            "anchors": [[float(c) for c in a] for a in self.anchors],
            "anchor_labels": list(self.anchor_labels),
            "n_sensors": self.n_sensors,
            "sensor_labels": list(self.sensor_labels),
            "edges": [{"u": e.u, "v": e.v, "d": e.d} for e in self.edges],
            "initial_guess": [float(v) for v in self.initial_guess],
        }

    @classmethod
    def from_json(cls, doc) -> "DistanceGeometryProblem":
        if isinstance(doc, str):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed problem JSON: {exc}") from None
        try:
            return cls(
                anchors=doc["anchors"],
                n_sensors=int(doc["n_sensors"]),
                edges=tuple(Edge(e["u"], e["v"], float(e["d"])) for e in doc["edges"]),
                initial_guess=doc["initial_guess"],
                anchor_labels=tuple(doc.get("anchor_labels", ())),
                sensor_labels=tuple(doc.get("sensor_labels", ())),
                name=doc.get("name", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid distance-geometry problem: {exc}") from None


def _endpoint(p: DistanceGeometryProblem, sensors: np.ndarray, ref: str):
    kind, i = _parse_ref(ref)
    return (p.anchors[i], None) if kind == "anchor" else (sensors[i], i)


def _edge_index(p: DistanceGeometryProblem):
    """Row indices of edge endpoints in the stacked (sensors, anchors) array."""
    cached = p.__dict__.get("_edge_index")
    if cached is None:

        def row(ref):
            kind, i = _parse_ref(ref)
            return i if kind == "sensor" else p.n_sensors + i

        iu = np.array([row(e.u) for e in p.edges], dtype=int)
        iv = np.array([row(e.v) for e in p.edges], dtype=int)
        d2 = np.array([e.d * e.d for e in p.edges])
        cached = (iu, iv, d2)
        p.__dict__["_edge_index"] = cached
    return cached


def dg_objective(p: DistanceGeometryProblem, x) -> tuple[float, np.ndarray]:
    """Sum over edges of 0.5 * (|u - v|^2 - d^2)^2 and its gradient in the sensor coordinates."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dimension,):
        raise ValueError(f"expected {p.dimension} sensor coordinates, got shape {x.shape}")
    iu, iv, d2 = _edge_index(p)
    pts = np.concatenate([x.reshape(p.n_sensors, 3), p.anchors])
    diff = pts[iu] - pts[iv]
    r = np.einsum("ij,ij->i", diff, diff) - d2
    value = 0.5 * float(r @ r)
    # d/du of 0.5 r^2 is 2 r (u - v); anchor rows are dropped afterwards
    contrib = 2.0 * r[:, None] * diff
    grad = np.zeros_like(pts)
    np.add.at(grad, iu, contrib)
    np.add.at(grad, iv, -contrib)
    return value, grad[: p.n_sensors].ravel()


def dg_value(p: DistanceGeometryProblem, x) -> float:
    """Objective value only; same sum as :func:`dg_objective`."""
    iu, iv, d2 = _edge_index(p)
    pts = np.concatenate([np.asarray(x, dtype=float).reshape(p.n_sensors, 3), p.anchors])
    diff = pts[iu] - pts[iv]
    r = np.einsum("ij,ij->i", diff, diff) - d2
    return 0.5 * float(r @ r)


def dg_handle(p: DistanceGeometryProblem) -> ObjectiveHandle:
    return ObjectiveHandle(
        lambda x: dg_objective(p, x),
        p.dimension,
        name=p.name or "distance-geometry",
        value_fn=lambda x: dg_value(p, x),
    )


def edge_distances(p: DistanceGeometryProblem, x) -> np.ndarray:
    sensors = np.asarray(x, dtype=float).reshape(p.n_sensors, 3)
    return np.array(
        [np.linalg.norm(_endpoint(p, sensors, e.u)[0] - _endpoint(p, sensors, e.v)[0]) for e in p.edges]
    )


@dataclass(frozen=True)
class Infeasibility:
    sensor: str
    anchors: tuple[str, str]
    anchor_gap: float
    reach: float  # sum of the two target distances

    @property
    def margin(self) -> float:
        """Positive when the anchors are too far apart for both contacts."""
        return self.anchor_gap - self.reach

    @property
    def infeasible(self) -> bool:
        return self.margin > 0

    def to_json(self) -> dict:
        return {
            "sensor": self.sensor,
            "anchors": list(self.anchors),
            "anchor_gap": self.anchor_gap,
            "reach": self.reach,
            "margin": self.margin,
            "infeasible": self.infeasible,
        }


def infeasibility_margins(p: DistanceGeometryProblem) -> list[Infeasibility]:
    """Triangle-inequality check for every sensor tied to two anchors."""
    out = []
    for s in range(p.n_sensors):
        ref = f"s{s}"
        tied = []
        for e in p.edges:
            if ref in (e.u, e.v):
                other = e.v if e.u == ref else e.u
                if other[0] == "a":
                    tied.append((other, e.d))
        for i in range(len(tied)):
            for j in range(i + 1, len(tied)):
                (ra, da), (rb, db) = tied[i], tied[j]
                gap = float(np.linalg.norm(p.anchors[int(ra[1:])] - p.anchors[int(rb[1:])]))
                out.append(Infeasibility(p.sensor_labels[s], (p.label(ra), p.label(rb)), gap, da + db))
    return out


def dg_search_box(p: DistanceGeometryProblem, pad: float | None = None):
    """Anchor bounding box padded by twice the largest target distance, per sensor."""
    pad = 2.0 * max(e.d for e in p.edges) if pad is None else pad
    lo = p.anchors.min(axis=0) - pad
    hi = p.anchors.max(axis=0) + pad
    return np.tile(lo, p.n_sensors), np.tile(hi, p.n_sensors)


# Per-model data: anchor CB coordinates, sensor CB start positions, contact edges.
_MODELS = {
    1: dict(
        anchors=[(-16.359, 9.934, -3.526), (-9.726, 8.530, -3.613)],
        anchor_labels=("B6.ALA.CB", "B4.ALA.CB"),
        sensor_labels=("H3.ALA.CB", "H5.ALA.CB"),
        edges=(("s0", "a0"), ("s1", "a1"), ("s0", "a1")),
        initial=(-12.928, 12.454, 3.034, -6.635, 14.301, 2.628),
    ),
    2: dict(
        anchors=[(-8.655, 8.153, 1.770), (-2.257, 6.095, 3.078)],
        anchor_labels=("A3.ALA.CB", "A5.ALA.CB"),
        sensor_labels=("G4.ALA.CB", "G2.ALA.CB"),
        edges=(("s0", "a0"), ("s1", "a0"), ("s1", "a1")),
        initial=(-13.909, 12.227, -0.889, -7.439, 14.419, -2.033),
    ),
    3: dict(
        anchors=[(-15.632, 9.694, 0.687), (-8.655, 8.153, 1.770)],
        anchor_labels=("A1.ALA.CB", "A3.ALA.CB"),
        sensor_labels=("G4.ALA.CB", "G2.ALA.CB"),
        edges=(("s0", "a0"), ("s0", "a1"), ("s1", "a1")),
        # printed identically to model 2's start point; used as printed
        initial=(-13.909, 12.227, -0.889, -7.439, 14.419, -2.033),
    ),
}

PUBLISHED_OPTIMA = {
    1: np.array([-13.062, 9.126, -3.336, -12.344, 6.695, -2.457]),
    2: np.array([-11.275, 6.606, 3.288, -5.461, 7.124, 2.424]),
    3: np.array([-12.149, 8.924, 1.229, -9.256, 11.007, 3.517]),
}


def model_problem(model: int, d: float = CONTACT_DISTANCE) -> DistanceGeometryProblem:
    """Built-in six-variable contact problem for model 1, 2 or 3."""
    if model not in _MODELS:
        raise ValueError(f"model must be 1, 2 or 3, got {model!r}")
    m = _MODELS[model]
    return DistanceGeometryProblem(
        anchors=np.array(m["anchors"]),
        n_sensors=2,
        edges=tuple(Edge(u, v, d) for u, v in m["edges"]),
        initial_guess=np.array(m["initial"]),
        anchor_labels=m["anchor_labels"],
        sensor_labels=m["sensor_labels"],
        name=f"model-{model}",
    )


# ---------------------------------------------------------------------------
# Axis fitting


@dataclass(frozen=True, eq=False)
class AxisFitProblem:
    points: np.ndarray
    name: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if len(pts) < 2:
            raise ValueError("axis fitting needs at least two points")
        if not np.any(pts):
            raise ValueError("all points lie at the origin")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


def axis_objective(p: AxisFitProblem, w) -> tuple[float, np.ndarray]:
    """Sum of squared perpendicular distances from the points to the line through
    the origin along ``w``, with its gradient in ``w``.

    Zero-length points contribute nothing (their perpendicular distance is 0).
    """
    w = np.asarray(w, dtype=float)
    ww = float(w @ w)
    if not ww > 0:
        raise DomainError("axis direction w must be nonzero")
    a = p.points
    aa = np.einsum("ij,ij->i", a, a)
    aw = a @ w
    value = float(np.sum(aa - aw * aw / ww))
    grad = -2.0 * (a.T @ aw) / ww + 2.0 * float(aw @ aw) / (ww * ww) * w
    return value, grad


def axis_handle(p: AxisFitProblem) -> ObjectiveHandle:
    return ObjectiveHandle(lambda w: axis_objective(p, w), 3, name=p.name or "axis-fit")


_STRANDS = {
    "A": [
        (-16.196, 8.315, 1.061),
        (-12.977, 6.460, 1.908),
        (-9.178, 6.745, 1.448),
        (-6.455, 4.112, 1.558),
        (-3.006, 5.750, 1.782),
        (-1.226, 2.750, 0.233),
    ],
    "B": [
        (-0.959, 2.950, -4.817),
        (-3.465, 4.999, -2.846),
        (-7.213, 4.412, -3.340),
        (-9.954, 7.078, -3.168),
        (-13.660, 6.241, -3.137),
        (-16.702, 8.507, -3.074),
    ],
}

PUBLISHED_AXES = {
    "A": np.array([-10.751, 6.428, 1.411]),
    "B": np.array([-7.960, 4.579, -2.256]),
}


def strand_axis_data(strand: str) -> AxisFitProblem:
    """CA coordinates of model 1's strand A or B."""
    if strand not in _STRANDS:
        raise ValueError(f"strand must be 'A' or 'B', got {strand!r}")
    return AxisFitProblem(np.array(_STRANDS[strand]), name=f"strand-{strand}")


def inertia_matrix(p: AxisFitProblem) -> np.ndarray:
    """Inertial tensor of unit point masses about the origin."""
    a = p.points
    s = a.T @ a
    return np.trace(s) * np.eye(3) - s


def _sign_fix(v):
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


def _null_vector(b: np.ndarray) -> np.ndarray:
    """Unit vector best annihilated by the (near-singular) 3x3 matrix ``b``."""
    rows = b
    candidates = [np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]), np.cross(rows[1], rows[2])]
    norms = [np.linalg.norm(c) for c in candidates]
    k = int(np.argmax(norms))
    if norms[k] > 1e-10 * max(1.0, np.abs(b).max()) ** 2:
        return candidates[k] / norms[k]
    # rank <= 1: any vector orthogonal to the dominant row
    r = rows[int(np.argmax(np.linalg.norm(rows, axis=1)))]
    if np.linalg.norm(r) == 0:
        return np.array([1.0, 0.0, 0.0])
    e = np.eye(3)[int(np.argmin(np.abs(r)))]
    v = np.cross(r, e)
    return v / np.linalg.norm(v)


def smallest_eigenpair(m, refine_steps: int = 3) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and unit eigenvector of a symmetric 3x3 matrix.

    Eigenvalues come from the trigonometric solution of the characteristic
    cubic; the eigenvector from cross products of rows of (M - lambda I),
    polished by shifted inverse iteration. The sign is fixed so the first
    nonzero component is positive.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    scale = max(np.abs(m).max(), 1e-300)
    if np.abs(m - m.T).max() > 1e-9 * max(1.0, scale):
        raise ValueError("matrix is not symmetric")
    m = 0.5 * (m + m.T)
    ms = m / scale  # unit scale keeps the cubic's terms in range

    q = np.trace(ms) / 3.0
    off = ms[0, 1] ** 2 + ms[0, 2] ** 2 + ms[1, 2] ** 2
    p2 = (ms[0, 0] - q) ** 2 + (ms[1, 1] - q) ** 2 + (ms[2, 2] - q) ** 2 + 2.0 * off
    if p2 <= 1e-30:
        return float(q * scale), np.array([1.0, 0.0, 0.0])
    p = math.sqrt(p2 / 6.0)
    b = (ms - q * np.eye(3)) / p
    r = float(np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0))
    phi = math.acos(r) / 3.0
    lam = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)  # smallest root

    v = _null_vector(ms - lam * np.eye(3))
    # shifted inverse iteration; the shift sits just below lambda
    shift = lam - 1e-8
    for _ in range(refine_steps):
        try:
            w = np.linalg.solve(ms - shift * np.eye(3), v)
        except np.linalg.LinAlgError:
            break
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            break
        v = w / nw
    lam = float(v @ m @ v)
    return lam, _sign_fix(v)
