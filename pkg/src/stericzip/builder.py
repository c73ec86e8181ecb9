"""End-to-end fibril pipeline: thread a template, pose the second sheet, assemble, analyze.

Sheet 1 (chains A and B) is threaded in place and never moves.
Selected CB atoms of sheet 2 (G and H) are treated as free sensors and
pulled to contact distance from fixed sheet-1 anchors by a distance-geometry
solve. The emitted G and H chains are always a rigid image of sheet 1:
either the shipped optimized transform or one re-derived from the solved
sensor positions. Per-atom displacements are never written out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AddressError, ParseError, StructureError
from .fetch import fetch_template
from .mutator import TargetSequence, preserved_hbond_check, select_window, thread_sequence
from .optimizers import OPTIMIZERS, OptimizationResult, OptimizerConfig, run_optimizer, steepest_descent
from .problems import (
    CONTACT_DISTANCE,
    AxisFitProblem,
    DistanceGeometryProblem,
    Edge,
    axis_handle,
    axis_objective,
    dg_handle,
    dg_objective,
    dg_search_box,
    edge_distances,
    infeasibility_margins,
    inertia_matrix,
    smallest_eigenpair,
)
from .structure import Structure, parse_address, read_pdb, select_atom
from .transforms import (
    SHEET_FLIP,
    AffineTransform,
    apply,
    derive_sheet_translation,
    optimized_sheet_transform,
    stack_transform,
    template_sheet_transform,
)

__all__ = [
    "BuildRecipe",
    "ContactReport",
    "BuildOutput",
    "StrandAxis",
    "MODEL_SEQUENCES",
    "BUNDLED_TEMPLATE",
    "load_template",
    "build_model",
    "assemble_fibril",
    "strand_axes",
    "find_clashes",
]

RECIPE_SCHEMA = "stericzip.recipe/1"
REPORT_SCHEMA = "stericzip.contact-report/1"
BUNDLED_TEMPLATE = "gyvlgs_12chain.pdb"
CLASH_DISTANCE = 2.2
TRANSFORM_MODES = ("shipped", "derived")

# Ala/Gly threading of the six-residue GYVLGS window, one per model.
MODEL_SEQUENCES = {1: "AGAAAA", 2: "GAAAAG", 3: "AAAAGA"}

_MODEL_CONTACTS = {
    1: (("H3.CB", "H5.CB"), ("B6.CB", "B4.CB"), (("s0", "a0"), ("s1", "a1"), ("s0", "a1"))),
    2: (("G4.CB", "G2.CB"), ("A3.CB", "A5.CB"), (("s0", "a0"), ("s1", "a0"), ("s1", "a1"))),
    3: (("G4.CB", "G2.CB"), ("A1.CB", "A3.CB"), (("s0", "a0"), ("s0", "a1"), ("s1", "a1"))),
}

# stacked copies: new chain -> (source chain, stack direction)
_STACKS = {
    "C": ("A", "up"),
    "D": ("B", "up"),
    "E": ("A", "down"),
    "F": ("B", "down"),
    "I": ("G", "down"),
    "J": ("H", "down"),
    "K": ("G", "up"),
    "L": ("H", "up"),
}
FIBRIL_CHAINS = tuple("ABCDEFGHIJKL")


@dataclass(frozen=True)
class BuildRecipe:
    """Everything a build needs besides the template bytes.

    ``config`` holds dotted optimizer overrides (``{"saec.generations": 200}``);
    ``seed`` is the optimizer RNG seed.
    """

    sequence: str
    sensors: tuple[str, ...]
    anchors: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    window: tuple[int, int] = (127, 132)
    template: str | None = None
    fetch_id: str | None = None
    model: int | None = None
    contact_distance: float = CONTACT_DISTANCE
    optimizer: str = "saec"
    seed: int = 0
    config: dict = field(default_factory=dict)
    transform: str = "shipped"

    def __post_init__(self):
        for name in ("sensors", "anchors", "window"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "config", dict(self.config))
        if not self.contact_distance > 0:
            raise ValueError("contact distance must be positive")
        if self.template and self.fetch_id:
            raise ValueError("give a template path or a fetch id, not both")
        if self.transform not in TRANSFORM_MODES:
            raise ValueError(f"transform must be one of {TRANSFORM_MODES}, got {self.transform!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; choose from {', '.join(OPTIMIZERS)}")
        first, last = self.window
        if last < first:
            raise ValueError(f"empty residue window {first}..{last}")
        if len(self.sequence) != last - first + 1:
            raise ValueError(
                f"sequence {self.sequence!r} has {len(self.sequence)} residues, window {first}..{last} has {last - first + 1}"
            )
        TargetSequence(self.sequence)
        if not self.sensors or not self.anchors:
            raise ValueError("a recipe needs at least one sensor and one anchor")
        for addr in self.sensors + self.anchors:
            parse_address(addr)
        # edge refs are checked again by the problem; this gives an earlier message
        for u, v in self.edges:
            Edge(u, v, self.contact_distance)
        self.optimizer_config()

    @classmethod
    def for_model(cls, model: int, **overrides) -> "BuildRecipe":
        """Default recipe for built-in model 1, 2 or 3."""
        if model not in MODEL_SEQUENCES:
            raise ValueError(f"model must be 1, 2 or 3, got {model!r}")
        sensors, anchors, edges = _MODEL_CONTACTS[model]
        base = dict(model=model, sequence=MODEL_SEQUENCES[model], sensors=sensors, anchors=anchors, edges=edges)
        base.update(overrides)
        return cls(**base)

    def optimizer_config(self) -> OptimizerConfig:
        try:
            return OptimizerConfig(rng_seed=self.seed).updated(**self.config)
        except TypeError as exc:
            raise ValueError(f"bad optimizer config: {exc}") from None

    def to_json(self) -> dict:
        return {
            "schema": RECIPE_SCHEMA,
            "model": self.model,
            "template": self.template,
            "fetch_id": self.fetch_id,
            "window": list(self.window),
            "sequence": self.sequence,
            "sensors": list(self.sensors),
            "anchors": list(self.anchors),
            "edges": [list(e) for e in self.edges],
            "contact_distance": self.contact_distance,
            "optimizer": self.optimizer,
            "seed": self.seed,
            "config": dict(self.config),
            "transform": self.transform,
        }

    @classmethod
    def from_json(cls, doc) -> "BuildRecipe":
        """Recipe from a JSON document. A ``model`` key fills unspecified fields."""
        if isinstance(doc, (str, bytes)):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed recipe JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError("recipe must be a JSON object")
        doc = {k: v for k, v in doc.items() if k != "schema" and v is not None}
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ParseError(f"unknown recipe keys: {', '.join(sorted(unknown))}")
        try:
            if "model" in doc:
                return cls.for_model(int(doc.pop("model")), **doc)
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"invalid recipe: {exc}") from None


@dataclass(frozen=True)
class EdgeContact:
    u: str
    v: str
    initial: float
    optimized: float
    emitted: float
    target: float

    @property
    def deviation(self) -> float:
        return self.optimized - self.target

    def to_json(self) -> dict:
        return {
            "u": self.u,
            "v": self.v,
            "target": self.target,
            "initial_distance": self.initial,
            "distance": self.optimized,
            "deviation": self.deviation,
            "emitted_distance": self.emitted,
            "emitted_deviation": self.emitted - self.target,
        }


@dataclass(frozen=True)
class ContactReport:
    """Designated contacts before and after the solve, plus structural checks.

    ``distance`` per edge is measured between the solved sensor positions;
    ``emitted_distance`` is measured in the rigid-transform model actually
    written out.
    """

    model: int | None
    sequence: str
    edges: tuple[EdgeContact, ...]
    objective_initial: float
    objective_final: float
    infeasibility: tuple
    hbond_counts: dict
    hbonds_retained_fraction: float
    clashes: tuple
    transform_mode: str
    translation: np.ndarray
    derived_translation: np.ndarray
    derived_spread: np.ndarray
    sheet2_source: str
    optimizer: dict

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "model": self.model,
            "sequence": self.sequence,
            "contacts": [e.to_json() for e in self.edges],
            "objective_initial": self.objective_initial,
            "objective_final": self.objective_final,
            "infeasibility": [i.to_json() for i in self.infeasibility],
            "hbond_counts": dict(self.hbond_counts),
            "hbonds_retained_fraction": self.hbonds_retained_fraction,
            "clash_cutoff": CLASH_DISTANCE,
            "clashes": [
                {"a": a, "b": b, "distance": d} for a, b, d in self.clashes
            ],
            "transform": {
                "mode": self.transform_mode,
                "rotation": [list(map(float, row)) for row in SHEET_FLIP],
                "translation": [float(v) for v in self.translation],
                "derived_translation": [float(v) for v in self.derived_translation],
                "derived_pair_spread": [float(v) for v in self.derived_spread],
                "shipped_minus_derived": [
                    float(v) for v in np.asarray(optimized_sheet_transform().translation) - self.derived_translation
                ],
            },
            "sheet2_source": self.sheet2_source,
            "optimizer": self.optimizer,
        }

    def summary_text(self) -> str:
        lines = [f"model {self.model if self.model is not None else '-'} ({self.sequence})"]
        for e in self.edges:
            lines.append(
                f"  {e.u:>10} - {e.v:<10} initial {e.initial:7.3f}  solved {e.optimized:7.3f}  emitted {e.emitted:7.3f}"
            )
        lines.append(f"  objective {self.objective_initial:.6g} -> {self.objective_final:.6g}")
        for inf in self.infeasibility:
            if inf.infeasible:
                lines.append(
                    f"  infeasible: {inf.sensor} cannot reach {inf.anchors[0]} and {inf.anchors[1]} "
                    f"(gap {inf.anchor_gap:.3f} > {inf.reach:.3f})"
                )
        lines.append(f"  backbone H-bonds {sum(self.hbond_counts.values())}, steric clashes {len(self.clashes)}")
        return "\n".join(lines) + "\n"


class BuildOutput(NamedTuple):
    core: Structure
    report: ContactReport
    result: OptimizationResult


def load_template(recipe: BuildRecipe | None = None, cache=None) -> Structure:
    """Template named by the recipe: a file, a fetched id, or the bundled copy."""
    if recipe is not None and recipe.template:
        return read_pdb(recipe.template)
    if recipe is not None and recipe.fetch_id:
        return read_pdb(fetch_template(recipe.fetch_id, cache=cache))
    ref = resources.files("stericzip") / "data" / BUNDLED_TEMPLATE
    with resources.as_file(ref) as path:
        return read_pdb(Path(path))


def _thread(template: Structure, ids, recipe: BuildRecipe) -> list:
    first, last = recipe.window
    out = []
    for cid in ids:
        chain = select_window(template.chain(cid), first, last)
        out.append(thread_sequence(chain, recipe.sequence))
    return out


def _resolve(s: Structure, addresses, allowed, role) -> np.ndarray:
    pts = []
    for addr in addresses:
        chain, seq, name = parse_address(addr)
        if chain not in allowed:
            raise AddressError(f"{role} {addr} must lie on chain {' or '.join(allowed)}")
        pts.append(select_atom(s, chain, seq, name))
    return np.array(pts).reshape(-1, 3)


def _full_label(s: Structure, addr: str) -> str:
    """``B6.CB`` -> ``B6.ALA.CB`` using the residue name in ``s``."""
    chain, seq, name = parse_address(addr)
    for res in s.chain(chain).residues:
        if res.seq == seq:
            return f"{chain}{seq}.{res.name}.{name}"
    return addr


def _hbond_counts(bonds) -> dict:
    counts: dict[str, int] = {}
    for (cd, _), (ca, _), _ in bonds:
        if cd != ca:
            key = "-".join(sorted((cd, ca)))
            counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def find_clashes(s: Structure, cutoff: float = CLASH_DISTANCE):
    """Inter-chain atom pairs closer than ``cutoff``.

    Returns ``(address, address, distance)`` triples sorted by distance.
    Intra-chain pairs are skipped: without bond topology they cannot be told
    apart from bonded neighbours.
    """
    labels, chain_of, xyz = [], [], []
    for chain in s.chains:
        for res in chain.residues:
            for atom in res.atoms:
                labels.append(f"{chain.id}{res.seq}.{res.name}.{atom.name}")
                chain_of.append(chain.id)
                xyz.append(atom.position)
    if len(xyz) < 2:
        return []
    xyz = np.array(xyz)
    chain_of = np.array(chain_of)
    out = []
    for i in range(len(xyz) - 1):
        d = np.linalg.norm(xyz[i + 1 :] - xyz[i], axis=1)
        for k in np.flatnonzero((d < cutoff) & (chain_of[i + 1 :] != chain_of[i])):
            out.append((labels[i], labels[i + 1 + k], float(d[k])))
    out.sort(key=lambda c: (c[2], c[0], c[1]))
    return out


def assemble_fibril(core: Structure) -> Structure:
    """Twelve-chain fibril from the posed core.

    C, D = A, B shifted +9.59 along z; E, F shifted -9.59; K, L = G, H
    shifted +9.59 and I, J shifted -9.59.
    """
    missing = [c for c in "ABGH" if c not in core.chain_ids]
    if missing:
        raise StructureError(f"core structure lacks chains {', '.join(missing)}")
    chains = {c: core.chain(c) for c in "ABGH"}
    for new, (src, direction) in _STACKS.items():
        moved = apply(stack_transform(direction), Structure((chains[src],)), {src: new})
        chains[new] = moved.chains[0]
    return Structure(tuple(chains[c] for c in FIBRIL_CHAINS), title=core.title).renumbered()


def build_model(recipe: BuildRecipe, template: Structure | None = None, cache=None) -> BuildOutput:
    """Thread, solve the contact problem, pose sheet 2 and report.

    Returns ``(core, report, result)``; ``core`` holds chains A, B, G, H.
    """
    if template is None:
        template = load_template(recipe, cache=cache)
    first, last = recipe.window
    window = {c: select_window(template.chain(c), first, last) for c in "ABGH" if c in template.chain_ids}
    for c in "AB":
        if c not in window:
            raise AddressError(f"template has no chain {c}")
    plain1 = Structure((window["A"], window["B"]))
    sheet1 = Structure(tuple(thread_sequence(window[c], recipe.sequence) for c in "AB"))
    rename = {"A": "G", "B": "H"}

    # starting sheet 2: the template's own G/H when present, else the template flip
    if "G" in window and "H" in window:
        start2 = Structure(tuple(thread_sequence(window[c], recipe.sequence) for c in "GH"))
        sheet2_source = "template"
    else:
        start2 = apply(template_sheet_transform(), sheet1, rename)
        sheet2_source = "template-transform"

    anchors = _resolve(sheet1, recipe.anchors, "AB", "anchor")
    sensors0 = _resolve(start2, recipe.sensors, "GH", "sensor")
    problem = DistanceGeometryProblem(
        anchors=anchors,
        n_sensors=len(recipe.sensors),
        edges=tuple(Edge(u, v, recipe.contact_distance) for u, v in recipe.edges),
        initial_guess=sensors0.ravel(),
        anchor_labels=tuple(_full_label(sheet1, a) for a in recipe.anchors),
        sensor_labels=tuple(_full_label(start2, s) for s in recipe.sensors),
        name=f"model-{recipe.model}" if recipe.model else "recipe",
    )
    cfg = recipe.optimizer_config()
    result = run_optimizer(recipe.optimizer, dg_handle(problem), problem.initial_guess, cfg, bounds=dg_search_box(problem))
    solved = result.x_best.reshape(-1, 3)

    # each solved sensor implies a translation for the flipped sheet
    sources = []
    for addr in recipe.sensors:
        chain, seq, name = parse_address(addr)
        sources.append(select_atom(sheet1, {"G": "A", "H": "B"}[chain], seq, name))
    derived = derive_sheet_translation(list(zip(sources, solved)))
    if recipe.transform == "derived":
        tf = AffineTransform(SHEET_FLIP, derived.translation)
    else:
        tf = optimized_sheet_transform()
    sheet2 = apply(tf, sheet1, rename)
    core = Structure(sheet1.chains + sheet2.chains)

    emitted_sensors = _resolve(sheet2, recipe.sensors, "GH", "sensor").ravel()
    d_init = edge_distances(problem, problem.initial_guess)
    d_opt = edge_distances(problem, result.x_best)
    d_emit = edge_distances(problem, emitted_sensors)
    edges = tuple(
        EdgeContact(problem.label(e.u), problem.label(e.v), float(a), float(b), float(c), e.d)
        for e, a, b, c in zip(problem.edges, d_init, d_opt, d_emit)
    )

    fibril = assemble_fibril(core)
    # same placement, template side chains: isolates the effect of mutation
    before = assemble_fibril(Structure(plain1.chains + apply(tf, plain1, rename).chains))
    hb = preserved_hbond_check(before, fibril)
    report = ContactReport(
        model=recipe.model,
        sequence=recipe.sequence,
        edges=edges,
        objective_initial=dg_objective(problem, problem.initial_guess)[0],
        objective_final=result.f_best,
        infeasibility=tuple(infeasibility_margins(problem)),
        hbond_counts=_hbond_counts(hb.after),
        hbonds_retained_fraction=hb.retained_fraction,
        clashes=tuple(find_clashes(fibril)),
        transform_mode=recipe.transform,
        translation=np.array(tf.translation),
        derived_translation=np.array(derived.translation),
        derived_spread=derived.spread,
        sheet2_source=sheet2_source,
        optimizer=result.summary(),
    )
    return BuildOutput(core, report, result)


@dataclass(frozen=True)
class StrandAxis:
    chain: str
    n_points: int
    gradient_direction: np.ndarray
    gradient_objective: float
    eigen_direction: np.ndarray
    eigen_objective: float

    @property
    def cosine(self) -> float:
        """Direction cosine between the two routes (sign-insensitive lines)."""
        a, b = self.gradient_direction, self.eigen_direction
        return float(min(1.0, abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))))

    def to_json(self) -> dict:
        return {
            "chain": self.chain,
            "n_points": self.n_points,
            "gradient": {"direction": [float(v) for v in self.gradient_direction], "objective": self.gradient_objective},
            "eigen": {"direction": [float(v) for v in self.eigen_direction], "objective": self.eigen_objective},
            "cosine": self.cosine,
        }


def _unit_sign_fixed(v):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if nz.size and v[nz[0]] < 0 else v


def axis_routes(p: AxisFitProblem, chain: str = "", cfg: OptimizerConfig | None = None) -> StrandAxis:
    """Both solutions of the axis fit: descent from the centroid and the eigen route."""
    res = steepest_descent(axis_handle(p), p.centroid, cfg)
    lam, v = smallest_eigenpair(inertia_matrix(p))
    return StrandAxis(
        chain=chain,
        n_points=len(p.points),
        gradient_direction=_unit_sign_fixed(res.x_best),
        gradient_objective=res.f_best,
        eigen_direction=v,
        eigen_objective=axis_objective(p, v)[0],
    )


def strand_axes(s: Structure, chain_ids: Sequence[str], cfg: OptimizerConfig | None = None) -> dict:
    """Per-chain best-fit line through the origin of the CA atoms."""
    out = {}
    for cid in chain_ids:
        chain = s.chain(cid)
        ca = [r.atom("CA").xyz for r in chain.residues if r.has_atom("CA")]
        if len(ca) < 2:
            raise StructureError(f"chain {cid} has {len(ca)} CA atoms; axis fitting needs at least 2")
        out[cid] = axis_routes(AxisFitProblem(np.array(ca), name=f"chain-{cid}"), cid, cfg)
    return out
