"""Thread Ala/Gly target sequences onto a template backbone."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AddressError, StructureError
from .structure import Atom, Chain, Residue, Structure

__all__ = [
    "TargetSequence",
    "BACKBONE",
    "CB_BOND",
    "CB_ANGLE",
    "ideal_cb",
    "select_window",
    "thread_sequence",
    "backbone_hbonds",
    "HBondReport",
    "preserved_hbond_check",
]

BACKBONE = ("N", "CA", "C", "O")
CB_BOND = 1.536  # CA-CB length seen in the model contact data
CB_ANGLE = 110.5  # degrees, for both N-CA-CB and C-CA-CB
HBOND_CUTOFF = 3.5

_ONE_TO_THREE = {"A": "ALA", "G": "GLY"}


@dataclass(frozen=True)
class TargetSequence:
    residues: str
    name: str = ""

    def __post_init__(self):
        seq = self.residues.strip().upper()
        if not seq:
            raise ValueError("target sequence is empty")
        bad = sorted(set(seq) - set(_ONE_TO_THREE))
        if bad:
            raise ValueError(f"target sequence may contain only A and G, got {bad}")
        object.__setattr__(self, "residues", seq)

    def __len__(self):
        return len(self.residues)

    def three_letter(self) -> list[str]:
        return [_ONE_TO_THREE[c] for c in self.residues]


def ideal_cb(n, ca, c, bond: float = CB_BOND, angle: float = CB_ANGLE) -> np.ndarray:
    """CB on the L branch making equal angles with CA-N and CA-C."""
    n, ca, c = (np.asarray(v, dtype=float) for v in (n, ca, c))
    ln, lc = np.linalg.norm(n - ca), np.linalg.norm(c - ca)
    if ln == 0 or lc == 0:
        raise StructureError("degenerate backbone geometry: coincident backbone atoms")
    u = (n - ca) / ln
    v = (c - ca) / lc
    cos_t = math.cos(math.radians(angle))
    # b = alpha (u + v) + gamma (u x v), with b.u = b.v = cos_t and |b| = 1
    uv = float(u @ v)
    if 1.0 + uv < 1e-9:
        raise StructureError("degenerate backbone geometry: cannot place CB")
    alpha = cos_t / (1.0 + uv)
    w = np.cross(u, v)
    w_norm2 = float(w @ w)
    in_plane = alpha * alpha * (2.0 + 2.0 * uv)
    if w_norm2 < 1e-12 or in_plane >= 1.0:
        raise StructureError("degenerate backbone geometry: cannot place CB")
    gamma = math.sqrt((1.0 - in_plane) / w_norm2)
    # L-amino acids: CB lies on the side where (CA-N) x (C-CA) . (CB-CA) < 0
    # and u x v = (N-CA) x (C-CA) = -((CA-N) x (C-CA)), so gamma > 0.
    b = alpha * (u + v) + gamma * w
    return ca + bond * b


def select_window(chain: Chain, first: int, last: int, renumber_from: int | None = 1) -> Chain:
    """Residues ``first..last`` (inclusive) of ``chain``, optionally renumbered."""
    picked = [r for r in chain.residues if first <= r.seq <= last]
    if not picked:
        raise AddressError(f"chain {chain.id} has no residues in window {first}..{last}")
    if renumber_from is not None:
        picked = [replace(r, seq=renumber_from + i) for i, r in enumerate(picked)]
    return replace(chain, residues=tuple(picked))


def thread_sequence(chain: Chain, target: TargetSequence | str) -> Chain:
    """Mutate every residue of ``chain`` to the matching Ala/Gly of ``target``.

    Backbone atoms keep their coordinates. Ala keeps a template CB when one
    exists and otherwise gets an ideal one; everything beyond CB is removed.
    """
    if isinstance(target, str):
        target = TargetSequence(target)
    if len(chain.residues) != len(target):
        raise ValueError(
            f"chain {chain.id} has {len(chain.residues)} residues, target has {len(target)}"
        )
    out = []
    for res, new_name in zip(chain.residues, target.three_letter()):
        missing = [n for n in BACKBONE if not res.has_atom(n)]
        if missing:
            raise StructureError(
                f"chain {chain.id} residue {res.name}{res.seq} lacks backbone atoms {missing}"
            )
        atoms = [res.atom(n) for n in BACKBONE]
        if new_name == "ALA":
            if res.has_atom("CB"):
                atoms.append(res.atom("CB"))
            else:
                ca = res.atom("CA")
                cb = ideal_cb(res.atom("N").xyz, ca.xyz, res.atom("C").xyz)
                atoms.append(
                    Atom(
                        serial=ca.serial,
                        name="CB",
                        element="C",
                        position=tuple(cb),
                        occupancy=ca.occupancy,
                        b_factor=ca.b_factor,
                    )
                )
        out.append(Residue(new_name, res.seq, tuple(atoms)))
    return replace(chain, residues=tuple(out))


# ---------------------------------------------------------------------------
# Backbone hydrogen bonds


def backbone_hbonds(s: Structure, cutoff: float = HBOND_CUTOFF, min_separation: int = 3):
    """Backbone N...O pairs closer than ``cutoff``.

    Returns a sorted list of ``((chain_n, seq_n), (chain_o, seq_o), distance)``.
    Same-chain pairs closer than ``min_separation`` in sequence are skipped.
    """
    donors, acceptors = [], []
    for chain in s.chains:
        for res in chain.residues:
            if res.has_atom("N"):
                donors.append(((chain.id, res.seq), res.atom("N").xyz))
            if res.has_atom("O"):
                acceptors.append(((chain.id, res.seq), res.atom("O").xyz))
    if not donors or not acceptors or cutoff <= 0:
        return []
    dpos = np.array([p for _, p in donors])
    apos = np.array([p for _, p in acceptors])
    dist = np.linalg.norm(dpos[:, None, :] - apos[None, :, :], axis=2)
    bonds = []
    for i, j in zip(*np.nonzero(dist <= cutoff)):
        dk, ak = donors[i][0], acceptors[j][0]
        if dk[0] == ak[0] and abs(dk[1] - ak[1]) < min_separation:
            continue
        bonds.append((dk, ak, float(dist[i, j])))
    bonds.sort(key=lambda b: (b[0], b[1]))
    return bonds


@dataclass(frozen=True)
class HBondReport:
    before: list
    after: list
    retained: list
    cutoff: float

    @property
    def retained_fraction(self) -> float:
        # nothing to lose counts as fully retained
        return len(self.retained) / len(self.before) if self.before else 1.0


def preserved_hbond_check(before: Structure, after: Structure, cutoff: float = HBOND_CUTOFF) -> HBondReport:
    b = backbone_hbonds(before, cutoff)
    a = backbone_hbonds(after, cutoff)
    after_keys = {(d, o) for d, o, _ in a}
    retained = [x for x in b if (x[0], x[1]) in after_keys]
    return HBondReport(before=b, after=a, retained=retained, cutoff=cutoff)
