"""Regenerate the bundled 12-chain GYVLGS template.

The public 3NHD entry is not redistributed. Instead the template is rebuilt
from the CA and CB coordinates that define the model 1-3 problems: backbone
N, C and O atoms are fitted around each CA so that an ideal CB placed on that
backbone reproduces every known CB, and side chains are added with fixed
torsions. Chains G and H are the sheet-flip images of A and B; the other eight
chains are +-9.59 A stacks.

    python tools/make_template.py            # writes both copies
    python tools/make_template.py --check    # verify the copies are current
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from stericzip.mutator import ideal_cb
from stericzip.problems import _MODELS, _STRANDS
from stericzip.structure import Atom, Chain, Residue, Structure, write_pdb
from stericzip.transforms import apply, stack_transform, template_sheet_transform

ROOT = Path(__file__).resolve().parents[1]
OUTPUTS = [ROOT / "src/stericzip/data/gyvlgs_12chain.pdb", ROOT / "tests/data/gyvlgs_12chain.pdb"]
SEQUENCE = ("GLY", "TYR", "VAL", "LEU", "GLY", "SER")
FIRST = 127

# ideal peptide geometry (bond lengths and 1-3 distances)
N_CA, CA_C, C_N, C_O = 1.458, 1.525, 1.329, 1.231
N_C, CA_N1, C_CA1, CA_O, O_N1 = 2.462, 2.425, 2.435, 2.401, 2.250


def known_cbs():
    """(chain, position) -> CB, from the anchors and the flipped sensors."""
    tf_inv = template_sheet_transform().inverse()
    out = {}
    for m in _MODELS.values():
        for label, xyz in zip(m["anchor_labels"], m["anchors"]):
            out[(label[0], int(label[1]))] = np.array(xyz)
        sensors = np.array(m["initial"]).reshape(2, 3)
        for label, xyz in zip(m["sensor_labels"], sensors):
            src = {"G": "A", "H": "B"}[label[0]]
            out[(src, int(label[1]))] = tf_inv(xyz)
    return out


def fit_backbone(ca, cbs):
    """N, C, O for each residue around fixed CAs."""
    n = len(ca)

    def unpack(v):
        v = v.reshape(n, 3, 3)
        return v[:, 0], v[:, 1], v[:, 2]

    def residuals(v, weight):
        N, C, O = unpack(v)
        dist = lambda a, b: np.linalg.norm(a - b, axis=-1)
        r = [
            dist(N, ca) - N_CA,
            dist(ca, C) - CA_C,
            dist(N, C) - N_C,
            dist(C, O) - C_O,
            dist(ca, O) - CA_O,
            dist(C[:-1], N[1:]) - C_N,
            dist(ca[:-1], N[1:]) - CA_N1,
            dist(C[:-1], ca[1:]) - C_CA1,
            dist(O[:-1], N[1:]) - O_N1,
        ]
        for i, cb in cbs.items():
            r.append(weight * (ideal_cb(N[i], ca[i], C[i]) - cb))
        # terminal carbonyl: keep O trans to N across the CA-C bond
        r.append([dist(O[-1:], N[-1:])[0] - 3.55])
        return np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)) for x in r])

    prev = np.vstack([2 * ca[0] - ca[1], ca[:-1]])
    nxt = np.vstack([ca[1:], 2 * ca[-1] - ca[-2]])
    # side-chain direction: known CB, else alternate across the strand
    side = np.array([cbs[i] - ca[i] if i in cbs else (-1) ** i * np.array([0.0, 1.0, 0.0]) for i in range(n)])
    side /= np.linalg.norm(side, axis=1)[:, None]
    guess = np.stack(
        [ca + 0.38 * (prev - ca) - 1.0 * side, ca + 0.40 * (nxt - ca) - 1.0 * side, ca + 0.7 * (nxt - ca) - 1.2 * side],
        axis=1,
    )
    # loose CB weight to find the basin, then pin CBs tightly
    x = guess.ravel()
    for weight in (3.0, 100.0):
        sol = least_squares(residuals, x, args=(weight,), xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20000)
        x = sol.x
    return unpack(x), float(np.max(np.abs(sol.fun)))


def place(a, b, c, bond, angle, torsion):
    """Atom d with |cd| = bond, angle bcd and dihedral abcd (degrees)."""
    bc = (c - b) / np.linalg.norm(c - b)
    nrm = np.cross(b - a, bc)
    nrm /= np.linalg.norm(nrm)
    m = np.column_stack([bc, np.cross(nrm, bc), nrm])
    th, ph = math.radians(angle), math.radians(torsion)
    d2 = np.array([-bond * math.cos(th), bond * math.sin(th) * math.cos(ph), bond * math.sin(th) * math.sin(ph)])
    return c + m @ d2


def side_chain(res, N, CA, CB):
    if res == "TYR":
        cg = place(N, CA, CB, 1.51, 113.8, -60)
        cd1 = place(CA, CB, cg, 1.39, 120.8, 90)
        cd2 = place(CA, CB, cg, 1.39, 120.8, -90)
        ce1 = place(CB, cg, cd1, 1.39, 120.0, 180)
        ce2 = place(CB, cg, cd2, 1.39, 120.0, 180)
        cz = place(cg, cd1, ce1, 1.39, 120.0, 0)
        oh = place(cd1, ce1, cz, 1.36, 120.0, 180)
        return [("CG", cg), ("CD1", cd1), ("CD2", cd2), ("CE1", ce1), ("CE2", ce2), ("CZ", cz), ("OH", oh)]
    if res == "VAL":
        return [("CG1", place(N, CA, CB, 1.52, 110.5, 180)), ("CG2", place(N, CA, CB, 1.52, 110.5, -60))]
    if res == "LEU":
        cg = place(N, CA, CB, 1.53, 116.0, -60)
        return [("CG", cg), ("CD1", place(CA, CB, cg, 1.52, 110.5, 180)), ("CD2", place(CA, CB, cg, 1.52, 110.5, -60))]
    if res == "SER":
        return [("OG", place(N, CA, CB, 1.42, 111.0, 60))]
    return []


def build_chain(cid, ca, cbs):
    (N, C, O), worst = fit_backbone(ca, cbs)
    residues = []
    for i, res in enumerate(SEQUENCE):
        atoms = [("N", N[i]), ("CA", ca[i]), ("C", C[i]), ("O", O[i])]
        if res != "GLY":
            cb = ideal_cb(N[i], ca[i], C[i])
            atoms.append(("CB", cb))
            atoms += side_chain(res, N[i], ca[i], cb)
        residues.append(
            Residue(res, FIRST + i, tuple(Atom(0, nm, nm[0], tuple(float(round(v, 3)) for v in xyz)) for nm, xyz in atoms))
        )
    return Chain(cid, tuple(residues)), worst


def build() -> tuple[Structure, float]:
    cbs = known_cbs()
    chains, worst = {}, 0.0
    for cid in "AB":
        ca = np.array(_STRANDS[cid])
        mine = {pos - 1: xyz for (c, pos), xyz in cbs.items() if c == cid}
        chains[cid], w = build_chain(cid, ca, mine)
        worst = max(worst, w)
    core = Structure(tuple(chains[c] for c in "AB"))
    flipped = apply(template_sheet_transform(), core, {"A": "G", "B": "H"})
    up, down = stack_transform("up"), stack_transform("down")
    parts = [
        core,
        apply(up, core, {"A": "C", "B": "D"}),
        apply(down, core, {"A": "E", "B": "F"}),
        flipped,
        apply(down, flipped, {"G": "I", "H": "J"}),
        apply(up, flipped, {"G": "K", "H": "L"}),
    ]
    by_id = {ch.id: ch for p in parts for ch in p.chains}
    s = Structure(tuple(by_id[c] for c in "ABCDEFGHIJKL"), title="SYNTHETIC GYVLGS STERIC ZIPPER TEMPLATE")
    return s.renumbered(), worst


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="fail if the bundled copies differ")
    args = ap.parse_args(argv)
    s, worst = build()
    text = write_pdb(s)
    print(f"max geometry residual {worst:.2e}", file=sys.stderr)
    if args.check:
        stale = [p for p in OUTPUTS if not p.exists() or p.read_text() != text]
        for p in stale:
            print(f"stale: {p}", file=sys.stderr)
        return 1 if stale else 0
    for p in OUTPUTS:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        print(f"wrote {p}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
