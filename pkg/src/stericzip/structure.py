"""Hierarchical molecular model and fixed-column PDB ATOM record IO."""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

from .errors import AddressError, FormatError, ParseError, StructureError

__all__ = [
    "Atom",
    "Residue",
    "Chain",
    "Structure",
    "parse_pdb",
    "read_pdb",
    "write_pdb",
    "select_atom",
    "parse_address",
]


@dataclass(frozen=True)
class Atom:
    serial: int
    name: str
    element: str
    position: tuple[float, float, float]
    occupancy: float = 1.0
    b_factor: float = 0.0
    hetero: bool = False

    def __post_init__(self):
        if not self.name or len(self.name) > 4:
            raise StructureError(f"invalid atom name {self.name!r}")
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
            raise StructureError(f"atom {self.name}: non-finite position {self.position!r}")
        object.__setattr__(self, "position", pos)

    @property
    def xyz(self) -> np.ndarray:
        return np.array(self.position)


@dataclass(frozen=True)
class Residue:
    name: str
    seq: int
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        names = [a.name for a in self.atoms]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise StructureError(f"residue {self.name}{self.seq}: duplicate atom names {dup}")

    def atom(self, name: str) -> Atom:
        for a in self.atoms:
            if a.name == name:
                return a
        raise AddressError(f"no atom {name} in residue {self.name}{self.seq}")

    def has_atom(self, name: str) -> bool:
        return any(a.name == name for a in self.atoms)


@dataclass(frozen=True)
class Chain:
    id: str
    residues: tuple[Residue, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "residues", tuple(self.residues))
        if len(self.id) != 1:
            raise StructureError(f"chain id must be one character, got {self.id!r}")
        seqs = [r.seq for r in self.residues]
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            raise StructureError(f"chain {self.id}: residue numbers not strictly increasing")

    def residue(self, seq: int) -> Residue:
        for r in self.residues:
            if r.seq == seq:
                return r
        raise AddressError(f"no residue {seq} in chain {self.id}")

    @property
    def sequence(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.residues)

    def atoms(self) -> Iterator[Atom]:
        for r in self.residues:
            yield from r.atoms


@dataclass(frozen=True)
class Structure:
    chains: tuple[Chain, ...] = ()
    title: str = ""
    ignored_records: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "chains", tuple(self.chains))
        ids = [c.id for c in self.chains]
        if len(set(ids)) != len(ids):
            raise StructureError(f"duplicate chain ids in {ids}")

    @property
    def chain_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.chains)

    def chain(self, chain_id: str) -> Chain:
        for c in self.chains:
            if c.id == chain_id:
                return c
        raise AddressError(f"no chain {chain_id}")

    def atoms(self) -> Iterator[Atom]:
        for c in self.chains:
            yield from c.atoms()

    def n_atoms(self) -> int:
        return sum(1 for _ in self.atoms())

    def coordinates(self) -> np.ndarray:
        """All atom positions as an (n, 3) array, in file order."""
        return np.array([a.position for a in self.atoms()], dtype=float).reshape(-1, 3)

    def with_coordinates(self, xyz: np.ndarray) -> "Structure":
        xyz = np.asarray(xyz, dtype=float)
        if xyz.shape != (self.n_atoms(), 3):
            raise ValueError(f"expected shape {(self.n_atoms(), 3)}, got {xyz.shape}")
        it = iter(xyz)
        chains = []
        for c in self.chains:
            residues = []
            for r in c.residues:
                atoms = tuple(replace(a, position=tuple(next(it))) for a in r.atoms)
                residues.append(replace(r, atoms=atoms))
            chains.append(replace(c, residues=tuple(residues)))
        return replace(self, chains=tuple(chains))

    def select_chains(self, ids: Iterable[str]) -> "Structure":
        return replace(self, chains=tuple(self.chain(i) for i in ids))

    def renumbered(self) -> "Structure":
        """Copy with atom serials reassigned 1..n in file order."""
        serial = 0
        chains = []
        for c in self.chains:
            residues = []
            for r in c.residues:
                atoms = []
                for a in r.atoms:
                    serial += 1
                    atoms.append(replace(a, serial=serial))
                residues.append(replace(r, atoms=tuple(atoms)))
            chains.append(replace(c, residues=tuple(residues)))
        return replace(self, chains=tuple(chains))


# ---------------------------------------------------------------------------
# PDB reading


def _infer_element(name: str) -> str:
    letters = re.sub(r"[^A-Za-z]", "", name)
    return letters[:1].upper() if letters else ""


def _field_float(line: str, start: int, stop: int, lineno: int, label: str) -> float:
    text = line[start:stop].strip()
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: malformed {label} field {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"line {lineno}: non-finite {label} field {text!r}")
    return value


def parse_pdb(text: str) -> Structure:
    """Parse fixed-column ATOM/HETATM records into a :class:`Structure`.

    Only the first MODEL is read. Alternate locations other than the first
    one seen for an atom are dropped with a warning. Records other than
    ATOM, HETATM and TER are counted in ``Structure.ignored_records``.
    """
    chains: dict[str, dict[int, dict]] = {}
    title_parts = []
    ignored = 0
    dropped_altlocs = 0
    seen_altloc: dict[tuple[str, int, str], str] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        record = raw[:6].strip().upper()
        if record in ("ATOM", "HETATM"):
            line = raw.ljust(80)
            name = line[12:16].strip()
            altloc = line[16].strip()
            res_name = line[17:20].strip()
            chain_id = line[21]
            try:
                seq = int(line[22:26])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed residue number {line[22:26]!r}") from None
            serial_text = line[6:11].strip()
            try:
                serial = int(serial_text) if serial_text else 0
            except ValueError:
                raise ParseError(f"line {lineno}: malformed serial {serial_text!r}") from None
            xyz = (
                _field_float(line, 30, 38, lineno, "x"),
                _field_float(line, 38, 46, lineno, "y"),
                _field_float(line, 46, 54, lineno, "z"),
            )
            occ_text = line[54:60].strip()
            b_text = line[60:66].strip()
            occupancy = _field_float(line, 54, 60, lineno, "occupancy") if occ_text else 1.0
            b_factor = _field_float(line, 60, 66, lineno, "tempFactor") if b_text else 0.0
            element = line[76:78].strip() or _infer_element(name)

            key = (chain_id, seq, name)
            if altloc:
                first = seen_altloc.setdefault(key, altloc)
                if first != altloc:
                    dropped_altlocs += 1
                    continue
            residues = chains.setdefault(chain_id, {})
            res = residues.setdefault(seq, {"name": res_name, "atoms": {}})
            if name in res["atoms"]:
                raise StructureError(f"line {lineno}: duplicate atom {chain_id}{seq} {name}")
            res["atoms"][name] = Atom(
                serial=serial,
                name=name,
                element=element,
                position=xyz,
                occupancy=occupancy,
                b_factor=b_factor,
                hetero=record == "HETATM",
            )
        elif record == "TER":
            continue
        elif record == "ENDMDL":
            break
        elif record == "TITLE":
            title_parts.append(raw[10:].strip())
            ignored += 1
        elif raw.strip():
            ignored += 1

    if dropped_altlocs:
        warnings.warn(f"dropped {dropped_altlocs} alternate-location atom records", stacklevel=2)

    built = []
    for chain_id, residues in chains.items():
        try:
            built.append(
                Chain(
                    chain_id,
                    tuple(
                        Residue(r["name"], seq, tuple(r["atoms"].values()))
                        for seq, r in sorted(residues.items())
                    ),
                )
            )
        except StructureError as exc:
            raise StructureError(f"chain {chain_id}: {exc}") from None
    return Structure(tuple(built), title=" ".join(title_parts), ignored_records=ignored)


def read_pdb(path) -> Structure:
    with open(path, encoding="ascii", errors="replace") as fh:
        return parse_pdb(fh.read())


# ---------------------------------------------------------------------------
# PDB writing


def _format_name(name: str, element: str) -> str:
    if len(name) >= 4 or len(element) == 2:
        return f"{name:<4}"
    return f" {name:<3}"


def _format_coord(value: float, what: str) -> str:
    text = f"{value:8.3f}"
    if len(text) > 8:
        raise FormatError(f"coordinate {what}={value} does not fit the PDB 8.3f field")
    return text


def write_pdb(s: Structure) -> str:
    """Emit ATOM/HETATM records, one TER after each chain, then END."""
    lines = []
    if s.title:
        lines.append(f"TITLE     {s.title}"[:80])
    for chain in s.chains:
        last = None
        for res in chain.residues:
            for a in res.atoms:
                x, y, z = (_format_coord(c, f"{chain.id}{res.seq}.{a.name}") for c in a.position)
                record = "HETATM" if a.hetero else "ATOM"
                lines.append(
                    f"{record:<6}{a.serial % 100000:>5} {_format_name(a.name, a.element)} "
                    f"{res.name:>3} {chain.id}{res.seq:>4}    {x}{y}{z}"
                    f"{a.occupancy:6.2f}{a.b_factor:6.2f}          {a.element:>2}"
                )
            last = res
        if last is not None:
            lines.append(f"TER   {'':>5}      {last.name:>3} {chain.id}{last.seq:>4}")
    lines.append("END")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Atom addressing

_ADDRESS = re.compile(r"^\s*([A-Za-z0-9])\s*(-?\d+)(?:\.[A-Za-z]{3})?[\s.]+([A-Za-z0-9']{1,4})\s*$")


def parse_address(text: str) -> tuple[str, int, str]:
    """Parse ``"B6 CB"`` or ``"B6.ALA.CB"`` into ``("B", 6, "CB")``."""
    m = _ADDRESS.match(text)
    if not m:
        raise ParseError(f"cannot parse atom address {text!r}")
    return m.group(1), int(m.group(2)), m.group(3)


def select_atom(s: Structure, chain: str, seq: int, name: str) -> np.ndarray:
    """Position of the atom at ``chain``/``seq``/``name``."""
    address = f"{chain}{seq}.{name}"
    try:
        return s.chain(chain).residue(seq).atom(name).xyz
    except AddressError as exc:
        raise AddressError(f"cannot resolve {address}: {exc}") from None
