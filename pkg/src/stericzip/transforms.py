"""Rigid transforms that generate the second beta-sheet and stack strands.

Composition convention: ``compose(outer, inner)`` applies ``inner`` first,
so ``apply(compose(t2, t1), s) == apply(t2, apply(t1, s))``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ParseError, StructureError
from .structure import Structure

__all__ = [
    "AffineTransform",
    "STACK_RISE",
    "template_sheet_transform",
    "optimized_sheet_transform",
    "stack_transform",
    "compose",
    "apply",
    "apply_points",
    "derive_sheet_translation",
    "SheetTranslation",
]

STACK_RISE = 9.59
SHEET_FLIP = np.diag([-1.0, 1.0, -1.0])
TEMPLATE_SHEET_TRANSLATION = (-20.5865, 9.48, 0.0)
OPTIMIZED_SHEET_TRANSLATION = (-20.2788, -0.0821, 0.5609)

_ORTHO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AffineTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=_ORTHO_TOL):
            raise ValueError("rotation matrix is not orthogonal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation matrix is not proper (det != 1)")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def __eq__(self, other):
        if not isinstance(other, AffineTransform):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __call__(self, points) -> np.ndarray:
        return apply_points(self, points)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "AffineTransform":
        rt = self.rotation.T
        return AffineTransform(rt, -rt @ self.translation)

    def to_text(self) -> str:
        """Twelve numbers, row-major rotation then translation, repr precision."""
        values = list(self.rotation.ravel()) + list(self.translation)
        return " ".join(repr(float(v)) for v in values)

    @classmethod
    def from_text(cls, text: str) -> "AffineTransform":
        parts = text.replace(",", " ").split()
        if len(parts) != 12:
            raise ParseError(f"transform needs 12 numbers, got {len(parts)}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"malformed transform text: {exc}") from None
        return cls(np.array(values[:9]).reshape(3, 3), np.array(values[9:]))


def template_sheet_transform() -> AffineTransform:
    """Maps sheet-1 chains A(B) onto sheet-2 chains G(H) of the 3NHD template."""
    return AffineTransform(SHEET_FLIP, TEMPLATE_SHEET_TRANSLATION)


def optimized_sheet_transform() -> AffineTransform:
    """Sheet-2 pose after contact optimization, averaged over the three models."""
    return AffineTransform(SHEET_FLIP, OPTIMIZED_SHEET_TRANSLATION)


def stack_transform(direction: str) -> AffineTransform:
    if direction == "up":
        return AffineTransform(np.eye(3), (0.0, 0.0, STACK_RISE))
    if direction == "down":
        return AffineTransform(np.eye(3), (0.0, 0.0, -STACK_RISE))
    raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")


def compose(outer: AffineTransform, inner: AffineTransform) -> AffineTransform:
    return AffineTransform(
        outer.rotation @ inner.rotation,
        outer.rotation @ inner.translation + outer.translation,
    )


def apply_points(tf: AffineTransform, points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.shape == (3,):
        return tf.rotation @ p + tf.translation
    return p.reshape(-1, 3) @ tf.rotation.T + tf.translation


def apply(tf: AffineTransform, s, chain_ids: Mapping[str, str] | None = None):
    """Transformed copy of a Structure (or point array).

    ``chain_ids`` renames chains (old id -> new id); chains not in the map
    keep their ids.
    """
    if not isinstance(s, Structure):
        return apply_points(tf, s)
    moved = s.with_coordinates(apply_points(tf, s.coordinates())) if s.n_atoms() else s
    if chain_ids:
        unknown = set(chain_ids) - set(s.chain_ids)
        if unknown:
            raise StructureError(f"cannot rename missing chains {sorted(unknown)}")
        moved = replace(
            moved,
            chains=tuple(replace(c, id=chain_ids.get(c.id, c.id)) for c in moved.chains),
        )
    return moved


@dataclass(frozen=True)
class SheetTranslation:
    translation: np.ndarray
    deviations: np.ndarray  # per pair, (image - R.source) - mean

    @property
    def spread(self) -> np.ndarray:
        return np.linalg.norm(self.deviations, axis=1)


def derive_sheet_translation(pairs: Sequence, rotation=SHEET_FLIP) -> SheetTranslation:
    """Mean translation taking each rotated source point onto its image.

    ``pairs`` holds ``(source, image)`` point pairs.
    """
    if len(pairs) == 0:
        raise ValueError("at least one (source, image) pair is required")
    r = np.asarray(rotation, dtype=float)
    if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=_ORTHO_TOL):
        raise ValueError("rotation matrix is not orthogonal")
    src = np.array([p[0] for p in pairs], dtype=float).reshape(-1, 3)
    img = np.array([p[1] for p in pairs], dtype=float).reshape(-1, 3)
    per_pair = img - src @ r.T
    mean = per_pair.mean(axis=0)
    return SheetTranslation(mean, per_pair - mean)
