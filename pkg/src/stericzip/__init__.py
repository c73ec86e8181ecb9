"""Steric-zipper amyloid fibril model building with small geometric optimizers."""

__version__ = "0.1.0"

from .builder import BuildRecipe, ContactReport, assemble_fibril, build_model, strand_axes
from .structure import Structure, parse_pdb, read_pdb, write_pdb

__all__ = [
    "__version__",
    "BuildRecipe",
    "ContactReport",
    "assemble_fibril",
    "build_model",
    "strand_axes",
    "Structure",
    "parse_pdb",
    "read_pdb",
    "write_pdb",
]
