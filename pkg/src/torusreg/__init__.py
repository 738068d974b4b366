"""Spectral toolkit for block-weighted Sobolev norms on the torus."""

__version__ = "0.1.0"

from .lattice import FourierMap, GridField, ShellSpectrum, analyze, synthesize  # noqa: E402
from .norms import BlockSpec, WeightFn, weighted_block_norm  # noqa: E402

__all__ = [
    "BlockSpec",
    "FourierMap",
    "GridField",
    "ShellSpectrum",
    "WeightFn",
    "analyze",
    "synthesize",
    "weighted_block_norm",
]
