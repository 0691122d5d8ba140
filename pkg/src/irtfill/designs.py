"""Generators for planned missing-score patterns.

Three families: cyclic 3-item block designs at 33%/50%/62% missing,
a wraparound interval design for many-item tests, and fully random
per-item masking for extreme ratios. Masks store True for observed
cells (the z_ij indicator).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UnsupportedDesignError
from .estimation import observation_graph_connected
from .model import ScoreMatrix

SYSTEMATIC33 = "systematic33"
SYSTEMATIC50 = "systematic50"
SYSTEMATIC62 = "systematic62"
WRAPAROUND = "wraparound"
RANDOM_PER_ITEM = "random_per_item"

# Per-learner observation patterns over 3 items, cycled over learners.
# 33%: every learner graded on exactly 2 of 3 items.
_PATTERN_33 = [(1, 1, 0), (0, 1, 1), (1, 0, 1)]
# 50%: 6-learner block with 9 observed cells.
_PATTERN_50 = [(1, 1, 0), (0, 1, 1), (1, 0, 1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
# 62%: one pass of the first three 50% columns, then six passes of the
# single-item columns -> 24 observed cells in a 21-learner block.
_PATTERN_62 = _PATTERN_50[:3] + _PATTERN_50[3:] * 6


@dataclass(frozen=True)
class MissingDesign:
    mask: np.ndarray  # (I, J) bool, True = observed
    generator: str
    target_ratio: float
    seed: int = 0

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2:
            raise ShapeError("mask must be 2-D (items x learners)")

    @property
    def n_items(self) -> int:
        return self.mask.shape[0]

    @property
    def n_learners(self) -> int:
        return self.mask.shape[1]

    @property
    def missing_ratio(self) -> float:
        return float((~self.mask).mean())

    @property
    def connected(self) -> bool:
        return observation_graph_connected(self.mask)


_SYSTEMATIC = {
    SYSTEMATIC33: (_PATTERN_33, 1.0 / 3.0),
    SYSTEMATIC50: (_PATTERN_50, 1.0 / 2.0),
    SYSTEMATIC62: (_PATTERN_62, 39.0 / 63.0),
}


def systematic_design(ratio_tag: str, n_learners: int, n_items: int = 3) -> MissingDesign:
    """Cyclic block design for 3-item tests at a named missing ratio."""
    if ratio_tag not in _SYSTEMATIC:
        raise UnsupportedDesignError(f"unknown systematic design {ratio_tag!r}")
    if n_items != 3:
        raise UnsupportedDesignError(
            f"systematic designs are defined for 3 items, got {n_items}"
        )
    pattern, ratio = _SYSTEMATIC[ratio_tag]
    if n_learners < len(pattern):
        raise ShapeError(
            f"{ratio_tag} needs at least {len(pattern)} learners, got {n_learners}"
        )
    cols = [pattern[j % len(pattern)] for j in range(n_learners)]
    mask = np.array(cols, dtype=bool).T
    design = MissingDesign(mask, ratio_tag, ratio)
    if not design.connected:
        raise UnsupportedDesignError(f"{ratio_tag} produced a disconnected design")
    return design


def wraparound_design(
    n_learners: int,
    n_missing_per_learner: int,
    n_items: int = 100,
    stride: int = 10,
) -> MissingDesign:
    """Wrapped-interval design: learner j misses the half-open item range
    [(j*stride) % I, (j*stride + N_m) % I), giving exactly N_m missing
    cells per learner and an overall ratio of N_m / I."""
    if not 0 <= n_missing_per_learner <= n_items:
        raise ShapeError(
            f"n_missing_per_learner must be in [0, {n_items}], got {n_missing_per_learner}"
        )
    mask = np.ones((n_items, n_learners), dtype=bool)
    for j in range(n_learners):
        start = (j * stride) % n_items
        for offset in range(n_missing_per_learner):
            mask[(start + offset) % n_items, j] = False
    design = MissingDesign(mask, WRAPAROUND, n_missing_per_learner / n_items)
    if n_missing_per_learner < n_items and not design.connected:
        raise UnsupportedDesignError("wraparound design came out disconnected")
    return design


def random_per_item_design(
    n_items: int, n_learners: int, ratio: float, seed: int
) -> MissingDesign:
    """Independently per item, mask exactly round(ratio * J) learners."""
    if not 0.0 <= ratio <= 1.0:
        raise ShapeError(f"ratio must be in [0, 1], got {ratio}")
    rng = np.random.default_rng(seed)
    n_missing = int(round(ratio * n_learners))
    mask = np.ones((n_items, n_learners), dtype=bool)
    for i in range(n_items):
        drop = rng.choice(n_learners, size=n_missing, replace=False)
        mask[i, drop] = False
    return MissingDesign(mask, RANDOM_PER_ITEM, ratio, seed)


def apply_design(scores: ScoreMatrix, design: MissingDesign) -> ScoreMatrix:
    """Mask a matrix's cells per the design; the input is untouched."""
    if design.mask.shape != scores.values.shape:
        raise ShapeError(
            f"design shape {design.mask.shape} does not match matrix "
            f"{scores.values.shape}"
        )
    if (design.mask & ~scores.observed).any():
        raise ShapeError("design requires observation of a cell that is missing")
    return scores.with_mask(design.mask & scores.observed)


def shuffle_learners(scores: ScoreMatrix, seed: int):
    """Permute learner columns with a seeded uniform permutation.

    Returns (shuffled, perm) where shuffled[:, idx] = original[:, perm[idx]];
    a per-learner result r computed on the shuffled matrix de-shuffles via
    original_r[perm] = r.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(scores.n_learners)
    shuffled = ScoreMatrix(
        scores.values[:, perm], scores.observed[:, perm], scores.n_categories
    )
    return shuffled, perm


def unshuffle(values: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Invert shuffle_learners on a per-learner vector."""
    out = np.empty_like(values)
    out[perm] = values
    return out
