"""Core domain types and the generalized partial credit model (GPCM).

Scores are polytomous categories 1..K stored item-major in an (I, J)
array together with an observation mask; a cell is missing iff its mask
entry is False. All probability work happens in log-space so large
|alpha * theta| values cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CategoryRangeError, ShapeError

# Sentinel used only in user-facing cell accessors and CSV interchange.
MISSING = None


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScoreMatrix:
    """I x J polytomous score matrix with an explicit observation mask.

    ``values`` holds integers in [1, K] wherever ``observed`` is True;
    unobserved entries are undefined and must never be read.
    """

    values: np.ndarray
    observed: np.ndarray
    n_categories: int

    def __post_init__(self):
        values = _freeze(np.asarray(self.values, dtype=np.int64))
        observed = _freeze(np.asarray(self.observed, dtype=bool))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)
        if values.ndim != 2 or observed.shape != values.shape:
            raise ShapeError(
                f"values shape {values.shape} and mask shape {observed.shape} disagree"
            )
        n_items, n_learners = values.shape
        if n_items < 1 or n_learners < 2:
            raise ShapeError(
                f"need at least 1 item and 2 learners, got I={n_items}, J={n_learners}"
            )
        if self.n_categories < 2:
            raise CategoryRangeError(f"K must be >= 2, got {self.n_categories}")
        seen = values[observed]
        if seen.size and (seen.min() < 1 or seen.max() > self.n_categories):
            raise CategoryRangeError(
                f"observed scores must lie in [1, {self.n_categories}]; "
                f"found range [{seen.min()}, {seen.max()}]"
            )

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_learners(self) -> int:
        return self.values.shape[1]

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    @property
    def is_complete(self) -> bool:
        return bool(self.observed.all())

    def cell(self, item: int, learner: int):
        """Score at (item, learner), or MISSING."""
        if self.observed[item, learner]:
            return int(self.values[item, learner])
        return MISSING

    @classmethod
    def from_cells(cls, cells: Sequence[Sequence[Optional[int]]], n_categories: int) -> "ScoreMatrix":
        """Build from nested lists where None marks a missing cell."""
        rows = [list(r) for r in cells]
        observed = np.array([[c is not None for c in r] for r in rows], dtype=bool)
        values = np.array([[c if c is not None else 1 for c in r] for r in rows], dtype=np.int64)
        return cls(values, observed, n_categories)

    def with_mask(self, observed: np.ndarray) -> "ScoreMatrix":
        """Copy with a new observation mask (may only remove observations)."""
        observed = np.asarray(observed, dtype=bool)
        if observed.shape != self.values.shape:
            raise ShapeError("mask shape does not match matrix")
        if (observed & ~self.observed).any():
            raise ShapeError("cannot observe a cell that is missing in the source")
        return ScoreMatrix(self.values.copy(), observed, self.n_categories)

    def with_values(self, values: np.ndarray, observed: Optional[np.ndarray] = None) -> "ScoreMatrix":
        if observed is None:
            observed = np.ones_like(self.observed)
        return ScoreMatrix(values, observed, self.n_categories)


@dataclass(frozen=True)
class GpcmItemParams:
    """Per-item GPCM parameters.

    step_difficulties has length K; its first entry is identically 0 and
    the remaining K-1 entries sum to zero (model identification).
    """

    discrimination: float
    difficulty: float
    step_difficulties: np.ndarray

    def __post_init__(self):
        steps = _freeze(np.asarray(self.step_difficulties, dtype=float))
        object.__setattr__(self, "step_difficulties", steps)
        if self.discrimination <= 0:
            raise ShapeError(f"discrimination must be positive, got {self.discrimination}")
        if steps.ndim != 1 or steps.size < 2:
            raise ShapeError("step_difficulties must be a 1-D array of length K >= 2")
        if steps[0] != 0.0:
            raise ShapeError(f"first step difficulty must be exactly 0, got {steps[0]}")
        if abs(float(steps[1:].sum())) > 1e-8:
            raise ShapeError(
                f"step difficulties 2..K must sum to 0 (got {steps[1:].sum():.3e})"
            )

    @property
    def n_categories(self) -> int:
        return self.step_difficulties.size


@dataclass(frozen=True)
class AbilitySet:
    """Per-learner latent abilities with normalization metadata."""

    abilities: np.ndarray
    normalized: bool
    mean: float
    variance: float

    def __post_init__(self):
        abilities = _freeze(np.asarray(self.abilities, dtype=float))
        object.__setattr__(self, "abilities", abilities)
        if abilities.ndim != 1:
            raise ShapeError("abilities must be a 1-D array")
        if self.normalized:
            if abs(self.mean) > 1e-8 or abs(self.variance - 1.0) > 1e-8:
                raise ShapeError(
                    f"normalized abilities must have mean 0 / variance 1, "
                    f"got mean={self.mean:.3e}, var={self.variance}"
                )

    @classmethod
    def raw(cls, abilities: np.ndarray) -> "AbilitySet":
        abilities = np.asarray(abilities, dtype=float)
        return cls(
            abilities=abilities,
            normalized=False,
            mean=float(abilities.mean()),
            variance=float(abilities.var()),
        )

    @property
    def n_learners(self) -> int:
        return self.abilities.size


@dataclass(frozen=True)
class AnswerCorpus:
    """Learner answer texts plus per-item grading material.

    ``texts[i][j]`` is the answer of learner j to item i (None if
    unavailable). ``hidden_true_scores`` exists only so synthetic
    graders and imputation-accuracy analysis can see ground truth;
    imputation methods must never read it.
    """

    texts: tuple
    item_prompts: tuple
    item_rubrics: tuple
    reference_answers: tuple
    hidden_true_scores: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        texts = tuple(tuple(row) for row in self.texts)
        object.__setattr__(self, "texts", texts)
        object.__setattr__(self, "item_prompts", tuple(self.item_prompts))
        object.__setattr__(self, "item_rubrics", tuple(self.item_rubrics))
        object.__setattr__(self, "reference_answers", tuple(self.reference_answers))
        n_items = len(texts)
        if not (len(self.item_prompts) == len(self.item_rubrics) == len(self.reference_answers) == n_items):
            raise ShapeError("per-item corpus fields must all have length I")
        if n_items and len({len(row) for row in texts}) > 1:
            raise ShapeError("all text rows must have the same number of learners")
        if self.hidden_true_scores is not None:
            truth = _freeze(np.asarray(self.hidden_true_scores, dtype=np.int64))
            object.__setattr__(self, "hidden_true_scores", truth)
            if truth.shape != (n_items, len(texts[0]) if n_items else 0):
                raise ShapeError("hidden_true_scores shape must match texts")

    def matches(self, scores: ScoreMatrix) -> bool:
        return len(self.texts) == scores.n_items and (
            not self.texts or len(self.texts[0]) == scores.n_learners
        )


def _cumulative_logits(theta, item: GpcmItemParams):
    """S_k = sum_{m<=k} alpha * (theta - beta - d_m) for k = 1..K.

    Vectorized over theta: returns shape (..., K).
    """
    theta = np.asarray(theta, dtype=float)
    k = np.arange(1, item.n_categories + 1, dtype=float)
    step_cumsum = np.cumsum(item.step_difficulties)
    return item.discrimination * (
        k * (theta[..., None] - item.difficulty) - step_cumsum
    )


def gpcm_log_prob_vector(theta, item: GpcmItemParams) -> np.ndarray:
    """Log category probabilities, shape (..., K)."""
    logits = _cumulative_logits(theta, item)
    return logits - logsumexp(logits, axis=-1, keepdims=True)


def gpcm_prob_vector(theta: float, item: GpcmItemParams) -> np.ndarray:
    """Category probabilities (p_1..p_K); sums to 1."""
    return np.exp(gpcm_log_prob_vector(theta, item))


def gpcm_prob(theta: float, item: GpcmItemParams, k: int) -> float:
    """Probability of receiving category k (1-based)."""
    if not 1 <= k <= item.n_categories:
        raise CategoryRangeError(
            f"category {k} outside [1, {item.n_categories}]"
        )
    return float(gpcm_prob_vector(theta, item)[..., k - 1])


def expected_score(theta, item: GpcmItemParams):
    """E[k | theta], strictly increasing in theta."""
    probs = gpcm_prob_vector(np.asarray(theta, dtype=float), item)
    k = np.arange(1, item.n_categories + 1, dtype=float)
    return probs @ k


def _check_dims(scores: ScoreMatrix, items: Sequence[GpcmItemParams], thetas: np.ndarray):
    if len(items) != scores.n_items:
        raise ShapeError(f"{len(items)} item params for {scores.n_items} items")
    if thetas.shape != (scores.n_learners,):
        raise ShapeError(
            f"{thetas.size} abilities for {scores.n_learners} learners"
        )
    for i, item in enumerate(items):
        if item.n_categories != scores.n_categories:
            raise ShapeError(f"item {i} has K={item.n_categories}, matrix K={scores.n_categories}")


def masked_log_likelihood(
    scores: ScoreMatrix,
    items: Sequence[GpcmItemParams],
    abilities: AbilitySet,
) -> float:
    """sum_ij z_ij * log P(u_ij); missing cells contribute exactly zero."""
    thetas = abilities.abilities
    _check_dims(scores, items, thetas)
    total = 0.0
    for i, item in enumerate(items):
        obs = scores.observed[i]
        if not obs.any():
            continue
        log_probs = gpcm_log_prob_vector(thetas[obs], item)
        cats = scores.values[i, obs] - 1
        total += float(log_probs[np.arange(cats.size), cats].sum())
    return total


def log_likelihood_gradients(
    scores: ScoreMatrix,
    items: Sequence[GpcmItemParams],
    thetas: np.ndarray,
):
    """Analytic gradients of the masked log-likelihood.

    Returns (d_theta (J,), d_alpha (I,), d_beta (I,), d_steps (I, K));
    d_steps[:, 0] is identically 0 (the first step is pinned).
    """
    thetas = np.asarray(thetas, dtype=float)
    _check_dims(scores, items, thetas)
    n_items, n_learners = scores.values.shape
    K = scores.n_categories
    d_theta = np.zeros(n_learners)
    d_alpha = np.zeros(n_items)
    d_beta = np.zeros(n_items)
    d_steps = np.zeros((n_items, K))
    k_arr = np.arange(1, K + 1, dtype=float)
    for i, item in enumerate(items):
        obs = scores.observed[i]
        if not obs.any():
            continue
        th = thetas[obs]
        u = scores.values[i, obs].astype(float)
        probs = gpcm_prob_vector(th, item)  # (n_obs, K)
        e_k = probs @ k_arr
        alpha = item.discrimination
        step_cumsum = np.cumsum(item.step_difficulties)
        d_theta[obs] += alpha * (u - e_k)
        d_beta[i] = -alpha * float((u - e_k).sum())
        # d/d alpha of S_k = k*(theta-beta) - cumsum_k
        s_over_alpha = k_arr * (th[:, None] - item.difficulty) - step_cumsum
        observed_term = u * (th - item.difficulty) - step_cumsum[
            scores.values[i, obs] - 1
        ]
        d_alpha[i] = float((observed_term - (probs * s_over_alpha).sum(axis=1)).sum())
        # d/d d_m of S_k = -alpha * 1[m <= k]; P(l >= m) from the upper tail
        tail = np.cumsum(probs[:, ::-1], axis=1)[:, ::-1]  # (n_obs, K), col m-1 = P(l >= m)
        indicator = (k_arr[None, :] <= u[:, None]).astype(float)
        contrib = -alpha * (indicator - tail)
        d_steps[i, 1:] = contrib[:, 1:].sum(axis=0)
    return d_theta, d_alpha, d_beta, d_steps
