"""Synthetic complete datasets sampled from the GPCM.

Stands in for real graded-response corpora so simulations are fully
reproducible: abilities from N(0,1), discriminations log-normal,
difficulties normal, step difficulties centered normals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .model import AbilitySet, AnswerCorpus, GpcmItemParams, ScoreMatrix, gpcm_prob_vector


@dataclass(frozen=True)
class GenConfig:
    n_items: int = 5
    n_learners: int = 500
    n_categories: int = 5
    alpha_log_sd: float = 0.3
    beta_sd: float = 0.8
    step_spread: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if min(self.n_items, self.n_learners, self.n_categories) < 1:
            raise ShapeError("all counts must be >= 1")
        if self.step_spread < 0:
            raise ShapeError("step_spread must be >= 0")


def _draw_items(rng: np.random.Generator, config: GenConfig):
    items = []
    K = config.n_categories
    for _ in range(config.n_items):
        alpha = float(rng.lognormal(mean=0.0, sigma=config.alpha_log_sd))
        beta = float(rng.normal(0.0, config.beta_sd))
        steps = np.zeros(K)
        if K > 1:
            raw = rng.normal(0.0, config.step_spread, size=K - 1)
            steps[1:] = raw - raw.mean()
        items.append(GpcmItemParams(alpha, beta, steps))
    return items


def generate(config: GenConfig):
    """Sample a complete matrix; returns (scores, item params, true abilities)."""
    rng = np.random.default_rng(config.seed)
    thetas = rng.normal(0.0, 1.0, size=config.n_learners)
    while config.n_learners >= 2 and thetas.std() == 0.0:
        thetas = rng.normal(0.0, 1.0, size=config.n_learners)
    items = _draw_items(rng, config)
    values = np.zeros((config.n_items, config.n_learners), dtype=np.int64)
    for i, item in enumerate(items):
        probs = gpcm_prob_vector(thetas, item)  # (J, K)
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(config.n_learners)
        values[i] = 1 + (u[:, None] >= cdf).sum(axis=1)
    scores = ScoreMatrix(values, np.ones_like(values, dtype=bool), config.n_categories)
    return scores, items, AbilitySet.raw(thetas)


def attach_oracle_corpus(matrix: ScoreMatrix) -> AnswerCorpus:
    """Placeholder-text corpus carrying the matrix's scores as hidden truth.

    Lets the synthetic grader "read" answers without any language data.
    The hidden scores are for grading and accuracy analysis only.
    """
    if not matrix.is_complete:
        raise ShapeError("oracle corpus requires a complete matrix")
    texts = tuple(
        tuple(f"answer of learner {j} to item {i}" for j in range(matrix.n_learners))
        for i in range(matrix.n_items)
    )
    return AnswerCorpus(
        texts=texts,
        item_prompts=tuple(f"item {i} task" for i in range(matrix.n_items)),
        item_rubrics=tuple(f"item {i} rubric" for i in range(matrix.n_items)),
        reference_answers=tuple(None for _ in range(matrix.n_items)),
        hidden_true_scores=matrix.values.copy(),
    )
