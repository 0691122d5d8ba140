"""Missing-score imputation: item mean, item mode, k-NN, and AI grader.

Every imputer returns a complete matrix plus a report of exactly the
cells it filled; observed cells are never touched. Real-valued
imputations map back onto categories by half-up rounding and clamping
to [1, K].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BatchScoreError, NotImputableError, ShapeError
from .model import AnswerCorpus, ScoreMatrix
from .scorer import ScoreRequest, batch_score

METHOD_MEAN = "mean"
METHOD_MODE = "mode"
METHOD_KNN = "knn"
METHOD_SCORER = "scorer"


@dataclass(frozen=True)
class ImputationReport:
    method: str
    imputed_cells: tuple  # ((item, learner, value), ...)
    per_item_counts: tuple
    settings: dict = field(default_factory=dict)
    fallback_cells: tuple = ()  # k-NN cells that fell back to the item mean

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "imputed_cells": [list(c) for c in self.imputed_cells],
            "per_item_counts": list(self.per_item_counts),
            "settings": dict(self.settings),
            "fallback_cells": [list(c) for c in self.fallback_cells],
        }


def _round_clamp(x: float, K: int) -> int:
    return int(np.clip(np.floor(x + 0.5), 1, K))


def _require_item_observations(scores: ScoreMatrix):
    counts = scores.observed.sum(axis=1)
    if (counts == 0).any():
        i = int(np.argmin(counts > 0))
        raise NotImputableError(f"item {i} has no observed scores to impute from")


def _build_report(method, scores, filled, settings, fallbacks=()):
    cells = tuple(
        (int(i), int(j), int(filled[i, j]))
        for i, j in zip(*np.nonzero(~scores.observed))
    )
    counts = tuple(int(c) for c in (~scores.observed).sum(axis=1))
    return ImputationReport(method, cells, counts, settings, tuple(fallbacks))


def _complete(scores: ScoreMatrix, filled: np.ndarray) -> ScoreMatrix:
    values = np.where(scores.observed, scores.values, filled)
    return scores.with_values(values)


def impute_mean(scores: ScoreMatrix):
    """Fill each missing cell with its item's rounded observed mean."""
    _require_item_observations(scores)
    K = scores.n_categories
    filled = np.zeros_like(scores.values)
    for i in range(scores.n_items):
        obs = scores.observed[i]
        mean = scores.values[i, obs].mean()
        filled[i, ~obs] = _round_clamp(float(mean), K)
    report = _build_report(METHOD_MEAN, scores, filled, {})
    return _complete(scores, filled), report


def impute_mode(scores: ScoreMatrix):
    """Fill each missing cell with its item's modal category (ties -> lower)."""
    _require_item_observations(scores)
    filled = np.zeros_like(scores.values)
    for i in range(scores.n_items):
        obs = scores.observed[i]
        counts = np.bincount(scores.values[i, obs], minlength=scores.n_categories + 1)
        filled[i, ~obs] = int(np.argmax(counts[1:])) + 1
    report = _build_report(METHOD_MODE, scores, filled, {})
    return _complete(scores, filled), report


def _neighbor_distances(scores: ScoreMatrix, j: int):
    """Mean squared score difference between learner j and every other
    learner over jointly observed items; NaN where no overlap."""
    obs = scores.observed
    vals = scores.values.astype(float)
    overlap = obs[:, j][:, None] & obs  # (I, J)
    counts = overlap.sum(axis=0).astype(float)
    diff = np.where(overlap, (vals - vals[:, j][:, None]) ** 2, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(counts > 0, diff / counts, np.nan)
    dist[j] = np.nan
    return dist


def impute_knn(scores: ScoreMatrix, k: int = 5, weights: str = "distance"):
    """k-nearest-neighbor imputation over learners.

    For missing cell (i, j) the candidate donors are learners that
    observe item i and share at least one observed item with learner j;
    the k nearest by overlap-normalized squared difference donate their
    item-i scores (ties broken by learner index). A cell with no donor
    falls back to the item mean and is recorded in the report.
    """
    if k < 1:
        raise ShapeError(f"k must be >= 1, got {k}")
    if weights not in ("distance", "uniform"):
        raise ShapeError(f"weights must be 'distance' or 'uniform', got {weights!r}")
    _require_item_observations(scores)
    K = scores.n_categories
    filled = np.zeros_like(scores.values)
    fallbacks = []
    item_means = [
        scores.values[i, scores.observed[i]].mean() for i in range(scores.n_items)
    ]
    dist_cache = {}
    for i, j in zip(*np.nonzero(~scores.observed)):
        i, j = int(i), int(j)
        if j not in dist_cache:
            dist_cache[j] = _neighbor_distances(scores, j)
        dist = dist_cache[j]
        eligible = np.nonzero(scores.observed[i] & ~np.isnan(dist))[0]
        if eligible.size == 0:
            filled[i, j] = _round_clamp(float(item_means[i]), K)
            fallbacks.append((i, j))
            continue
        order = sorted(eligible, key=lambda jj: (dist[jj], jj))
        chosen = order[: min(k, len(order))]
        donor_scores = scores.values[i, chosen].astype(float)
        donor_dist = dist[chosen]
        if weights == "uniform":
            estimate = donor_scores.mean()
        elif (donor_dist == 0.0).any():
            estimate = donor_scores[donor_dist == 0.0].mean()
        else:
            w = 1.0 / donor_dist
            estimate = float((w * donor_scores).sum() / w.sum())
        filled[i, j] = _round_clamp(float(estimate), K)
    settings = {"k": k, "weights": weights}
    report = _build_report(METHOD_KNN, scores, filled, settings, fallbacks)
    return _complete(scores, filled), report


def impute_with_scorer(
    scores: ScoreMatrix,
    corpus: Optional[AnswerCorpus],
    scorer,
    max_in_flight: Optional[int] = None,
):
    """Fill every missing cell with the AI grader's predicted category.

    Scorer failures are fatal for the whole call (no silent fallback);
    the raised error carries the failing cell coordinates.
    """
    if corpus is not None and not corpus.matches(scores):
        raise ShapeError("corpus dimensions do not match the score matrix")
    needs_text = getattr(scorer, "requires_text", True)
    cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(~scores.observed))]
    requests_list = []
    for i, j in cells:
        text = corpus.texts[i][j] if corpus is not None else None
        if needs_text and text is None:
            raise NotImputableError(
                f"no answer text for missing cell (item {i}, learner {j})"
            )
        requests_list.append(
            ScoreRequest(
                item_id=str(i),
                learner_id=str(j),
                n_categories=scores.n_categories,
                answer_text=text,
                prompt=corpus.item_prompts[i] if corpus is not None else None,
                rubric=corpus.item_rubrics[i] if corpus is not None else None,
                reference_answer=corpus.reference_answers[i] if corpus is not None else None,
            )
        )
    try:
        responses = batch_score(requests_list, scorer, max_in_flight=max_in_flight)
    except BatchScoreError as exc:
        raise BatchScoreError(
            f"scorer imputation failed for cells {exc.failed_cells[:5]}",
            exc.failed_cells,
        ) from exc
    filled = np.zeros_like(scores.values)
    for (i, j), resp in zip(cells, responses):
        filled[i, j] = resp.predicted
    settings = {"scorer": type(scorer).__name__, "calls": len(cells)}
    report = _build_report(METHOD_SCORER, scores, filled, settings)
    return _complete(scores, filled), report
