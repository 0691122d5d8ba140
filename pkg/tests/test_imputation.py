import itertools

import numpy as np
import pytest

from irtfill.errors import NotImputableError, ShapeError
from irtfill.imputation import (
    impute_knn,
    impute_mean,
    impute_mode,
    impute_with_scorer,
)
from irtfill.model import ScoreMatrix
from irtfill.scorer import SyntheticScorer, SyntheticScorerConfig
from irtfill.synth import attach_oracle_corpus


def matrix(cells, K=5):
    return ScoreMatrix.from_cells(cells, n_categories=K)


def brute_force_knn(scores, k, weights):
    """Independent reference k-NN imputer (naive loops, no shortcuts)."""
    I, J, K = scores.n_items, scores.n_learners, scores.n_categories
    vals, obs = scores.values, scores.observed
    out = vals.copy()
    fallbacks = []
    for i in range(I):
        for j in range(J):
            if obs[i, j]:
                continue
            cands = []
            for jj in range(J):
                if jj == j or not obs[i, jj]:
                    continue
                shared = [ii for ii in range(I) if obs[ii, j] and obs[ii, jj]]
                if not shared:
                    continue
                d = sum((vals[ii, j] - vals[ii, jj]) ** 2 for ii in shared) / len(shared)
                cands.append((d, jj))
            if not cands:
                mean = vals[i, obs[i]].mean()
                out[i, j] = int(np.clip(np.floor(mean + 0.5), 1, K))
                fallbacks.append((i, j))
                continue
            cands.sort()
            chosen = cands[: min(k, len(cands))]
            if weights == "uniform":
                est = np.mean([vals[i, jj] for _, jj in chosen])
            elif any(d == 0.0 for d, _ in chosen):
                est = np.mean([vals[i, jj] for d, jj in chosen if d == 0.0])
            else:
                wsum = sum(1.0 / d for d, _ in chosen)
                est = sum(vals[i, jj] / d for d, jj in chosen) / wsum
            out[i, j] = int(np.clip(np.floor(est + 0.5), 1, K))
    return out, fallbacks


class TestMean:
    def test_fills_with_rounded_item_mean(self):
        m = matrix([[1, 3, None], [5, 5, None]])
        filled, report = impute_mean(m)
        assert filled.cell(0, 2) == 2
        assert filled.cell(1, 2) == 5
        assert report.method == "mean"
        assert set(report.imputed_cells) == {(0, 2, 2), (1, 2, 5)}

    def test_half_rounds_up(self):
        m = matrix([[1, 2, None], [1, 1, 1]])
        filled, _ = impute_mean(m)
        assert filled.cell(0, 2) == 2

    def test_observed_untouched_and_complete(self):
        m = matrix([[1, None, 3], [None, 2, 2], [4, 4, None]])
        filled, report = impute_mean(m)
        assert filled.observed.all()
        assert (filled.values[m.observed] == m.values[m.observed]).all()
        assert report.per_item_counts == (1, 1, 1)

    def test_complete_matrix_noop(self):
        m = matrix([[1, 2], [3, 4]])
        filled, report = impute_mean(m)
        assert (filled.values == m.values).all()
        assert report.imputed_cells == ()

    def test_unobserved_item_rejected(self):
        m = matrix([[1, 2], [None, None]])
        with pytest.raises(NotImputableError):
            impute_mean(m)


class TestMode:
    def test_fills_with_mode(self):
        m = matrix([[2, 2, 5, None]])
        filled, report = impute_mode(m)
        assert filled.cell(0, 3) == 2
        assert report.method == "mode"

    def test_tie_takes_lower_category(self):
        m = matrix([[1, 4, 4, 1, None]])
        filled, _ = impute_mode(m)
        assert filled.cell(0, 4) == 1

    def test_unobserved_item_rejected(self):
        m = matrix([[None, None], [1, 2]])
        with pytest.raises(NotImputableError):
            impute_mode(m)


class TestKnn:
    def test_identical_neighbor_wins(self):
        # learner 2 matches learner 0 exactly on item 0; distance-weighted
        # k-NN must copy learner 0's item-1 score.
        m = matrix([[3, 1, 3], [5, 1, None]])
        filled, report = impute_knn(m, k=1)
        assert filled.cell(1, 2) == 5
        assert report.fallback_cells == ()
        assert report.settings == {"k": 1, "weights": "distance"}

    def test_no_overlap_falls_back_to_item_mean(self):
        m = matrix([[1, 1, None], [None, None, 4]])
        filled, report = impute_knn(m, k=3)
        # learner 2 observes only item 1, which no other learner observes
        assert (1, 0) in report.fallback_cells or (1, 1) in report.fallback_cells
        assert filled.observed.all()

    def test_invalid_args(self):
        m = matrix([[1, None], [2, 2]])
        with pytest.raises(ShapeError):
            impute_knn(m, k=0)
        with pytest.raises(ShapeError):
            impute_knn(m, weights="gaussian")

    def test_matches_brute_force_exhaustive(self):
        # every mask with <= 8 missing cells on small matrices, many seeds
        rng = np.random.default_rng(17)
        checked = 0
        for I, J in ((2, 3), (3, 4), (4, 6)):
            for trial in range(20):
                vals = rng.integers(1, 6, (I, J))
                n_missing = int(rng.integers(1, min(8, I * J - I) + 1))
                cells = list(itertools.product(range(I), range(J)))
                rng.shuffle(cells)
                obs = np.ones((I, J), dtype=bool)
                for c in cells[:n_missing]:
                    obs[c] = False
                if (obs.sum(axis=1) == 0).any():
                    continue
                m = ScoreMatrix(vals, obs, 5)
                for k in (1, 2, 5):
                    for w in ("distance", "uniform"):
                        got, report = impute_knn(m, k=k, weights=w)
                        want, want_fb = brute_force_knn(m, k, w)
                        assert (got.values == want).all(), (I, J, trial, k, w)
                        assert sorted(report.fallback_cells) == sorted(want_fb)
                        checked += 1
        assert checked >= 300


class TestScorerImputation:
    def test_perfect_scorer_reproduces_truth(self):
        rng = np.random.default_rng(5)
        vals = rng.integers(1, 6, (4, 12))
        truth = ScoreMatrix(vals, np.ones((4, 12), dtype=bool), 5)
        obs = rng.random((4, 12)) > 0.5
        masked = ScoreMatrix(vals, obs, 5)
        corpus = attach_oracle_corpus(truth)
        scorer = SyntheticScorer(truth, SyntheticScorerConfig(noise_sigma=0.0, seed=1))
        filled, report = impute_with_scorer(masked, corpus, scorer)
        assert (filled.values == truth.values).all()
        assert report.method == "scorer"
        assert len(report.imputed_cells) == int((~obs).sum())

    def test_fully_missing_matrix(self):
        rng = np.random.default_rng(6)
        vals = rng.integers(1, 6, (3, 8))
        truth = ScoreMatrix(vals, np.ones((3, 8), dtype=bool), 5)
        masked = ScoreMatrix(vals, np.zeros((3, 8), dtype=bool), 5)
        scorer = SyntheticScorer(truth, SyntheticScorerConfig(noise_sigma=0.0, seed=1))
        filled, _ = impute_with_scorer(masked, attach_oracle_corpus(truth), scorer)
        assert (filled.values == truth.values).all()

    def test_missing_text_rejected_when_required(self):
        class TextScorer:
            requires_text = True
            max_in_flight = 1

        m = matrix([[1, None], [2, 2]])
        with pytest.raises(NotImputableError):
            impute_with_scorer(m, None, TextScorer())

    def test_noisy_scorer_stays_in_range(self):
        rng = np.random.default_rng(7)
        vals = rng.integers(1, 6, (3, 30))
        truth = ScoreMatrix(vals, np.ones((3, 30), dtype=bool), 5)
        obs = rng.random((3, 30)) > 0.6
        masked = ScoreMatrix(vals, obs, 5)
        scorer = SyntheticScorer(truth, SyntheticScorerConfig(noise_sigma=2.0, seed=3))
        filled, _ = impute_with_scorer(masked, attach_oracle_corpus(truth), scorer)
        assert filled.values.min() >= 1 and filled.values.max() <= 5
