"""Evaluation metrics: RMSE, Pearson r, quadratic weighted kappa, paired t."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import betainc

from .errors import (
    CategoryRangeError,
    DegenerateTestError,
    ShapeError,
    UndefinedCorrelationError,
)

log = logging.getLogger(__name__)


def _pair(a, b, min_n=1):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"inputs must be equal-length vectors, got {a.shape} vs {b.shape}")
    if a.size < min_n:
        raise ShapeError(f"need at least {min_n} pairs, got {a.size}")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b, min_n=1)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pearson(a, b) -> float:
    a, b = _pair(a, b, min_n=2)
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da**2).sum() * (db**2).sum())
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation undefined: an input has zero variance")
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def qwk(truth, pred, n_categories: int) -> float:
    """Quadratic weighted kappa with weights (i-j)^2 / (K-1)^2.

    If both raters are constant and identical (expected disagreement 0)
    returns 1.0 by convention.
    """
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size < 1:
        raise ShapeError("truth and pred must be equal-length nonempty vectors")
    K = n_categories
    for name, v in (("truth", truth), ("pred", pred)):
        if v.min() < 1 or v.max() > K:
            raise CategoryRangeError(f"{name} contains values outside [1, {K}]")
    observed = np.zeros((K, K))
    np.add.at(observed, (truth - 1, pred - 1), 1.0)
    hist_t = observed.sum(axis=1)
    hist_p = observed.sum(axis=0)
    expected = np.outer(hist_t, hist_p) / truth.size
    idx = np.arange(K, dtype=float)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (K - 1) ** 2
    denom = float((weights * expected).sum())
    if denom == 0.0:
        log.warning("QWK denominator is zero (both raters constant); returning 1.0")
        return 1.0
    return 1.0 - float((weights * observed).sum()) / denom


def paired_t_test(a, b):
    """Two-sided paired t-test; returns (t_statistic, p_value, df)."""
    a, b = _pair(a, b, min_n=2)
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateTestError("paired differences have zero variance")
    n = d.size
    t = float(d.mean() / (sd / np.sqrt(n)))
    df = n - 1
    # Two-sided p via the regularized incomplete beta function.
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, p, df
