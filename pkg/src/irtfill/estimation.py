"""Fitting the GPCM from incomplete scores.

Item parameters come from marginal maximum likelihood via EM: the
E-step integrates each learner's likelihood over a fixed quadrature
grid under a standard-normal latent prior (which pins the scale and
avoids the joint-ML degeneracy where a discrimination runs away to
infinity), and the M-step runs a bounded quasi-Newton update per item
against the expected grid counts, with the sum-zero step constraint
folded in by making the highest observed step dependent. Weak priors
on the item parameters stabilize sparse items. Abilities are posterior
means from the final E-step, then standardized to mean 0 / variance 1
with a compensating item rescale so the reported likelihood matches
the reported parameters. Missing cells simply drop out of every
per-learner product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateAbilitiesError, LinkingError, NotEstimableError, ShapeError
from .model import (
    AbilitySet,
    GpcmItemParams,
    ScoreMatrix,
    gpcm_log_prob_vector,
    masked_log_likelihood,
)


@dataclass(frozen=True)
class FitConfig:
    max_outer_iters: int = 200
    inner_newton_iters: int = 10
    n_quadrature: int = 41
    convergence_tol: float = 1e-6
    alpha_bounds: tuple = (0.05, 10.0)
    theta_bounds: tuple = (-6.0, 6.0)
    beta_bounds: tuple = (-6.0, 6.0)
    step_bounds: tuple = (-6.0, 6.0)
    # Penalty widths; the ability prior doubles as the scale anchor.
    theta_prior_sd: float = 1.0
    log_alpha_prior_sd: float = 1.0
    beta_prior_sd: float = 2.0
    step_prior_sd: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.convergence_tol <= 0:
            raise ShapeError("convergence_tol must be positive")
        for lo, hi in (self.alpha_bounds, self.theta_bounds, self.beta_bounds, self.step_bounds):
            if lo >= hi:
                raise ShapeError("bounds must be ordered (lo < hi)")


@dataclass(frozen=True)
class FitResult:
    items: tuple
    abilities: AbilitySet
    final_log_likelihood: float
    iterations: int
    converged: bool
    flags: tuple = ()
    objective_trace: tuple = field(default=(), repr=False)

    def to_json_dict(self) -> dict:
        return {
            "items": [
                {
                    "alpha": it.discrimination,
                    "beta": it.difficulty,
                    "d": list(it.step_difficulties),
                }
                for it in self.items
            ],
            "abilities": list(self.abilities.abilities),
            "loglik": self.final_log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, payload: dict) -> "FitResult":
        items = tuple(
            GpcmItemParams(it["alpha"], it["beta"], np.array(it["d"], dtype=float))
            for it in payload["items"]
        )
        abilities = np.array(payload["abilities"], dtype=float)
        return cls(
            items=items,
            abilities=AbilitySet(abilities, True, 0.0, 1.0),
            final_log_likelihood=payload["loglik"],
            iterations=payload["iterations"],
            converged=payload["converged"],
            flags=tuple(payload.get("flags", ())),
        )


def check_estimable(scores: ScoreMatrix) -> None:
    """Raise unless every learner/item has data and the design links up."""
    obs = scores.observed
    learner_counts = obs.sum(axis=0)
    item_counts = obs.sum(axis=1)
    if (learner_counts == 0).any():
        j = int(np.argmin(learner_counts > 0))
        raise NotEstimableError(f"learner {j} has no observed scores")
    if (item_counts == 0).any():
        i = int(np.argmin(item_counts > 0))
        raise NotEstimableError(f"item {i} has no observed scores")
    if not observation_graph_connected(obs):
        raise LinkingError("observation design is disconnected; parameters cannot be linked")


def observation_graph_connected(observed: np.ndarray) -> bool:
    """Union-find connectivity of the learner-item bipartite graph."""
    n_items, n_learners = observed.shape
    parent = list(range(n_items + n_learners))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(observed)):
        a, b = find(int(i)), find(n_items + int(j))
        if a != b:
            parent[a] = b
    roots = {find(x) for x in range(n_items + n_learners)}
    return len(roots) == 1


def _theta_objective(scores, items, thetas, prior_sd):
    """Per-learner objective, gradient, and curvature in theta (vectorized).

    With prior_sd set, adds the N(0, prior_sd^2) log-density kernel.
    """
    J = scores.n_learners
    if prior_sd is None:
        ll = np.zeros(J)
        g = np.zeros(J)
        h = np.zeros(J)
    else:
        v = prior_sd**2
        ll = -0.5 * thetas**2 / v
        g = -thetas / v
        h = np.full(J, -1.0 / v)
    for i, item in enumerate(items):
        obs = scores.observed[i]
        if not obs.any():
            continue
        log_probs = gpcm_log_prob_vector(thetas[obs], item)
        probs = np.exp(log_probs)
        cats = scores.values[i, obs]
        k = np.arange(1, item.n_categories + 1, dtype=float)
        e_k = probs @ k
        var_k = probs @ k**2 - e_k**2
        a = item.discrimination
        ll[obs] += log_probs[np.arange(cats.size), cats - 1]
        g[obs] += a * (cats - e_k)
        h[obs] -= a * a * var_k
    return ll, g, h


def _update_thetas(scores, items, thetas, config, prior_sd, max_iters):
    """Safeguarded Newton ascent for every learner at once.

    Each learner's step is accepted only if it improves that learner's
    objective; the per-learner likelihood is concave in theta so the
    clamped, backtracked iteration converges. Without a prior, learners
    whose gradient points outward at a bound sit exactly on the bound.
    """
    lo, hi = config.theta_bounds
    thetas = np.clip(thetas.astype(float).copy(), lo, hi)
    if prior_sd is None:
        _, g_hi, _ = _theta_objective(scores, items, np.full_like(thetas, hi), None)
        _, g_lo, _ = _theta_objective(scores, items, np.full_like(thetas, lo), None)
        at_hi = g_hi >= 0
        at_lo = g_lo <= 0
        thetas[at_hi] = hi
        thetas[at_lo] = lo
        pinned = at_hi | at_lo
    else:
        pinned = np.zeros(thetas.size, dtype=bool)
    ll, g, h = _theta_objective(scores, items, thetas, prior_sd)
    for _ in range(max_iters):
        step = np.where(h < 0, -g / np.where(h < 0, h, -1.0), np.sign(g))
        step = np.clip(step, -1.0, 1.0)
        step[pinned] = 0.0
        if np.abs(step).max() < 1e-12:
            break
        cand = np.clip(thetas + step, lo, hi)
        for _ in range(30):
            new_ll, new_g, new_h = _theta_objective(scores, items, cand, prior_sd)
            worse = new_ll < ll
            if not worse.any():
                break
            cand = np.where(worse, (thetas + cand) / 2.0, cand)
        accept = new_ll >= ll
        moved = accept & (np.abs(cand - thetas) > 0)
        if not moved.any():
            break
        thetas = np.where(accept, cand, thetas)
        ll = np.where(accept, new_ll, ll)
        g = np.where(accept, new_g, g)
        h = np.where(accept, new_h, h)
    return thetas


def _item_penalty(alpha, beta, steps, config):
    pen = -0.5 * np.log(alpha) ** 2 / config.log_alpha_prior_sd**2
    pen += -0.5 * beta**2 / config.beta_prior_sd**2
    pen += -0.5 * float((steps[1:] ** 2).sum()) / config.step_prior_sd**2
    return pen


def _quadrature(config):
    """Latent grid and normalized standard-normal weights."""
    lo, hi = config.theta_bounds
    grid = np.linspace(lo, hi, config.n_quadrature)
    w = np.exp(-0.5 * (grid / config.theta_prior_sd) ** 2)
    return grid, w / w.sum()


def _posterior_weights(scores, items, grid, log_prior):
    """E-step: per-learner posterior over the grid plus the marginal
    log-likelihood. Returns (weights (Q, J), marginal_ll)."""
    J = scores.n_learners
    ll = np.tile(log_prior[:, None], (1, J))
    for i, item in enumerate(items):
        obs = scores.observed[i]
        if not obs.any():
            continue
        table = gpcm_log_prob_vector(grid, item)  # (Q, K)
        ll[:, obs] += table[:, scores.values[i, obs] - 1]
    peak = ll.max(axis=0)
    w = np.exp(ll - peak)
    norm = w.sum(axis=0)
    marginal = float((np.log(norm) + peak).sum())
    return w / norm, marginal


def _expected_counts(scores, i, weights):
    """Expected (grid, category) response counts for item i."""
    obs = scores.observed[i]
    onehot = np.eye(scores.n_categories)[scores.values[i, obs] - 1]
    return weights[:, obs] @ onehot  # (Q, K)


def _item_objective_grad(x, grid, counts, K, free_steps, dep_step, frozen_steps, config):
    """Negative penalized expected per-item log-likelihood and gradient.

    x = (alpha, beta, d_m for m in free_steps); d_dep closes the
    sum-zero constraint; frozen steps keep their stored values. counts
    is the (grid, category) table of expected responses.
    """
    alpha, beta = x[0], x[1]
    steps = frozen_steps.copy()
    steps[free_steps] = x[2:]
    if dep_step is not None:
        steps[dep_step] = 0.0
        steps[dep_step] = -steps[1:].sum()
    k_arr = np.arange(1, K + 1, dtype=float)
    step_cumsum = np.cumsum(steps)
    s_over_alpha = k_arr * (grid[:, None] - beta) - step_cumsum  # (Q, K)
    logits = alpha * s_over_alpha
    logits -= logits.max(axis=1, keepdims=True)
    ex = np.exp(logits)
    probs = ex / ex.sum(axis=1, keepdims=True)
    log_probs = logits - np.log(ex.sum(axis=1, keepdims=True))
    ll = float((counts * log_probs).sum())
    ll += _item_penalty(alpha, beta, steps, config)

    n_q = counts.sum(axis=1)  # (Q,)
    g_alpha = float((counts * s_over_alpha).sum())
    g_alpha -= float((n_q * (probs * s_over_alpha).sum(axis=1)).sum())
    g_alpha += -np.log(alpha) / (alpha * config.log_alpha_prior_sd**2)
    g_beta = -alpha * float((counts @ k_arr).sum() - (n_q * (probs @ k_arr)).sum())
    g_beta -= beta / config.beta_prior_sd**2
    tail = np.cumsum(probs[:, ::-1], axis=1)[:, ::-1]
    count_tail = np.cumsum(counts[:, ::-1], axis=1)[:, ::-1]
    g_steps = (-alpha * (count_tail - n_q[:, None] * tail)).sum(axis=0)
    g_steps[1:] -= steps[1:] / config.step_prior_sd**2
    grad = np.empty_like(x)
    grad[0] = g_alpha
    grad[1] = g_beta
    dep_grad = g_steps[dep_step] if dep_step is not None else 0.0
    grad[2:] = g_steps[free_steps] - dep_grad
    return -ll, -grad


def _update_item(scores, i, item, grid, weights, config, frozen_cats):
    """M-step pass on item i; keeps the better solution."""
    obs = scores.observed[i]
    if not obs.any():
        return item
    counts = _expected_counts(scores, i, weights)
    K = item.n_categories
    steps = item.step_difficulties.copy()
    observed_cats = set(int(c) for c in np.unique(scores.values[i, obs]))
    # Free step indices (0-based into the length-K array); index 0 is
    # pinned at zero, frozen (unobserved-category) steps stay put, and
    # the highest observed step absorbs the sum-zero constraint.
    candidates = [m for m in range(1, K) if (m + 1) in observed_cats and m not in frozen_cats]
    dep_step = candidates[-1] if candidates else None
    free_steps = np.array([m for m in candidates if m != dep_step], dtype=int)

    x0 = np.concatenate(([item.discrimination, item.difficulty], steps[free_steps]))
    bounds = [config.alpha_bounds, config.beta_bounds] + [config.step_bounds] * free_steps.size
    args = (grid, counts, K, free_steps, dep_step, steps, config)
    res = minimize(
        _item_objective_grad,
        x0,
        args=args,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": config.inner_newton_iters * 5},
    )
    f0, _ = _item_objective_grad(x0, *args)
    if res.fun >= f0:
        return item
    new_steps = steps.copy()
    new_steps[free_steps] = res.x[2:]
    if dep_step is not None:
        new_steps[dep_step] = 0.0
        new_steps[dep_step] = -new_steps[1:].sum()
    new_steps[0] = 0.0
    return GpcmItemParams(float(res.x[0]), float(res.x[1]), new_steps)


def _penalized_marginal(marginal_ll, items, config) -> float:
    ll = marginal_ll
    for item in items:
        ll += _item_penalty(
            item.discrimination, item.difficulty, item.step_difficulties, config
        )
    return ll


def _standardize(thetas, items, config):
    """Map theta to mean 0 / var 1 with the compensating item rescale.

    alpha*(theta - beta - d) is invariant under theta' = (theta - mu)/s,
    alpha' = alpha*s, beta' = (beta - mu)/s, d' = d/s, so the masked
    log-likelihood is preserved (up to the alpha clamp, which only
    engages in pathological fits).
    """
    mu = float(thetas.mean())
    s = float(thetas.std())
    if s == 0.0:
        return thetas, items
    lo_a, hi_a = config.alpha_bounds
    new_items = []
    for item in items:
        alpha = float(np.clip(item.discrimination * s, lo_a, hi_a))
        beta = float((item.difficulty - mu) / s)
        steps = item.step_difficulties / s
        steps[0] = 0.0
        new_items.append(GpcmItemParams(alpha, beta, steps))
    return (thetas - mu) / s, new_items


def _initial_values(scores: ScoreMatrix):
    obs = scores.observed
    vals = np.where(obs, scores.values, 0).astype(float)
    learner_means = vals.sum(axis=0) / obs.sum(axis=0)
    sd = learner_means.std()
    thetas = (learner_means - learner_means.mean()) / sd if sd > 0 else np.zeros_like(learner_means)
    item_means = vals.sum(axis=1) / obs.sum(axis=1)
    isd = item_means.std()
    betas = (item_means - item_means.mean()) / isd if isd > 0 and scores.n_items > 1 else np.zeros_like(item_means)
    K = scores.n_categories
    items = [GpcmItemParams(1.0, float(b), np.zeros(K)) for b in betas]
    return thetas, items


def _unobserved_categories(scores: ScoreMatrix):
    """Per item, the set of 0-based step indices for never-seen categories."""
    out = []
    flags = []
    for i in range(scores.n_items):
        seen = set(int(c) for c in np.unique(scores.values[i, scores.observed[i]]))
        frozen = {k - 1 for k in range(2, scores.n_categories + 1) if k not in seen}
        out.append(frozen)
        if frozen:
            flags.append(
                f"item {i}: categories {sorted(k + 1 for k in frozen)} unobserved; "
                "step difficulties held at initialization"
            )
    return out, flags


def fit_gpcm(scores: ScoreMatrix, config: Optional[FitConfig] = None) -> FitResult:
    """Fit item parameters and abilities; abilities come back normalized."""
    config = config or FitConfig()
    check_estimable(scores)
    _, items = _initial_values(scores)
    frozen, flags = _unobserved_categories(scores)
    grid, prior = _quadrature(config)
    log_prior = np.log(prior)
    weights, marginal = _posterior_weights(scores, items, grid, log_prior)
    objective = _penalized_marginal(marginal, items, config)
    trace = [objective]
    converged = False
    iterations = 0
    for outer in range(config.max_outer_iters):
        iterations = outer + 1
        items = [
            _update_item(scores, i, items[i], grid, weights, config, frozen[i])
            for i in range(scores.n_items)
        ]
        weights, marginal = _posterior_weights(scores, items, grid, log_prior)
        new_objective = _penalized_marginal(marginal, items, config)
        trace.append(new_objective)
        if abs(new_objective - objective) < config.convergence_tol:
            objective = new_objective
            converged = True
            break
        objective = new_objective
    thetas = weights.T @ grid  # posterior means
    thetas, items = _standardize(thetas, items, config)
    abilities = AbilitySet(thetas, True, 0.0, 1.0)
    final_ll = masked_log_likelihood(scores, items, abilities)
    return FitResult(
        items=tuple(items),
        abilities=abilities,
        final_log_likelihood=final_ll,
        iterations=iterations,
        converged=converged,
        flags=tuple(flags),
        objective_trace=tuple(trace),
    )


def estimate_abilities(
    scores: ScoreMatrix,
    items: Sequence[GpcmItemParams],
    config: Optional[FitConfig] = None,
) -> AbilitySet:
    """Per-learner MLE of theta with item parameters held fixed.

    Not normalized; learners with monotone-extreme response patterns sit
    on the theta bounds.
    """
    config = config or FitConfig()
    if len(items) != scores.n_items:
        raise ShapeError(f"{len(items)} item params for {scores.n_items} items")
    counts = scores.observed.sum(axis=0)
    if (counts == 0).any():
        j = int(np.argmin(counts > 0))
        raise NotEstimableError(f"learner {j} has no observed scores")
    thetas = _update_thetas(
        scores, items, np.zeros(scores.n_learners), config, None, 100
    )
    return AbilitySet.raw(thetas)


def normalize_abilities(abilities: AbilitySet) -> AbilitySet:
    """Map to mean 0 / variance 1 (population divisor); order-preserving."""
    values = abilities.abilities
    if values.size < 2:
        raise ShapeError("need at least 2 learners to normalize")
    mu = float(values.mean())
    sd = float(values.std())
    if sd == 0.0:
        raise DegenerateAbilitiesError("abilities have zero variance; cannot normalize")
    return AbilitySet((values - mu) / sd, True, 0.0, 1.0)
