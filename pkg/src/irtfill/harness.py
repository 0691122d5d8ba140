"""End-to-end experiment runner.

Protocol per condition: fit the complete data once (gold standard),
then for each repetition shuffle learners, mask cells per the design,
run every requested estimation method, normalize, de-shuffle, and score
against the gold abilities (RMSE, Pearson r) plus imputation accuracy
(QWK over masked cells). Aggregates means/sds and pairwise paired
t-tests on per-repetition RMSE.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dataio
from .designs import (
    RANDOM_PER_ITEM,
    SYSTEMATIC33,
    SYSTEMATIC50,
    SYSTEMATIC62,
    WRAPAROUND,
    apply_design,
    random_per_item_design,
    shuffle_learners,
    systematic_design,
    unshuffle,
    wraparound_design,
)
from .errors import DataFormatError, ShapeError
from .estimation import FitConfig, FitResult, fit_gpcm, observation_graph_connected
from .imputation import impute_knn, impute_mean, impute_mode, impute_with_scorer
from .metrics import paired_t_test, pearson, qwk, rmse
from .model import ScoreMatrix
from .scorer import SyntheticScorer, SyntheticScorerConfig, calibrate_sigma, parse_scorer_spec
from .synth import GenConfig, generate

METHOD_NOIMPUTE = "noimpute"
_IMPUTING_METHODS = ("mean", "mode", "knn", "scorer")


@dataclass(frozen=True)
class MissingCondition:
    generator: str
    ratio: Optional[float] = None
    n_missing: Optional[int] = None
    stride: int = 10

    @property
    def label(self) -> str:
        if self.generator == RANDOM_PER_ITEM:
            return f"{self.generator}_{self.ratio:g}"
        if self.generator == WRAPAROUND:
            return f"{self.generator}_{self.n_missing}"
        return self.generator

    def build(self, n_items: int, n_learners: int, seed: int):
        if self.generator in (SYSTEMATIC33, SYSTEMATIC50, SYSTEMATIC62):
            return systematic_design(self.generator, n_learners, n_items)
        if self.generator == WRAPAROUND:
            if self.n_missing is None:
                raise ShapeError("wraparound condition needs n_missing")
            return wraparound_design(n_learners, self.n_missing, n_items, self.stride)
        if self.generator == RANDOM_PER_ITEM:
            if self.ratio is None:
                raise ShapeError("random_per_item condition needs ratio")
            return random_per_item_design(n_items, n_learners, self.ratio, seed)
        raise ShapeError(f"unknown generator {self.generator!r}")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    label: Optional[str] = None
    k: int = 5
    sigma: Optional[float] = None
    target_qwk: Optional[float] = None
    scorer_spec: Optional[str] = None

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class ExperimentPlan:
    conditions: tuple
    methods: tuple
    repetitions: int = 10
    seed: int = 0
    gen_config: Optional[GenConfig] = None
    csv_path: Optional[str] = None
    n_categories: Optional[int] = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ShapeError("repetitions must be >= 1")
        if not self.conditions:
            raise ShapeError("plan needs at least one condition")
        if (self.gen_config is None) == (self.csv_path is None):
            raise ShapeError("plan needs exactly one data source (synthetic or csv)")

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ExperimentPlan":
        try:
            data = payload["data"]
            gen_config = None
            csv_path = None
            if "synthetic" in data:
                s = data["synthetic"]
                gen_config = GenConfig(
                    n_items=s["I"], n_learners=s["J"], n_categories=s["K"],
                    seed=s.get("seed", 0),
                )
            else:
                csv_path = data["csv"]
            conditions = tuple(
                MissingCondition(
                    generator=c["generator"],
                    ratio=c.get("ratio"),
                    n_missing=c.get("n_missing"),
                    stride=c.get("stride", 10),
                )
                for c in payload["conditions"]
            )
            methods = tuple(
                MethodSpec(
                    name=m["name"],
                    label=m.get("label"),
                    k=m.get("k", 5),
                    sigma=m.get("sigma"),
                    target_qwk=m.get("target_qwk"),
                    scorer_spec=m.get("scorer"),
                )
                for m in payload["methods"]
            )
        except KeyError as exc:
            raise DataFormatError(f"plan is missing field {exc}")
        return cls(
            conditions=conditions,
            methods=methods,
            repetitions=payload.get("repetitions", 10),
            seed=payload.get("seed", 0),
            gen_config=gen_config,
            csv_path=csv_path,
            n_categories=payload.get("data", {}).get("K"),
        )


@dataclass
class MethodRuns:
    method: str
    rmse_values: list = field(default_factory=list)
    pearson_values: list = field(default_factory=list)
    qwk_values: list = field(default_factory=list)  # None for noimpute / empty mask
    completed_reps: list = field(default_factory=list)
    skipped: dict = field(default_factory=dict)  # rep -> reason


@dataclass
class ConditionResult:
    condition: str
    runs: dict  # method display name -> MethodRuns
    t_tests: list = field(default_factory=list)  # (a, b, t, p, df)

    def mean_rmse(self, method: str) -> float:
        return float(np.mean(self.runs[method].rmse_values))


def run_gold_standard(complete: ScoreMatrix, config: Optional[FitConfig] = None) -> FitResult:
    """Full-data GPCM fit treated as the reference ability scale."""
    if not complete.is_complete:
        raise ShapeError("gold-standard fit requires a complete matrix")
    return fit_gpcm(complete, config)


def _method_skip_reason(method: MethodSpec, incomplete: ScoreMatrix) -> Optional[str]:
    obs = incomplete.observed
    if method.name != "scorer":
        if (obs.sum(axis=0) == 0).any():
            return "learner(s) with no observed scores"
        if (obs.sum(axis=1) == 0).any():
            return "item(s) with no observed scores"
    if method.name == METHOD_NOIMPUTE and not observation_graph_connected(obs):
        return "disconnected observation design"
    return None


def _make_scorer(method: MethodSpec, truth: ScoreMatrix, seed: int, sigma_cache: dict):
    if method.scorer_spec is not None:
        return parse_scorer_spec(method.scorer_spec, truth=truth, seed=seed)
    sigma = method.sigma
    if sigma is None:
        if method.target_qwk is None:
            sigma = 0.0
        else:
            key = (method.target_qwk, truth.n_categories)
            if key not in sigma_cache:
                counts = np.bincount(
                    truth.values[truth.observed], minlength=truth.n_categories + 1
                )[1:]
                sigma_cache[key] = calibrate_sigma(
                    method.target_qwk, truth.n_categories, counts, seed=12345
                )
            sigma = sigma_cache[key]
    return SyntheticScorer(truth, SyntheticScorerConfig(noise_sigma=sigma, seed=seed))


def _run_method(method, incomplete, shuffled_complete, seed, fit_config, sigma_cache):
    """Returns (estimated FitResult, imputation QWK or None)."""
    if method.name == METHOD_NOIMPUTE:
        return fit_gpcm(incomplete, fit_config), None
    if method.name == "mean":
        completed, _ = impute_mean(incomplete)
    elif method.name == "mode":
        completed, _ = impute_mode(incomplete)
    elif method.name == "knn":
        completed, _ = impute_knn(incomplete, k=method.k)
    elif method.name == "scorer":
        scorer = _make_scorer(method, shuffled_complete, seed, sigma_cache)
        completed, _ = impute_with_scorer(incomplete, None, scorer)
    else:
        raise ShapeError(f"unknown method {method.name!r}")
    masked = ~incomplete.observed
    if masked.any():
        imput_qwk = qwk(
            shuffled_complete.values[masked],
            completed.values[masked],
            incomplete.n_categories,
        )
    else:
        imput_qwk = None
    return fit_gpcm(completed, fit_config), imput_qwk


def run_condition(
    condition: MissingCondition,
    complete: ScoreMatrix,
    gold: FitResult,
    methods,
    repetitions: int = 10,
    seed: int = 0,
    fit_config: Optional[FitConfig] = None,
) -> ConditionResult:
    gold_thetas = gold.abilities.abilities
    runs = {m.display: MethodRuns(m.display) for m in methods}
    sigma_cache = {}
    for rep in range(repetitions):
        rep_seed = seed * 100003 + rep
        shuffled, perm = shuffle_learners(complete, rep_seed)
        design = condition.build(complete.n_items, complete.n_learners, rep_seed)
        incomplete = apply_design(shuffled, design)
        for method in methods:
            record = runs[method.display]
            reason = _method_skip_reason(method, incomplete)
            if reason is not None:
                record.skipped[rep] = reason
                continue
            fit, imput_qwk = _run_method(
                method, incomplete, shuffled, rep_seed, fit_config, sigma_cache
            )
            est = unshuffle(fit.abilities.abilities, perm)
            record.rmse_values.append(rmse(est, gold_thetas))
            record.pearson_values.append(pearson(est, gold_thetas))
            record.qwk_values.append(imput_qwk)
            record.completed_reps.append(rep)
    result = ConditionResult(condition.label, runs)
    names = [m.display for m in methods]
    for ai in range(len(names)):
        for bi in range(ai + 1, len(names)):
            a, b = runs[names[ai]], runs[names[bi]]
            common = sorted(set(a.completed_reps) & set(b.completed_reps))
            if len(common) < 2:
                continue
            av = [a.rmse_values[a.completed_reps.index(r)] for r in common]
            bv = [b.rmse_values[b.completed_reps.index(r)] for r in common]
            try:
                t, p, df = paired_t_test(av, bv)
            except Exception:
                continue
            result.t_tests.append((names[ai], names[bi], t, p, df))
    return result


def load_plan_data(plan: ExperimentPlan):
    if plan.gen_config is not None:
        scores, _, _ = generate(plan.gen_config)
        return scores
    return dataio.read_score_matrix(plan.csv_path, plan.n_categories)


def run_experiment(plan: ExperimentPlan, fit_config: Optional[FitConfig] = None):
    complete = load_plan_data(plan)
    gold = run_gold_standard(complete, fit_config)
    results = []
    for cond in plan.conditions:
        results.append(
            run_condition(
                cond, complete, gold, plan.methods,
                repetitions=plan.repetitions, seed=plan.seed, fit_config=fit_config,
            )
        )
    return results


def _fmt(x) -> str:
    return repr(float(x))


def emit_report(results, out_dir: str) -> dict:
    """Write tidy, summary, and t-test CSVs plus a plot-data JSON.

    Returns the paths written. Output is byte-deterministic for a given
    set of results.
    """
    if not results:
        raise ShapeError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "results": os.path.join(out_dir, "results.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "ttests": os.path.join(out_dir, "ttests.csv"),
        "plot_data": os.path.join(out_dir, "plot_data.json"),
    }
    with open(paths["results"], "w", newline="", encoding="utf-8") as fh:
        fh.write("condition,method,repetition,metric,value\n")
        for res in results:
            for method, record in res.runs.items():
                for idx, rep in enumerate(record.completed_reps):
                    fh.write(f"{res.condition},{method},{rep},rmse,{_fmt(record.rmse_values[idx])}\n")
                    fh.write(f"{res.condition},{method},{rep},pearson,{_fmt(record.pearson_values[idx])}\n")
                    if record.qwk_values[idx] is not None:
                        fh.write(f"{res.condition},{method},{rep},qwk,{_fmt(record.qwk_values[idx])}\n")
                for rep, reason in sorted(record.skipped.items()):
                    fh.write(f"{res.condition},{method},{rep},skipped,{reason}\n")
    with open(paths["summary"], "w", newline="", encoding="utf-8") as fh:
        fh.write("condition,method,metric,mean,sd,n\n")
        for res in results:
            for method, record in res.runs.items():
                series = {
                    "rmse": record.rmse_values,
                    "pearson": record.pearson_values,
                    "qwk": [q for q in record.qwk_values if q is not None],
                }
                for metric, values in series.items():
                    if not values:
                        continue
                    arr = np.asarray(values, dtype=float)
                    fh.write(
                        f"{res.condition},{method},{metric},{_fmt(arr.mean())},"
                        f"{_fmt(arr.std(ddof=1) if arr.size > 1 else 0.0)},{arr.size}\n"
                    )
    with open(paths["ttests"], "w", newline="", encoding="utf-8") as fh:
        fh.write("condition,method_a,method_b,metric,t,p,df\n")
        for res in results:
            for a, b, t, p, df in res.t_tests:
                fh.write(f"{res.condition},{a},{b},rmse,{_fmt(t)},{_fmt(p)},{df}\n")
    plot = {
        res.condition: {
            method: {
                "rmse": [float(v) for v in record.rmse_values],
                "pearson": [float(v) for v in record.pearson_values],
                "qwk": [None if q is None else float(q) for q in record.qwk_values],
                "skipped": {str(k): v for k, v in sorted(record.skipped.items())},
            }
            for method, record in res.runs.items()
        }
        for res in results
    }
    with open(paths["plot_data"], "w", encoding="utf-8") as fh:
        json.dump(plot, fh, indent=2, sort_keys=True)
    return paths
