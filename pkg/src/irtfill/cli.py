"""Command-line entry point.

Subcommands: simulate, design, impute, fit, evaluate, experiment.
Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import dataio
from .designs import (
    RANDOM_PER_ITEM,
    SYSTEMATIC33,
    SYSTEMATIC50,
    SYSTEMATIC62,
    WRAPAROUND,
    random_per_item_design,
    systematic_design,
    wraparound_design,
)
from .errors import DataError, ScorerError
from .estimation import FitConfig, fit_gpcm
from .harness import ExperimentPlan, emit_report, run_experiment
from .imputation import impute_knn, impute_mean, impute_mode, impute_with_scorer
from .metrics import paired_t_test, pearson, qwk, rmse
from .scorer import parse_scorer_spec
from .synth import GenConfig, attach_oracle_corpus, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SCORER = 3

log = logging.getLogger("irtfill")


class _UsageExit(Exception):
    def __init__(self, code):
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise _UsageExit(EXIT_USAGE if status else EXIT_OK)


def _build_parser() -> _Parser:
    parser = _Parser(prog="irtfill", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic complete dataset")
    p.add_argument("--items", "-I", type=int, default=5)
    p.add_argument("--learners", "-J", type=int, default=500)
    p.add_argument("--categories", "-K", type=int, default=5)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--corpus", action="store_true", help="also write an oracle corpus")

    p = sub.add_parser("design", help="emit a missing-data design mask")
    p.add_argument(
        "--generator",
        required=True,
        choices=[SYSTEMATIC33, SYSTEMATIC50, SYSTEMATIC62, WRAPAROUND, RANDOM_PER_ITEM],
    )
    p.add_argument("--items", "-I", type=int, default=None)
    p.add_argument("--learners", "-J", type=int, required=True)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--n-missing", type=int, default=None)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("impute", help="complete an incomplete score matrix")
    p.add_argument("--scores", required=True)
    p.add_argument("-K", "--categories", type=int, default=None)
    p.add_argument("--method", required=True, choices=["mean", "mode", "knn", "scorer"])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--scorer", help="exec:<cmd> | http:<url> | synthetic:<sigma|qwk=t>")
    p.add_argument("--truth", help="complete matrix CSV for the synthetic scorer")
    p.add_argument("--corpus", help="answer corpus directory for external scorers")
    p.add_argument("--out", required=True)
    p.add_argument("--report")

    p = sub.add_parser("fit", help="fit GPCM parameters and abilities")
    p.add_argument("--scores", required=True)
    p.add_argument("-K", "--categories", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="compare ability files or score matrices")
    p.add_argument("--abilities-a")
    p.add_argument("--abilities-b")
    p.add_argument("--truth", help="score CSV for QWK")
    p.add_argument("--pred", help="score CSV for QWK")
    p.add_argument("-K", "--categories", type=int, default=None)

    p = sub.add_parser("experiment", help="run an experiment plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_simulate(args) -> int:
    import os

    config = GenConfig(
        n_items=args.items,
        n_learners=args.learners,
        n_categories=args.categories,
        seed=args.seed,
    )
    scores, items, thetas = generate(config)
    os.makedirs(args.out_dir, exist_ok=True)
    dataio.write_score_matrix(os.path.join(args.out_dir, "matrix.csv"), scores)
    dataio.write_item_params(os.path.join(args.out_dir, "params.json"), items)
    dataio.write_abilities(os.path.join(args.out_dir, "theta_true.json"), thetas)
    if args.corpus:
        dataio.write_corpus(os.path.join(args.out_dir, "corpus"), attach_oracle_corpus(scores))
    return EXIT_OK


def _cmd_design(args) -> int:
    gen = args.generator
    if gen in (SYSTEMATIC33, SYSTEMATIC50, SYSTEMATIC62):
        design = systematic_design(gen, args.learners, args.items if args.items else 3)
    elif gen == WRAPAROUND:
        if args.n_missing is None:
            raise DataError("wraparound needs --n-missing")
        design = wraparound_design(
            args.learners, args.n_missing, args.items or 100, args.stride
        )
    else:
        if args.ratio is None:
            raise DataError("random_per_item needs --ratio")
        if args.items is None:
            raise DataError("random_per_item needs --items")
        design = random_per_item_design(args.items, args.learners, args.ratio, args.seed)
    dataio.write_mask(args.out, design.mask)
    log.info("wrote %s (missing ratio %.4f)", args.out, design.missing_ratio)
    return EXIT_OK


def _cmd_impute(args) -> int:
    scores = dataio.read_score_matrix(args.scores, args.categories)
    if args.method == "mean":
        completed, report = impute_mean(scores)
    elif args.method == "mode":
        completed, report = impute_mode(scores)
    elif args.method == "knn":
        completed, report = impute_knn(scores, k=args.k)
    else:
        if not args.scorer:
            raise DataError("method scorer needs --scorer")
        truth = dataio.read_score_matrix(args.truth, scores.n_categories) if args.truth else None
        scorer = parse_scorer_spec(args.scorer, truth=truth, seed=args.seed)
        corpus = (
            dataio.read_corpus(args.corpus, scores.n_items, scores.n_learners)
            if args.corpus
            else None
        )
        completed, report = impute_with_scorer(scores, corpus, scorer)
        if hasattr(scorer, "close"):
            scorer.close()
    dataio.write_score_matrix(args.out, completed)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
    return EXIT_OK


def _cmd_fit(args) -> int:
    scores = dataio.read_score_matrix(args.scores, args.categories)
    config = FitConfig(max_outer_iters=args.max_iters, convergence_tol=args.tol, seed=args.seed)
    result = fit_gpcm(scores, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(result.to_json())
    log.info("fit: loglik=%.4f iterations=%d converged=%s",
             result.final_log_likelihood, result.iterations, result.converged)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    out = {}
    if args.abilities_a and args.abilities_b:
        a = dataio.read_abilities(args.abilities_a).abilities
        b = dataio.read_abilities(args.abilities_b).abilities
        out["rmse"] = rmse(a, b)
        out["pearson"] = pearson(a, b)
        try:
            t, p, df = paired_t_test(a, b)
            out["t_test"] = {"t": t, "p": p, "df": df}
        except DataError:
            pass
    if args.truth and args.pred:
        truth = dataio.read_score_matrix(args.truth, args.categories)
        pred = dataio.read_score_matrix(args.pred, truth.n_categories)
        both = truth.observed & pred.observed
        out["qwk"] = qwk(truth.values[both], pred.values[both], truth.n_categories)
    if not out:
        raise DataError("evaluate needs --abilities-a/--abilities-b or --truth/--pred")
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_experiment(args) -> int:
    with open(args.plan, encoding="utf-8") as fh:
        plan = ExperimentPlan.from_json_dict(json.load(fh))
    if args.seed:
        plan = ExperimentPlan(
            conditions=plan.conditions, methods=plan.methods,
            repetitions=plan.repetitions, seed=args.seed,
            gen_config=plan.gen_config, csv_path=plan.csv_path,
            n_categories=plan.n_categories,
        )
    results = run_experiment(plan)
    paths = emit_report(results, args.out)
    log.info("wrote %s", ", ".join(sorted(paths.values())))
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "design": _cmd_design,
    "impute": _cmd_impute,
    "fit": _cmd_fit,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        return exc.code
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    np.random.seed(args.seed)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ScorerError as exc:
        log.error("%s", exc)
        return EXIT_SCORER
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
