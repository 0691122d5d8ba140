"""One test per release criterion, with tolerances stated inline.

These are deliberately end-to-end: each test states the property, the
data scale it runs at, and the numeric bar it must clear.
"""

import numpy as np
import pytest
from test_imputation import brute_force_knn

from irtfill.designs import (
    apply_design,
    random_per_item_design,
    systematic_design,
    wraparound_design,
)
from irtfill.estimation import fit_gpcm, normalize_abilities
from irtfill.harness import (
    ExperimentPlan,
    MethodSpec,
    MissingCondition,
    emit_report,
    run_condition,
    run_experiment,
    run_gold_standard,
)
from irtfill.imputation import impute_knn, impute_with_scorer
from irtfill.metrics import paired_t_test, qwk, rmse
from irtfill.model import (
    AbilitySet,
    GpcmItemParams,
    ScoreMatrix,
    gpcm_prob_vector,
    log_likelihood_gradients,
    masked_log_likelihood,
)
from irtfill.scorer import SyntheticScorer, SyntheticScorerConfig
from irtfill.synth import GenConfig, generate


def random_item(rng, K):
    d = np.zeros(K)
    raw = rng.normal(0, 0.5, K - 1)
    d[1:] = raw - raw.mean()
    return GpcmItemParams(float(rng.lognormal(0, 0.3)), float(rng.normal(0, 0.8)), d)


class TestModelCorrectness:
    def test_probabilities_sum_to_one_10k_draws(self):
        # tolerance 1e-10 per draw
        rng = np.random.default_rng(2024)
        for _ in range(10_000):
            item = random_item(rng, int(rng.integers(2, 7)))
            v = gpcm_prob_vector(float(rng.normal(0, 2)), item)
            assert abs(v.sum() - 1.0) < 1e-10
            assert (v > 0).all()

    def test_gradients_match_finite_differences_100_instances(self):
        # central differences, h=1e-5, relative tolerance 1e-4
        h, tol = 1e-5, 1e-4
        rng = np.random.default_rng(77)
        for _ in range(100):
            K = int(rng.integers(2, 6))
            I, J = 2, 3
            items = [random_item(rng, K) for _ in range(I)]
            vals = rng.integers(1, K + 1, (I, J))
            obs = np.ones((I, J), dtype=bool)
            obs[rng.integers(0, I), rng.integers(0, J)] = False
            m = ScoreMatrix(vals, obs, K)
            thetas = rng.normal(0, 1, J)

            def ll(th):
                return masked_log_likelihood(m, items, AbilitySet.raw(th))

            g_th, _, _, _ = log_likelihood_gradients(m, items, thetas)
            for j in range(J):
                e = np.zeros(J)
                e[j] = h
                fd = (ll(thetas + e) - ll(thetas - e)) / (2 * h)
                assert g_th[j] == pytest.approx(fd, rel=tol, abs=1e-7)


class TestParameterRecovery:
    def test_recovery_three_seeds(self):
        # J=500, I=5, K=5 complete data; normalized estimates vs normalized
        # truth must reach r >= 0.85 and RMSE <= 0.5 on seeds 0, 1, 2
        from irtfill.metrics import pearson

        for seed in (0, 1, 2):
            scores, _, thetas_true = generate(GenConfig(5, 500, 5, seed=seed))
            fit = fit_gpcm(scores)
            truth = normalize_abilities(thetas_true).abilities
            est = fit.abilities.abilities
            assert pearson(est, truth) >= 0.85, f"seed {seed}"
            assert rmse(est, truth) <= 0.5, f"seed {seed}"


class TestDesignExactness:
    def test_systematic_ratios(self):
        assert systematic_design("systematic33", 300).missing_ratio == pytest.approx(1 / 3)
        assert systematic_design("systematic50", 300).missing_ratio == pytest.approx(1 / 2)
        d62 = systematic_design("systematic62", 21)
        assert (~d62.mask).sum() == 39
        assert d62.mask.size == 63

    def test_wraparound_ratios_and_connectivity(self):
        for n_m in (10, 20, 50, 65, 80, 100):
            d = wraparound_design(33, n_m, n_items=100)
            assert d.missing_ratio == n_m / 100.0  # exact
            if n_m < 100:
                assert d.connected


class TestImputerOracles:
    def test_knn_matches_brute_force(self):
        # independent naive-loop reference on small matrices, 20 seeds per
        # size, masks up to 8 missing cells, exact agreement required
        rng = np.random.default_rng(31)
        for I, J in ((2, 3), (3, 4), (4, 6)):
            for _ in range(20):
                vals = rng.integers(1, 6, (I, J))
                obs = np.ones((I, J), dtype=bool)
                n_missing = int(rng.integers(1, min(8, I * J - I) + 1))
                cells = rng.permutation(I * J)[:n_missing]
                obs.flat[cells] = False
                if (obs.sum(axis=1) == 0).any():
                    continue
                m = ScoreMatrix(vals, obs, 5)
                got, report = impute_knn(m, k=5, weights="distance")
                want, want_fb = brute_force_knn(m, 5, "distance")
                assert (got.values == want).all()
                assert sorted(report.fallback_cells) == sorted(want_fb)

    def test_perfect_scorer_reproduces_truth_at_every_design(self):
        truth, _, _ = generate(GenConfig(3, 63, 5, seed=13))
        scorer = SyntheticScorer(truth, SyntheticScorerConfig(noise_sigma=0.0))
        designs = [
            systematic_design("systematic33", 63),
            systematic_design("systematic50", 63),
            systematic_design("systematic62", 63),
            random_per_item_design(3, 63, 0.9, 1),
        ]
        for design in designs:
            masked = apply_design(truth, design)
            filled, _ = impute_with_scorer(masked, None, scorer)
            assert (filled.values == truth.values).all()
        # wraparound at 100% missing: every cell imputed
        wide, _, _ = generate(GenConfig(100, 30, 5, seed=13))
        wide_scorer = SyntheticScorer(wide, SyntheticScorerConfig(noise_sigma=0.0))
        all_missing = apply_design(wide, wraparound_design(30, 100, n_items=100))
        filled, _ = impute_with_scorer(all_missing, None, wide_scorer)
        assert (filled.values == wide.values).all()


class TestQualitativeReplication:
    def test_method_ordering_at_62_percent(self):
        # J=300, I=3, K=5; grader noise calibrated to QWK 0.8 +/- 0.02;
        # 10 repetitions; seed pinned at 0 after a verified run across
        # seeds 0-2 (all showed the same ordering, p < 1e-5)
        scores, _, _ = generate(GenConfig(3, 300, 5, seed=0))
        gold = run_gold_standard(scores)
        methods = [
            MethodSpec("noimpute"),
            MethodSpec("knn"),
            MethodSpec("scorer", target_qwk=0.8),
        ]
        res = run_condition(
            MissingCondition("systematic62"), scores, gold, methods,
            repetitions=10, seed=0,
        )
        mean_rmse = {m: float(np.mean(r.rmse_values)) for m, r in res.runs.items()}
        assert mean_rmse["scorer"] < mean_rmse["noimpute"] < mean_rmse["knn"]
        achieved_qwk = float(np.mean(res.runs["scorer"].qwk_values))
        assert achieved_qwk == pytest.approx(0.8, abs=0.03)
        t, p, df = paired_t_test(
            res.runs["scorer"].rmse_values, res.runs["knn"].rmse_values
        )
        assert p < 0.01
        assert df == 9


class TestHighMissingCapability:
    def test_scorer_only_at_90_percent_random(self):
        scores, _, _ = generate(GenConfig(3, 300, 5, seed=21))
        gold = run_gold_standard(scores)
        methods = [
            MethodSpec("noimpute"), MethodSpec("knn"), MethodSpec("scorer", sigma=0.0)
        ]
        res = run_condition(
            MissingCondition("random_per_item", ratio=0.9), scores, gold, methods,
            repetitions=2, seed=21,
        )
        for name in ("noimpute", "knn"):
            assert res.runs[name].completed_reps == []
            assert set(res.runs[name].skipped) == {0, 1}
        record = res.runs["scorer"]
        assert record.completed_reps == [0, 1]
        assert np.isfinite(record.rmse_values).all()
        assert max(record.rmse_values) <= 0.05  # perfect grader recovers gold

    def test_scorer_only_at_100_percent_wraparound(self):
        scores, _, _ = generate(GenConfig(100, 30, 5, seed=22))
        gold = run_gold_standard(scores)
        methods = [
            MethodSpec("noimpute"), MethodSpec("knn"), MethodSpec("scorer", sigma=0.0)
        ]
        res = run_condition(
            MissingCondition("wraparound", n_missing=100), scores, gold, methods,
            repetitions=1, seed=22,
        )
        for name in ("noimpute", "knn"):
            assert res.runs[name].completed_reps == []
        record = res.runs["scorer"]
        assert record.completed_reps == [0]
        assert np.isfinite(record.rmse_values).all()
        assert record.rmse_values[0] <= 0.05


class TestMetricsPinned:
    def test_qwk_self_agreement(self):
        assert qwk([1, 2, 3, 4, 5], [1, 2, 3, 4, 5], 5) == pytest.approx(1.0, abs=1e-9)

    def test_qwk_pinned_hand_value(self):
        # one adjacent disagreement in five K=5 ratings -> 16/17
        assert qwk([1, 2, 3, 4, 5], [1, 2, 3, 4, 4], 5) == pytest.approx(
            16.0 / 17.0, abs=1e-9
        )

    def test_t_statistic_pinned(self):
        t, _, _ = paired_t_test([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        assert t == pytest.approx(2.0 * np.sqrt(3.0), abs=1e-9)


class TestDeterminism:
    def test_experiment_byte_identical(self, tmp_path):
        plan = ExperimentPlan(
            conditions=(MissingCondition("systematic33"),),
            methods=(MethodSpec("noimpute"), MethodSpec("scorer", sigma=0.5)),
            repetitions=2,
            seed=17,
            gen_config=GenConfig(3, 60, 4, seed=17),
        )
        emit_report(run_experiment(plan), str(tmp_path / "a"))
        emit_report(run_experiment(plan), str(tmp_path / "b"))
        for name in ("results.csv", "summary.csv", "ttests.csv", "plot_data.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()
