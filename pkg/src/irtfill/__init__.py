"""GPCM ability estimation from incomplete constructed-response scores,
with pluggable missing-score imputation and a simulation harness."""

from .model import (
    MISSING,
    AbilitySet,
    AnswerCorpus,
    GpcmItemParams,
    ScoreMatrix,
    gpcm_prob,
    gpcm_prob_vector,
    masked_log_likelihood,
)
from .estimation import (
    FitConfig,
    FitResult,
    estimate_abilities,
    fit_gpcm,
    normalize_abilities,
)
from .designs import (
    MissingDesign,
    apply_design,
    random_per_item_design,
    shuffle_learners,
    systematic_design,
    wraparound_design,
)
from .imputation import (
    ImputationReport,
    impute_knn,
    impute_mean,
    impute_mode,
    impute_with_scorer,
)
from .scorer import (
    ExecScorer,
    HttpScorer,
    ScoreRequest,
    ScoreResponse,
    SyntheticScorer,
    SyntheticScorerConfig,
    batch_score,
    calibrate_sigma,
)
from .metrics import paired_t_test, pearson, qwk, rmse
from .synth import GenConfig, attach_oracle_corpus, generate
from .harness import (
    ConditionResult,
    ExperimentPlan,
    MethodSpec,
    MissingCondition,
    emit_report,
    run_condition,
    run_experiment,
    run_gold_standard,
)

__version__ = "0.1.0"
