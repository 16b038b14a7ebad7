"""Supervised discretization and cost-sensitive logistic regression for
imbalanced binary-outcome tabular data."""

from imbcredit.binning import (
    BinningScheme,
    BinStats,
    DummyMatrix,
    add_missing_bin,
    assign_bin,
    discretize,
    fit_scheme,
    merge_weak_bins,
    one_hot,
    percentile_rank,
)
from imbcredit.diagnostics import (
    empirical_logit_table,
    information_value,
    linearity_score,
    select_variables,
    vif,
)
from imbcredit.evaluation import choose_cutoff, confusion, cross_validate, roc
from imbcredit.ingest import (
    Dataset,
    MissingPolicy,
    Schema,
    SplitSpec,
    apply_missing_policy,
    load_csv,
    make_folds,
    missingness_summary,
    split,
)
from imbcredit.model import (
    ClassWeights,
    ModelFit,
    class_weights,
    fit,
    predict_proba,
    sweep_tau,
    weighted_log_likelihood,
)

__version__ = "0.1.0"
