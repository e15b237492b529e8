"""Gated cross network CTR models with embedding dimension planning.

Thin re-export of the compiled extension. The run_* functions mirror the
gdcn CLI subcommands; the rest are the individual operations they compose.
"""

from gdcn._core import (
    ConfigError,
    DataError,
    EvalOptions,
    EvalOutput,
    EvalResult,
    ExplainOptions,
    ExplainOutput,
    FdoFieldPlan,
    FdoOptions,
    FdoOutput,
    FdoRatioPlan,
    FdoReport,
    FdoRunOptions,
    Monitor,
    NumericError,
    ParamSummary,
    PearsonResult,
    PrepOptions,
    PrepResult,
    TrainConfig,
    TrainOptions,
    TrainOutput,
    TrainResult,
    auc,
    block_norms,
    choose_dim,
    cosine_similarity,
    discretize_numeric,
    formula_dims,
    gated_cross_forward,
    incomplete_beta,
    logloss,
    mean_logloss,
    param_count,
    pearson,
    run_eval,
    run_explain,
    run_fdo,
    run_prep,
    run_train,
    singular_values,
)

__all__ = [
    "ConfigError",
    "DataError",
    "EvalOptions",
    "EvalOutput",
    "EvalResult",
    "ExplainOptions",
    "ExplainOutput",
    "FdoFieldPlan",
    "FdoOptions",
    "FdoOutput",
    "FdoRatioPlan",
    "FdoReport",
    "FdoRunOptions",
    "Monitor",
    "NumericError",
    "ParamSummary",
    "PearsonResult",
    "PrepOptions",
    "PrepResult",
    "TrainConfig",
    "TrainOptions",
    "TrainOutput",
    "TrainResult",
    "auc",
    "block_norms",
    "choose_dim",
    "cosine_similarity",
    "discretize_numeric",
    "formula_dims",
    "gated_cross_forward",
    "incomplete_beta",
    "logloss",
    "mean_logloss",
    "param_count",
    "pearson",
    "run_eval",
    "run_explain",
    "run_fdo",
    "run_prep",
    "run_train",
    "singular_values",
]
