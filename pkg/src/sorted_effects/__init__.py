"""Sorted partial effects: heterogeneity analysis for regression models.

The package estimates how a partial effect is distributed across a
population (SPE curves and average effects), characterises the most and
least affected groups (classification analysis), and builds confidence
sets for the affected subpopulations — all with exchangeable-weight
bootstrap inference, uniform sup-t bands, bias correction and monotone
rearrangement.  Supported estimators: OLS, logit, probit and quantile
regression.
"""

from .data import Column, DataError, Dataset
from .formula import (
    DesignError,
    DesignInfo,
    DesignMatrix,
    Formula,
    FormulaError,
    Term,
    build_design,
    encode_design,
    expand_terms,
    parse_formula,
    set_variable,
)
from .models import (
    ConvergenceError,
    FitError,
    FittedModel,
    ModelSpec,
    RankError,
    SeparationError,
    fit_binary_mle,
    fit_model,
    fit_ols,
    fit_qr,
    predict,
)
from .effects import (
    EffectConfig,
    EffectVector,
    parse_subgroup,
    partial_effects,
    pe_binary,
    pe_categorical,
    pe_continuous,
    restrict,
)
from .resample import (
    BootstrapDraws,
    BootstrapError,
    BootstrapPlan,
    bias_correct,
    bootstrap_statistics,
    pointwise_critical_value,
    rearrange,
    replicate_rng,
    replicate_weights,
    se_iqr,
    uniform_critical_value,
)
from .spe import (
    SpeResult,
    ape,
    spe_curve,
    spe_inference,
    weighted_mean,
    weighted_quantile,
)
from .classify import (
    CaDistResult,
    CaMomentResult,
    CaMoments,
    GroupDef,
    ca_inference,
    classify_units,
    group_distributions,
    group_moments,
)
from .confset import (
    SetPair,
    SubpopResult,
    estimated_sets,
    project_sets,
    subpop_inference,
    summarize_affected,
)
from .synth import synth_dataset, synth_table, write_synth

__version__ = "0.1.0"

__all__ = [
    "Column", "DataError", "Dataset",
    "DesignError", "DesignInfo", "DesignMatrix", "Formula", "FormulaError",
    "Term", "build_design", "encode_design", "expand_terms", "parse_formula",
    "set_variable",
    "ConvergenceError", "FitError", "FittedModel", "ModelSpec", "RankError",
    "SeparationError", "fit_binary_mle", "fit_model", "fit_ols", "fit_qr",
    "predict",
    "EffectConfig", "EffectVector", "parse_subgroup", "partial_effects",
    "pe_binary", "pe_categorical", "pe_continuous", "restrict",
    "BootstrapDraws", "BootstrapError", "BootstrapPlan", "bias_correct",
    "bootstrap_statistics", "pointwise_critical_value", "rearrange",
    "replicate_rng", "replicate_weights", "se_iqr", "uniform_critical_value",
    "SpeResult", "ape", "spe_curve", "spe_inference", "weighted_mean",
    "weighted_quantile",
    "CaDistResult", "CaMomentResult", "CaMoments", "GroupDef", "ca_inference",
    "classify_units", "group_distributions", "group_moments",
    "SetPair", "SubpopResult", "estimated_sets", "project_sets",
    "subpop_inference", "summarize_affected",
    "synth_dataset", "synth_table", "write_synth",
    "__version__",
]
