"""Sorted partial effect (SPE) curves with bootstrap confidence bands.

The SPE at index ``u`` is the ``u``-quantile of the per-observation
partial effects over a population of interest; the APE is the
corresponding weighted average.  The model itself is always fitted on
the full sample — the population only determines which observations'
effects enter the quantiles.

Inference is by exchangeable-weight bootstrap: every replicate refits
the model, recomputes the effects and takes weighted quantiles with the
replicate weights.  Bands come in a pointwise flavour (normal critical
value) and a uniform sup-t flavour (bootstrap critical value over the
whole grid); both use rescaled-IQR standard errors, are recentred at the
bias-corrected estimate when requested, and are monotonised by
rearrangement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .effects import EffectConfig, EffectVector
from .models import ModelSpec
from .pipeline import AnalysisState
from .resample import (
    BootstrapPlan,
    bias_correct,
    bootstrap_statistics,
    pointwise_critical_value,
    rearrange,
    se_iqr,
    uniform_critical_value,
)

__all__ = [
    "weighted_quantile",
    "weighted_mean",
    "ape",
    "spe_curve",
    "spe_inference",
    "SpeResult",
    "DEFAULT_US",
]

#: default quantile-index grid for SPE curves
DEFAULT_US = tuple(np.arange(1, 10) / 10.0)


def weighted_quantile(values, weights, u):
    """Weighted empirical quantile, left-continuous inverse CDF.

    Returns the smallest value ``v`` whose cumulative weight share
    reaches ``u``:  ``min{ v : sum(w_i [values_i <= v]) / sum(w) >= u }``.
    With unit weights this is the classical type-1 sample quantile.

    Parameters
    ----------
    values : ndarray, shape (m,)
    weights : ndarray, shape (m,)
        Nonnegative, positive total mass.
    u : float or array of float
        Quantile indexes strictly inside (0, 1).

    Returns
    -------
    float or ndarray matching the shape of `u`.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape or values.ndim != 1:
        raise ValueError("values and weights must be 1-d and aligned")
    if values.size == 0:
        raise ValueError("cannot take a quantile of an empty sample")
    if not np.all(np.isfinite(values)):
        raise ValueError("values contain NaN or infinities")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = weights.sum()
    if not total > 0:
        raise ValueError("weights must have positive total mass")
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((uu <= 0.0) | (uu >= 1.0)):
        raise ValueError("quantile indexes must lie strictly in (0, 1)")

    order = np.argsort(values, kind="stable")
    cdf = np.cumsum(weights[order]) / total
    idx = np.searchsorted(cdf, uu, side="left")
    out = values[order][np.minimum(idx, values.size - 1)]
    return out if np.ndim(u) else float(out[0])


def weighted_mean(values, weights) -> float:
    """Weighted average with positive total mass."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not total > 0:
        raise ValueError("weights must have positive total mass")
    return float(np.sum(values * weights) / total)


def ape(effects: EffectVector) -> float:
    """Average partial effect over the population of interest."""
    return weighted_mean(effects.population, effects.population_weights)


def spe_curve(effects: EffectVector, us=DEFAULT_US) -> np.ndarray:
    """Sorted partial effects: population quantiles at each index in `us`."""
    return weighted_quantile(
        effects.population, effects.population_weights, _check_us(us)
    )


def _check_us(us) -> np.ndarray:
    us = np.asarray(us, dtype=float)
    if us.ndim != 1 or us.size == 0:
        raise ValueError("us must be a non-empty 1-d grid")
    if np.any((us <= 0.0) | (us >= 1.0)):
        raise ValueError("quantile indexes must lie strictly in (0, 1)")
    if np.any(np.diff(us) <= 0.0):
        raise ValueError("us must be strictly increasing")
    return us


@dataclass(frozen=True)
class SpeResult:
    """SPE estimates with pointwise and uniform confidence bands.

    Curves are monotonised by rearrangement, so ``estimate`` is
    nondecreasing and the bands bracket it coordinatewise.  ``ape_*``
    fields carry the scalar average effect with its own band (the
    one-coordinate uniform construction).
    """

    us: np.ndarray
    estimate: np.ndarray
    estimate_raw: np.ndarray
    se: np.ndarray
    lower_pointwise: np.ndarray
    upper_pointwise: np.ndarray
    lower_uniform: np.ndarray
    upper_uniform: np.ndarray
    ape: float
    ape_se: float
    ape_lower: float
    ape_upper: float
    alpha: float
    bc: bool
    crit_uniform: float
    crit_pointwise: float
    crit_ape: float
    diagnostics: dict = field(default_factory=dict)


def spe_inference(
    data: Dataset,
    formula,
    spec: ModelSpec | None = None,
    config: EffectConfig | None = None,
    us=DEFAULT_US,
    alpha: float = 0.1,
    plan: BootstrapPlan | None = None,
    bc: bool = True,
    samp_weight=None,
    subgroup=None,
    drop_aliased: bool = False,
) -> SpeResult:
    """Estimate the SPE curve and APE with bootstrap bands.

    Parameters
    ----------
    data : Dataset
    formula : str or Formula
        Model formula; the response must be numeric (0/1 for binary
        links).
    spec : ModelSpec
        Estimator; defaults to OLS.
    config : EffectConfig
        Variable of interest and how to perturb it.
    us : sequence of float
        Strictly increasing quantile-index grid in (0, 1).
    alpha : float
        1 - coverage for both band flavours.
    plan : BootstrapPlan
    bc : bool
        Apply bootstrap bias correction to the reported estimates; the
        bands keep the half-widths computed around the raw estimates and
        are recentred at the corrected ones.
    samp_weight : str or ndarray, optional
    subgroup : str or boolean ndarray, optional
        Population of interest; the model still uses all rows.
    drop_aliased : bool
        Passed through to the design builder.

    Returns
    -------
    SpeResult
    """
    if spec is None:
        spec = ModelSpec()
    if config is None:
        raise ValueError("config (the variable of interest) is required")
    if plan is None:
        plan = BootstrapPlan()
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    us = _check_us(us)
    k = us.size

    state = AnalysisState.build(
        data, formula, spec, config, samp_weight, subgroup, drop_aliased
    )
    vals0, wts0 = state.population_delta(state.base_model, state.w_samp)
    spe0 = weighted_quantile(vals0, wts0, us)
    ape0 = weighted_mean(vals0, wts0)

    def stat(w_units):
        model = state.fit(w_units)
        vals, wts = state.population_delta(model, w_units)
        return np.append(weighted_quantile(vals, wts, us),
                         weighted_mean(vals, wts))

    draws = bootstrap_statistics(plan, stat, state.n, state.w_samp)
    se = se_iqr(draws)
    se_spe, se_ape = se[:k], float(se[k])

    crit_u = uniform_critical_value(draws.draws[:, :k], spe0, se_spe, alpha)
    crit_p = pointwise_critical_value(alpha)
    crit_a = uniform_critical_value(draws.draws[:, k], [ape0], [se_ape], alpha)

    est = bias_correct(spe0, draws.draws[:, :k]) if bc else spe0.copy()
    ape_est = float(bias_correct(ape0, draws.draws[:, k])) if bc else ape0

    result = SpeResult(
        us=us,
        estimate=rearrange(est),
        estimate_raw=spe0,
        se=se_spe,
        lower_pointwise=rearrange(est - crit_p * se_spe),
        upper_pointwise=rearrange(est + crit_p * se_spe),
        lower_uniform=rearrange(est - crit_u * se_spe),
        upper_uniform=rearrange(est + crit_u * se_spe),
        ape=ape_est,
        ape_se=se_ape,
        ape_lower=ape_est - crit_a * se_ape,
        ape_upper=ape_est + crit_a * se_ape,
        alpha=alpha,
        bc=bc,
        crit_uniform=crit_u,
        crit_pointwise=crit_p,
        crit_ape=crit_a,
        diagnostics={
            "b_ok": draws.b_ok,
            "failed": len(draws.failed),
            "model": dict(state.base_model.diagnostics),
        },
    )
    return result
