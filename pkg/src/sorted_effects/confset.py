"""Outer confidence sets for the most and least affected subpopulations.

The estimated sets use weak inequalities — least affected means
``Delta(x) <= q_u``, most affected ``Delta(x) >= q_{1-u}`` — so the
boundary unit always belongs to its own set.  The outer
``(1 - alpha)``-confidence sets inflate them:

    cs_least = { x : (Delta(x) - q_u) / se(x) <= c }
    cs_most  = { x : (q_{1-u} - Delta(x)) / se(x) <= c~ }

where ``se(x)`` is the rescaled-IQR bootstrap spread of the draw
``Delta(x) - q``, and the critical values are empirical
``(1 - alpha)``-quantiles of the recentred standardised draws evaluated
at the boundary unit — the unit minimising ``|Delta(x) - q|`` (lowest
row index on ties).  Critical values are floored at zero so the
confidence sets always contain the estimated sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FACTOR, Dataset
from .effects import EffectConfig, EffectVector
from .models import ModelSpec
from .pipeline import AnalysisState
from .resample import (
    BootstrapError,
    BootstrapPlan,
    bootstrap_statistics,
    quantile_left,
    se_iqr,
)
from .spe import weighted_mean, weighted_quantile

__all__ = [
    "SetPair",
    "estimated_sets",
    "SubpopResult",
    "subpop_inference",
    "summarize_affected",
    "project_sets",
]


@dataclass(frozen=True)
class SetPair:
    """Point estimates of the affected sets (weak inequalities)."""

    u: float
    least: np.ndarray
    most: np.ndarray
    threshold_low: float
    threshold_high: float


def estimated_sets(effects: EffectVector, u: float = 0.1) -> SetPair:
    """Most/least-affected sets at quantile index `u`, weak inequalities."""
    if not 0.0 < u <= 0.5:
        raise ValueError("u must lie in (0, 0.5]")
    vals = effects.population
    wts = effects.population_weights
    q_lo = weighted_quantile(vals, wts, u)
    q_hi = weighted_quantile(vals, wts, 1.0 - u)
    least = effects.mask & (effects.delta <= q_lo)
    most = effects.mask & (effects.delta >= q_hi)
    return SetPair(u, least, most, float(q_lo), float(q_hi))


@dataclass(frozen=True)
class SubpopResult:
    """Estimated and outer-confidence affected sets.

    All masks align with the stacked effect vector (length n, or n * T
    for quantile grids); ``unit`` maps entries back to data rows.
    ``cs_least`` contains ``least`` and ``cs_most`` contains ``most`` by
    construction.
    """

    u: float
    alpha: float
    subgroup: np.ndarray
    unit: np.ndarray
    least: np.ndarray
    most: np.ndarray
    cs_least: np.ndarray
    cs_most: np.ndarray
    threshold_low: float
    threshold_high: float
    crit_least: float
    crit_most: float
    diagnostics: dict = field(default_factory=dict)


def _membership_stat(signed_dev: np.ndarray, se: np.ndarray) -> np.ndarray:
    """Standardised deviation with degenerate spreads resolved by sign."""
    out = np.empty(signed_dev.shape)
    ok = se > 0
    out[ok] = signed_dev[ok] / se[ok]
    out[~ok] = np.where(signed_dev[~ok] <= 0, -np.inf, np.inf)
    return out


def subpop_inference(
    data: Dataset,
    formula,
    spec: ModelSpec | None = None,
    config: EffectConfig | None = None,
    u: float = 0.1,
    alpha: float = 0.1,
    plan: BootstrapPlan | None = None,
    samp_weight=None,
    subgroup=None,
    drop_aliased: bool = False,
) -> SubpopResult:
    """Estimate the affected sets and their outer confidence sets.

    Each bootstrap replicate refits the model and redraws every
    population unit's effect together with the two quantile thresholds;
    the per-unit spread of ``Delta(x) - q`` standardises membership.
    Point estimates are reported as-is (no bias correction enters the
    set masks).

    Raises
    ------
    BootstrapError
        If the boundary unit's draws have zero spread, leaving the
        critical value undefined.
    """
    if spec is None:
        spec = ModelSpec()
    if config is None:
        raise ValueError("config (the variable of interest) is required")
    if plan is None:
        plan = BootstrapPlan()
    if not 0.0 < u <= 0.5:
        raise ValueError("u must lie in (0, 0.5]")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")

    state = AnalysisState.build(
        data, formula, spec, config, samp_weight, subgroup, drop_aliased
    )
    pop = state.stacked_mask
    pop_idx = np.flatnonzero(pop)
    m = pop_idx.size

    def set_stat(model, w_units):
        d = state.stack_values(state.evaluator(model))
        w = state.stack_weights(w_units)
        if not np.any(w[pop] > 0):
            raise ValueError("population of interest carries no weight")
        qs = weighted_quantile(d[pop], w[pop], np.array([u, 1.0 - u]))
        return np.concatenate([d[pop_idx], qs])

    base = set_stat(state.base_model, state.w_samp)
    delta0, q_lo0, q_hi0 = base[:m], float(base[m]), float(base[m + 1])

    def stat(w_units):
        return set_stat(state.fit(w_units), w_units)

    draws = bootstrap_statistics(plan, stat, state.n, state.w_samp)
    delta_draws = draws.draws[:, :m]
    dev_lo_draws = delta_draws - draws.draws[:, m][:, None]
    dev_hi_draws = delta_draws - draws.draws[:, m + 1][:, None]

    dev_lo0 = delta0 - q_lo0
    dev_hi0 = delta0 - q_hi0
    se_lo = se_iqr(dev_lo_draws)
    se_hi = se_iqr(dev_hi_draws)

    def critical(dev0, dev_draws, se):
        star = int(np.argmin(np.abs(dev0)))  # lowest index wins ties
        if not se[star] > 0:
            raise BootstrapError(
                "draws at the boundary unit have zero spread; the outer-set"
                " critical value is undefined"
            )
        v = (dev_draws[:, star] - dev0[star]) / se[star]
        return max(float(quantile_left(v, 1.0 - alpha)), 0.0)

    crit_lo = critical(dev_lo0, dev_lo_draws, se_lo)
    crit_hi = critical(dev_hi0, dev_hi_draws, se_hi)

    least = np.zeros_like(pop)
    most = np.zeros_like(pop)
    cs_least = np.zeros_like(pop)
    cs_most = np.zeros_like(pop)
    least[pop_idx] = dev_lo0 <= 0
    most[pop_idx] = dev_hi0 >= 0
    cs_least[pop_idx] = _membership_stat(dev_lo0, se_lo) <= crit_lo
    cs_most[pop_idx] = _membership_stat(-dev_hi0, se_hi) <= crit_hi

    return SubpopResult(
        u=u,
        alpha=alpha,
        subgroup=pop,
        unit=state.stacked_units,
        least=least,
        most=most,
        cs_least=cs_least,
        cs_most=cs_most,
        threshold_low=q_lo0,
        threshold_high=q_hi0,
        crit_least=crit_lo,
        crit_most=crit_hi,
        diagnostics={
            "b_ok": draws.b_ok,
            "failed": len(draws.failed),
            "model": dict(state.base_model.diagnostics),
        },
    )


# ----------------------------------------------------------------------
# summaries and projections
# ----------------------------------------------------------------------

SUMMARY_STATS = ("min", "q1", "median", "mean", "q3", "max")


def summarize_affected(
    data: Dataset,
    result: SubpopResult,
    affected: str = "most",
    vars=None,
    weights: np.ndarray | None = None,
) -> dict[str, dict[str, float]]:
    """Six-number summaries of variables over an estimated affected set.

    Quartiles, the median and the mean are weighted; the extremes are the
    plain min/max over members.  Factors expand to per-level indicator
    columns.  Returns ``{column: {min, q1, median, mean, q3, max}}``.
    """
    if affected not in ("most", "least"):
        raise ValueError("affected must be 'most' or 'least'")
    mask = result.most if affected == "most" else result.least
    if not mask.any():
        raise ValueError(f"the {affected}-affected set is empty")
    if weights is None:
        weights = np.ones(mask.shape[0])
    names = vars if vars is not None else data.names
    out: dict[str, dict[str, float]] = {}
    for var in names:
        if var not in data:
            raise ValueError(f"unknown variable {var!r}")
        if data.kind(var) == FACTOR:
            codes = data.codes(var)[result.unit]
            for j, lvl in enumerate(data.levels(var)):
                out[f"{var}_{lvl}"] = _six_number(
                    (codes == j).astype(float)[mask], weights[mask]
                )
        else:
            x = data.numeric(var)[result.unit]
            out[var] = _six_number(x[mask], weights[mask])
    return out


def _six_number(x: np.ndarray, w: np.ndarray) -> dict[str, float]:
    if x.size == 1:
        q1 = med = q3 = float(x[0])
    else:
        q1, med, q3 = weighted_quantile(x, w, np.array([0.25, 0.5, 0.75]))
    return {
        "min": float(x.min()),
        "q1": float(q1),
        "median": float(med),
        "mean": weighted_mean(x, w),
        "q3": float(q3),
        "max": float(x.max()),
    }


def project_sets(
    data: Dataset,
    result: SubpopResult,
    varx: str,
    vary: str,
    overlap: bool = False,
) -> dict[str, np.ndarray]:
    """2-d projections of the outer confidence sets onto two variables.

    Returns ``{"most": (k, 2) array, "least": (k', 2) array}`` of member
    coordinates at the data-row level.  With ``overlap=False`` rows that
    fall in both confidence sets are removed from both projections.
    """
    for var in (varx, vary):
        if var not in data:
            raise ValueError(f"unknown variable {var!r}")
        if data.kind(var) == FACTOR:
            raise ValueError(f"projection needs numeric variables; {var!r} is a factor")
    units_most = np.unique(result.unit[result.cs_most])
    units_least = np.unique(result.unit[result.cs_least])
    if not overlap:
        both = np.intersect1d(units_most, units_least)
        units_most = np.setdiff1d(units_most, both)
        units_least = np.setdiff1d(units_least, both)
    x = data.numeric(varx)
    y = data.numeric(vary)
    return {
        "most": np.column_stack([x[units_most], y[units_most]]),
        "least": np.column_stack([x[units_least], y[units_least]]),
    }
