"""Classification analysis: who is most and least affected, and how they differ.

Units whose partial effect lies strictly below the ``u``-quantile of the
effect distribution form the least-affected group; those strictly above
the ``(1-u)``-quantile form the most-affected group.  The analysis then
compares weighted moments (or whole distributions) of chosen variables
between the two groups, with bootstrap standard errors and p-values for
the most-vs-least differences.

P-values are bootstrap-t based.  For each variable the observed
statistic is ``|diff| / se``; a replicate's statistic is the recentred
``|diff_draw - diff| / se``, maximised over a family of variables.  With
the family equal to all variables this is the joint (familywise)
p-value, restricted to the levels of one factor it is the within-factor
p-value, and as a singleton it is the pointwise p-value — so the three
are ordered by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FACTOR, Dataset
from .effects import EffectConfig, EffectVector
from .models import ModelSpec
from .pipeline import AnalysisState
from .resample import (
    BootstrapPlan,
    bias_correct,
    bootstrap_statistics,
    rearrange,
    se_iqr,
    uniform_critical_value,
)
from .spe import weighted_quantile

__all__ = [
    "GroupDef",
    "classify_units",
    "report_matrix",
    "group_moments",
    "CaMoments",
    "ca_inference",
    "CaMomentResult",
    "group_distributions",
    "CaDistResult",
    "DistCurves",
    "DEFAULT_RANGE_CB",
]

#: default evaluation grid for distribution curves
DEFAULT_RANGE_CB = tuple(np.arange(1, 100) / 100.0)


@dataclass(frozen=True)
class GroupDef:
    """Most/least-affected group masks, aligned with an effect vector."""

    u: float
    least: np.ndarray
    most: np.ndarray
    threshold_low: float
    threshold_high: float


def classify_units(effects: EffectVector, u: float = 0.1) -> GroupDef:
    """Split the population of interest at the u and 1-u effect quantiles.

    Membership is strict: the least-affected group is
    ``{Delta < q_u}``, the most-affected ``{Delta > q_{1-u}}``, both
    within the population of interest.

    Raises
    ------
    ValueError
        If ``u`` is outside (0, 0.5], or either group comes out empty
        (for example when the effects are constant).
    """
    if not 0.0 < u <= 0.5:
        raise ValueError("u must lie in (0, 0.5]")
    vals = effects.population
    wts = effects.population_weights
    q_lo = weighted_quantile(vals, wts, u)
    q_hi = weighted_quantile(vals, wts, 1.0 - u)
    least = effects.mask & (effects.delta < q_lo)
    most = effects.mask & (effects.delta > q_hi)
    if not least.any() or not most.any():
        tail = "least" if not least.any() else "most"
        raise ValueError(
            f"the {tail}-affected group is empty at u={u:g}; the effects are"
            " too concentrated (constant effects cannot be classified)"
        )
    return GroupDef(u, least, most, float(q_lo), float(q_hi))


# ----------------------------------------------------------------------
# reported variables
# ----------------------------------------------------------------------


def resolve_t(data: Dataset, t) -> list[str]:
    """Accept variable names or a 0/1 selection vector over the columns."""
    names = data.names
    items = list(t)
    if items and all(str(x) in ("0", "1") for x in items):
        if len(items) != len(names):
            raise ValueError(
                f"0/1 selection vector has length {len(items)},"
                f" data has {len(names)} columns"
            )
        return [n for n, keep in zip(names, items) if str(keep) == "1"]
    for name in items:
        if name not in data:
            raise ValueError(f"unknown variable {name!r} in t")
    return [str(name) for name in items]


def report_matrix(data: Dataset, t) -> tuple[list[str], np.ndarray, list[str]]:
    """Expand reported variables into numeric columns.

    Factors become one 0/1 indicator per level (all levels, named
    ``var_level``); numerics pass through.  Returns
    ``(column names, matrix (n, m), owning variable per column)``.
    """
    names, cols, owner = [], [], []
    for var in resolve_t(data, t):
        if data.kind(var) == FACTOR:
            codes = data.codes(var)
            for j, lvl in enumerate(data.levels(var)):
                names.append(f"{var}_{lvl}")
                cols.append((codes == j).astype(float))
                owner.append(var)
        else:
            names.append(var)
            cols.append(data.numeric(var))
            owner.append(var)
    if not cols:
        raise ValueError("t selects no variables")
    return names, np.column_stack(cols), owner


@dataclass(frozen=True)
class CaMoments:
    """Weighted group means of the reported variables."""

    names: list[str]
    most: np.ndarray
    least: np.ndarray

    @property
    def diff(self) -> np.ndarray:
        return self.most - self.least


def group_moments(data: Dataset, effects: EffectVector, groups: GroupDef,
                  t) -> CaMoments:
    """Weighted means of the reported variables in each affected group."""
    names, Z, _ = report_matrix(data, t)
    Zs = Z[effects.unit]
    w = effects.weights
    most = _masked_means(Zs, w, groups.most)
    least = _masked_means(Zs, w, groups.least)
    return CaMoments(names, most, least)


def _masked_means(Zs: np.ndarray, w: np.ndarray, mask: np.ndarray) -> np.ndarray:
    wm = w[mask]
    total = wm.sum()
    if not total > 0:
        raise ValueError("group carries no weight")
    return (Zs[mask] * wm[:, None]).sum(axis=0) / total


# ----------------------------------------------------------------------
# moment inference
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CaMomentResult:
    """Group means, differences and bootstrap inference per variable."""

    names: list[str]
    most: np.ndarray
    most_se: np.ndarray
    least: np.ndarray
    least_se: np.ndarray
    diff: np.ndarray
    diff_se: np.ndarray
    p_pointwise: np.ndarray
    p_joint: np.ndarray
    p_cat: np.ndarray
    cl: str
    u: float
    alpha: float
    bc: bool
    cat: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)


def _p_values(diff0, diff_draws, diff_se, blocks):
    """Single-step bootstrap-t p-values over nested variable families."""
    ok = diff_se > 0
    obs = np.full(diff0.shape, np.nan)
    obs[ok] = np.abs(diff0[ok]) / diff_se[ok]
    recentred = np.full(diff_draws.shape, np.nan)
    recentred[:, ok] = np.abs(diff_draws[:, ok] - diff0[ok]) / diff_se[ok]

    m = diff0.size
    p_point = np.full(m, np.nan)
    p_cat = np.full(m, np.nan)
    p_joint = np.full(m, np.nan)
    sup_all = (
        np.max(recentred[:, ok], axis=1) if ok.any() else None
    )
    for j in range(m):
        if not ok[j]:
            continue
        p_point[j] = float(np.mean(recentred[:, j] > obs[j]))
        p_joint[j] = float(np.mean(sup_all > obs[j]))
        blk = [i for i in blocks[j] if ok[i]]
        sup_blk = np.max(recentred[:, blk], axis=1)
        p_cat[j] = float(np.mean(sup_blk > obs[j]))
    return p_point, p_cat, p_joint


def ca_inference(
    data: Dataset,
    formula,
    spec: ModelSpec | None = None,
    config: EffectConfig | None = None,
    t=(),
    u: float = 0.1,
    cl: str = "both",
    cat=(),
    alpha: float = 0.1,
    plan: BootstrapPlan | None = None,
    bc: bool = True,
    samp_weight=None,
    subgroup=None,
    drop_aliased: bool = False,
) -> CaMomentResult:
    """Bootstrap inference on most/least-affected group means.

    Parameters
    ----------
    t : sequence
        Variables to report (names, or a 0/1 vector over the columns).
    u : float
        Classification quantile index in (0, 0.5].
    cl : str
        ``"both"`` reports the two group means, ``"diff"`` their
        difference; the result carries everything either way.
    cat : sequence of str
        Factor variables whose levels form within-factor p-value
        families.
    bc : bool
        Bias-correct the reported means (and hence differences).

    Notes
    -----
    A replicate whose reclassification leaves a group empty counts as a
    bootstrap failure and is dropped under the usual failure budget.
    """
    if spec is None:
        spec = ModelSpec()
    if config is None:
        raise ValueError("config (the variable of interest) is required")
    if plan is None:
        plan = BootstrapPlan()
    if cl not in ("both", "diff"):
        raise ValueError(f"cl must be 'both' or 'diff', got {cl!r}")
    if not 0.0 < u <= 0.5:
        raise ValueError("u must lie in (0, 0.5]")
    cat = tuple(cat)

    state = AnalysisState.build(
        data, formula, spec, config, samp_weight, subgroup, drop_aliased
    )
    names, Z, owner = report_matrix(data, t)
    for var in cat:
        if var not in data:
            raise ValueError(f"cat names unknown variable {var!r}")
        if data.kind(var) != FACTOR:
            raise ValueError(f"cat variable {var!r} is not a factor")
    blocks = [
        [i for i, o in enumerate(owner) if o == owner[j]] if owner[j] in cat
        else [j]
        for j in range(len(names))
    ]
    Zs = Z[state.stacked_units]
    m = len(names)
    pop = state.stacked_mask

    def moment_stat(model, w_units):
        d = state.stack_values(state.evaluator(model))
        w = state.stack_weights(w_units)
        if not np.any(w[pop] > 0):
            raise ValueError("population of interest carries no weight")
        q_lo, q_hi = weighted_quantile(d[pop], w[pop], np.array([u, 1.0 - u]))
        most = pop & (d > q_hi)
        least = pop & (d < q_lo)
        return np.concatenate([
            _masked_means(Zs, w, most),
            _masked_means(Zs, w, least),
        ])

    base_stat = moment_stat(state.base_model, state.w_samp)
    most0, least0 = base_stat[:m], base_stat[m:]

    def stat(w_units):
        return moment_stat(state.fit(w_units), w_units)

    draws = bootstrap_statistics(plan, stat, state.n, state.w_samp)
    most_draws = draws.draws[:, :m]
    least_draws = draws.draws[:, m:]
    diff_draws = most_draws - least_draws
    diff0 = most0 - least0

    most_se = se_iqr(most_draws)
    least_se = se_iqr(least_draws)
    diff_se = se_iqr(diff_draws)
    p_point, p_cat, p_joint = _p_values(diff0, diff_draws, diff_se, blocks)

    if bc:
        most_est = bias_correct(most0, most_draws)
        least_est = bias_correct(least0, least_draws)
    else:
        most_est, least_est = most0.copy(), least0.copy()

    return CaMomentResult(
        names=names,
        most=most_est,
        most_se=most_se,
        least=least_est,
        least_se=least_se,
        diff=most_est - least_est,
        diff_se=diff_se,
        p_pointwise=p_point,
        p_joint=p_joint,
        p_cat=p_cat,
        cl=cl,
        u=u,
        alpha=alpha,
        bc=bc,
        cat=cat,
        diagnostics={
            "b_ok": draws.b_ok,
            "failed": len(draws.failed),
            "model": dict(state.base_model.diagnostics),
        },
    )


# ----------------------------------------------------------------------
# distribution inference
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DistCurves:
    """Per-variable CDF curves for both groups with uniform bands."""

    points: np.ndarray
    most: np.ndarray
    most_lower: np.ndarray
    most_upper: np.ndarray
    least: np.ndarray
    least_lower: np.ndarray
    least_upper: np.ndarray


@dataclass(frozen=True)
class CaDistResult:
    curves: dict[str, DistCurves]
    u: float
    alpha: float
    bc: bool
    diagnostics: dict = field(default_factory=dict)


def _weighted_ecdf(values, weights, points) -> np.ndarray:
    if values.size == 0:
        raise ValueError("group is empty")
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    total = cw[-1]
    if not total > 0:
        raise ValueError("group carries no weight")
    idx = np.searchsorted(v, points, side="right")
    out = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0) / total
    return out


def group_distributions(
    data: Dataset,
    formula,
    spec: ModelSpec | None = None,
    config: EffectConfig | None = None,
    t=(),
    u: float = 0.1,
    range_cb=DEFAULT_RANGE_CB,
    alpha: float = 0.1,
    plan: BootstrapPlan | None = None,
    bc: bool = True,
    samp_weight=None,
    subgroup=None,
    drop_aliased: bool = False,
) -> CaDistResult:
    """Weighted CDFs of numeric variables in each affected group.

    Evaluation points per variable are weighted quantiles, at the
    indexes in `range_cb`, of the variable pooled over the two groups;
    with ``range_cb=None`` the distinct pooled values are used.  The
    points stay fixed across replicates; only group membership and the
    CDF values are re-estimated.  Bands are uniform over the points of
    each (variable, group) curve, rearranged and clipped to [0, 1].
    """
    if spec is None:
        spec = ModelSpec()
    if config is None:
        raise ValueError("config (the variable of interest) is required")
    if plan is None:
        plan = BootstrapPlan()
    if not 0.0 < u <= 0.5:
        raise ValueError("u must lie in (0, 0.5]")

    state = AnalysisState.build(
        data, formula, spec, config, samp_weight, subgroup, drop_aliased
    )
    t_names = resolve_t(data, t)
    for var in t_names:
        if data.kind(var) == FACTOR:
            raise ValueError(
                f"distribution curves need numeric variables; {var!r} is a"
                " factor (use its level indicators instead)"
            )

    pop = state.stacked_mask

    def groups_for(model, w_units):
        d = state.stack_values(state.evaluator(model))
        w = state.stack_weights(w_units)
        if not np.any(w[pop] > 0):
            raise ValueError("population of interest carries no weight")
        q_lo, q_hi = weighted_quantile(d[pop], w[pop], np.array([u, 1.0 - u]))
        most = pop & (d > q_hi)
        least = pop & (d < q_lo)
        if not least.any() or not most.any():
            raise ValueError("a group is empty in this replicate")
        return most, least

    most0, least0 = groups_for(state.base_model, state.w_samp)
    w0 = state.stack_weights(state.w_samp)

    xs = {var: data.numeric(var)[state.stacked_units] for var in t_names}
    points: dict[str, np.ndarray] = {}
    pooled = most0 | least0
    for var, x in xs.items():
        if range_cb is None:
            points[var] = np.unique(x[pooled])
        else:
            grid = np.asarray(range_cb, dtype=float)
            points[var] = np.unique(
                weighted_quantile(x[pooled], w0[pooled], grid)
            )
    layout = [(var, grp) for var in t_names for grp in ("most", "least")]
    sizes = [points[var].size for var, _ in layout]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def curves_for(most, least, w):
        chunks = []
        for var, grp in layout:
            mask = most if grp == "most" else least
            chunks.append(_weighted_ecdf(xs[var][mask], w[mask], points[var]))
        return np.concatenate(chunks)

    base = curves_for(most0, least0, w0)

    def stat(w_units):
        model = state.fit(w_units)
        most, least = groups_for(model, w_units)
        return curves_for(most, least, state.stack_weights(w_units))

    draws = bootstrap_statistics(plan, stat, state.n, state.w_samp)

    curves: dict[str, dict] = {var: {} for var in t_names}
    for k, (var, grp) in enumerate(layout):
        sl = slice(offsets[k], offsets[k + 1])
        est0 = base[sl]
        block = draws.draws[:, sl]
        se = se_iqr(block)
        crit = uniform_critical_value(block, est0, se, alpha)
        est = bias_correct(est0, block) if bc else est0.copy()
        clip = lambda a: np.clip(rearrange(a), 0.0, 1.0)  # noqa: E731
        curves[var][grp] = (
            clip(est), clip(est - crit * se), clip(est + crit * se)
        )

    out = {
        var: DistCurves(
            points=points[var],
            most=curves[var]["most"][0],
            most_lower=curves[var]["most"][1],
            most_upper=curves[var]["most"][2],
            least=curves[var]["least"][0],
            least_lower=curves[var]["least"][1],
            least_upper=curves[var]["least"][2],
        )
        for var in t_names
    }
    return CaDistResult(
        curves=out,
        u=u,
        alpha=alpha,
        bc=bc,
        diagnostics={"b_ok": draws.b_ok, "failed": len(draws.failed)},
    )
