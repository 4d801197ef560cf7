"""Per-observation partial effects of a variable of interest.

The partial effect of a variable ``t`` at covariate row ``x = (t, w)`` is
the change in the model prediction when ``t`` moves while ``w`` stays
fixed:

* binary / categorical: ``Delta(x) = g(t1, w) - g(t0, w)`` for two
  levels or values of ``t``;
* continuous: a central difference
  ``[g(t + h, w) - g(t - h, w)] / (2 h)`` with an absolute step ``h``,
  which flows through ``I(...)`` transforms and interactions because the
  shifted datasets are re-encoded from scratch.

Predictions are on the response scale (probabilities for logit/probit),
so effects of binary-outcome models are probability changes.  For
quantile regression the effect is computed per quantile index and the
resulting blocks are stacked in grid order, each carrying weight
``w_i / T`` so the pooled vector integrates uniformly over the grid.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .data import FACTOR, NUMERIC, Dataset
from .formula import DesignError, encode_design, set_variable
from .models import QR, FittedModel, predict

__all__ = [
    "EffectConfig",
    "EffectVector",
    "pe_binary",
    "pe_categorical",
    "pe_continuous",
    "partial_effects",
    "restrict",
    "parse_subgroup",
    "DEFAULT_STEP",
]

#: absolute step for central differences
DEFAULT_STEP = 1e-7

BINARY = "binary"
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
VAR_TYPES = (BINARY, CATEGORICAL, CONTINUOUS)


@dataclass(frozen=True)
class EffectConfig:
    """How to perturb the variable of interest.

    Parameters
    ----------
    var : str
        Column whose effect is measured.
    var_type : str
        One of ``"binary"``, ``"categorical"``, ``"continuous"``.
    compare : tuple of (str, str), optional
        For categorical effects, the (from, to) levels.
    h : float
        Central-difference step for continuous effects.
    """

    var: str
    var_type: str
    compare: tuple[str, str] | None = None
    h: float = DEFAULT_STEP

    def __post_init__(self):
        if self.var_type not in VAR_TYPES:
            raise ValueError(
                f"var_type must be one of {VAR_TYPES}, got {self.var_type!r}"
            )
        if self.var_type == CATEGORICAL and self.compare is not None:
            if len(self.compare) != 2:
                raise ValueError("compare needs exactly two levels")
            if self.compare[0] == self.compare[1]:
                raise ValueError(
                    f"compare levels must differ, got {self.compare!r} twice"
                )
        if self.h <= 0:
            raise ValueError("step h must be positive")


@dataclass(frozen=True)
class EffectVector:
    """Per-observation effects with aligned weights and population mask.

    For quantile regression over T indexes the vector stacks the per-index
    blocks, so ``delta``, ``weights`` and ``mask`` have length ``n * T``
    and ``unit`` maps each entry back to its data row.
    """

    delta: np.ndarray
    weights: np.ndarray
    mask: np.ndarray
    unit: np.ndarray
    n_units: int
    taus: tuple[float, ...] = ()

    def __post_init__(self):
        m = self.delta.shape[0]
        for name in ("weights", "mask", "unit"):
            if getattr(self, name).shape[0] != m:
                raise ValueError(f"{name} not aligned with delta")

    @property
    def population(self) -> np.ndarray:
        """Effects restricted to the population of interest."""
        return self.delta[self.mask]

    @property
    def population_weights(self) -> np.ndarray:
        return self.weights[self.mask]


# ----------------------------------------------------------------------
# counterfactual prediction pairs
# ----------------------------------------------------------------------


class DeltaEvaluator:
    """Reusable effect evaluator: encodes the counterfactual designs once.

    Bootstrap pipelines refit the model hundreds of times on fixed data;
    only the coefficients change, so the two counterfactual design
    matrices are built a single time and each call is a pair of predicted
    differences.
    """

    def __init__(self, data: Dataset, config: EffectConfig, info):
        self.config = config
        var = config.var
        if var not in data:
            raise DesignError(f"variable of interest {var!r} not in data")
        kind = data.kind(var)
        scale = 1.0
        if config.var_type == BINARY:
            if kind == FACTOR:
                levels = data.levels(var)
                if len(levels) != 2:
                    raise ValueError(
                        f"binary variable {var!r} is a factor with"
                        f" {len(levels)} levels; expected 2"
                    )
                lo, hi = levels[0], levels[1]
                d_hi = set_variable(data, var, hi)
                d_lo = set_variable(data, var, lo)
            else:
                vals = np.unique(data.numeric(var))
                if not np.all(np.isin(vals, (0.0, 1.0))):
                    raise ValueError(
                        f"binary variable {var!r} must contain only 0 and 1"
                    )
                d_hi = set_variable(data, var, 1.0)
                d_lo = set_variable(data, var, 0.0)
        elif config.var_type == CATEGORICAL:
            if kind != FACTOR:
                raise ValueError(
                    f"categorical effects need a factor column, {var!r} is numeric"
                )
            levels = data.levels(var)
            if config.compare is None:
                raise ValueError(
                    "categorical effects need compare=(from_level, to_level)"
                )
            lo, hi = config.compare
            for lvl in (lo, hi):
                if lvl not in levels:
                    raise ValueError(
                        f"{lvl!r} is not a level of {var!r}; levels are"
                        f" {list(levels)}"
                    )
            d_hi = set_variable(data, var, hi)
            d_lo = set_variable(data, var, lo)
        else:
            if kind != NUMERIC:
                raise ValueError(
                    f"continuous effects need a numeric column, {var!r} is a factor"
                )
            t = data.numeric(var)
            d_hi = set_variable(data, var, t + config.h)
            d_lo = set_variable(data, var, t - config.h)
            scale = 1.0 / (2.0 * config.h)
        self.X_hi = encode_design(info, d_hi)
        self.X_lo = encode_design(info, d_lo)
        self.scale = scale

    def __call__(self, model: FittedModel) -> np.ndarray:
        """Effect of the configured move under `model`.

        Returns shape (n,) for single fits, (n, T) for quantile grids.
        """
        hi = predict(model, self.X_hi)
        lo = predict(model, self.X_lo)
        return (hi - lo) * self.scale


def _assemble(delta, data, samp_weight, mask, taus) -> EffectVector:
    n = data.n_rows
    w = data.weights(samp_weight) if isinstance(samp_weight, (str, type(None))) \
        else np.asarray(samp_weight, dtype=float)
    if mask is None:
        mask = np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"subgroup mask has shape {mask.shape}, expected ({n},)")
    if not mask.any():
        raise ValueError("subgroup mask selects no rows")
    unit = np.arange(n)
    if delta.ndim == 2:
        T = delta.shape[1]
        return EffectVector(
            delta=delta.ravel(order="F"),
            weights=np.tile(w / T, T),
            mask=np.tile(mask, T),
            unit=np.tile(unit, T),
            n_units=n,
            taus=taus,
        )
    return EffectVector(delta, w, mask, unit, n, ())


def partial_effects(
    model: FittedModel,
    data: Dataset,
    config: EffectConfig,
    samp_weight=None,
    mask=None,
) -> EffectVector:
    """Partial effects of `config.var` for every observation.

    Parameters
    ----------
    model : FittedModel
        Fit carrying the design info used to encode counterfactuals.
    data : Dataset
    config : EffectConfig
    samp_weight : str or ndarray, optional
        Sampling-weight column name (or explicit weights).
    mask : ndarray of bool, optional
        Population of interest; defaults to all rows.
    """
    if model.info is None:
        raise ValueError("model lacks design info; fit it from a formula design")
    ev = DeltaEvaluator(data, config, model.info)
    taus = model.spec.taus if model.method == QR else ()
    return _assemble(ev(model), data, samp_weight, mask, taus)


def pe_binary(model, data, var, samp_weight=None, mask=None) -> EffectVector:
    """Effect of switching a 0/1 (or two-level factor) variable on."""
    cfg = EffectConfig(var, BINARY)
    return partial_effects(model, data, cfg, samp_weight, mask)


def pe_categorical(model, data, var, compare, samp_weight=None, mask=None) -> EffectVector:
    """Effect of moving a factor from `compare[0]` to `compare[1]`."""
    cfg = EffectConfig(var, CATEGORICAL, tuple(compare))
    return partial_effects(model, data, cfg, samp_weight, mask)


def pe_continuous(model, data, var, h=DEFAULT_STEP, samp_weight=None, mask=None) -> EffectVector:
    """Marginal effect of a numeric variable by central difference."""
    cfg = EffectConfig(var, CONTINUOUS, h=h)
    return partial_effects(model, data, cfg, samp_weight, mask)


def restrict(effects: EffectVector, mask: np.ndarray) -> EffectVector:
    """Narrow the population of interest by a per-unit boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (effects.n_units,):
        raise ValueError(
            f"mask has shape {mask.shape}, expected ({effects.n_units},)"
        )
    tiled = mask[effects.unit]
    new_mask = effects.mask & tiled
    if not new_mask.any():
        raise ValueError("restriction leaves an empty population")
    return replace(effects, mask=new_mask)


# ----------------------------------------------------------------------
# subgroup mini-expressions
# ----------------------------------------------------------------------

_CLAUSE = re.compile(
    r"^\s*([A-Za-z_.][\w.]*)\s*(==|!=|<=|>=|<|>)\s*(.+?)\s*$"
)

_NUM_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def parse_subgroup(expr: str, data: Dataset) -> np.ndarray:
    """Evaluate a subgroup expression like ``"age > 30 & ms == 'married'"``.

    Clauses are joined by ``&`` (conjunction only).  Numeric columns
    compare against numbers; factors support ``==`` / ``!=`` against a
    level label (quotes optional).

    Returns
    -------
    ndarray of bool, shape (n_rows,)
    """
    mask = np.ones(data.n_rows, dtype=bool)
    for clause in expr.split("&"):
        m = _CLAUSE.match(clause)
        if not m:
            raise ValueError(f"cannot parse subgroup clause {clause.strip()!r}")
        name, op, lit = m.groups()
        if name not in data:
            raise ValueError(f"subgroup references unknown column {name!r}")
        if data.kind(name) == FACTOR:
            if op not in ("==", "!="):
                raise ValueError(
                    f"factor column {name!r} only supports == and != in subgroups"
                )
            label = lit.strip().strip("'\"")
            levels = data.levels(name)
            if label not in levels:
                raise ValueError(
                    f"{label!r} is not a level of {name!r}; levels are"
                    f" {list(levels)}"
                )
            hit = data.codes(name) == levels.index(label)
            mask &= hit if op == "==" else ~hit
        else:
            try:
                val = float(lit.strip().strip("'\""))
            except ValueError:
                raise ValueError(
                    f"numeric column {name!r} compared against non-number"
                    f" {lit.strip()!r}"
                ) from None
            mask &= _NUM_OPS[op](data.numeric(name), val)
    return mask
