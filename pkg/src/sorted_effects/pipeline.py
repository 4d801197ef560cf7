"""Shared plumbing for the inference pipelines (internal).

Bootstrap inference refits the same model on fixed data hundreds of
times with fresh weights.  :class:`AnalysisState` front-loads all the
per-run work — design construction, counterfactual encoding, subgroup
resolution — so each replicate costs one weighted fit plus matrix
products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .effects import DeltaEvaluator, EffectConfig, parse_subgroup
from .formula import Formula, build_design, parse_formula
from .models import QR, FittedModel, ModelSpec, fit_model

__all__ = ["AnalysisState"]


@dataclass
class AnalysisState:
    """Precomputed estimation state for one (data, formula, effect) run."""

    data: Dataset
    formula: Formula
    spec: ModelSpec
    config: EffectConfig
    w_samp: np.ndarray
    mask_units: np.ndarray
    X: np.ndarray = field(init=False)
    y: np.ndarray = field(init=False)
    evaluator: DeltaEvaluator = field(init=False)
    base_model: FittedModel = field(init=False)

    @classmethod
    def build(cls, data, formula, spec, config, samp_weight=None,
              subgroup=None, drop_aliased=False) -> "AnalysisState":
        if isinstance(formula, str):
            formula = parse_formula(formula)
        if isinstance(samp_weight, (str, type(None))):
            w = data.weights(samp_weight)
        else:
            w = np.asarray(samp_weight, dtype=float)
        if subgroup is None:
            mask = np.ones(data.n_rows, dtype=bool)
        elif isinstance(subgroup, str):
            mask = parse_subgroup(subgroup, data)
        else:
            mask = np.asarray(subgroup, dtype=bool)
        if not mask.any():
            raise ValueError("subgroup selects no rows")
        state = cls(data, formula, spec, config, w, mask)
        design = build_design(formula, data, drop_aliased=drop_aliased)
        state.X = design.matrix
        state.y = data.numeric(formula.response)
        state.evaluator = DeltaEvaluator(data, config, design.info)
        state.base_model = fit_model(spec, design, state.y, w)
        return state

    @property
    def n(self) -> int:
        return self.data.n_rows

    @property
    def info(self):
        return self.base_model.info

    def fit(self, w_units: np.ndarray) -> FittedModel:
        return fit_model(self.spec, self.X, self.y, w_units)

    # ------------------------------------------------------------------
    # stacked effect vectors (quantile grids pool over indexes)
    # ------------------------------------------------------------------

    @property
    def n_taus(self) -> int:
        return len(self.spec.taus) if self.spec.method == QR else 1

    def stack_values(self, delta: np.ndarray) -> np.ndarray:
        """Flatten (n, T) effects to tau-major order; identity for (n,)."""
        return delta.ravel(order="F") if delta.ndim == 2 else delta

    def stack_weights(self, w_units: np.ndarray) -> np.ndarray:
        T = self.n_taus
        return np.tile(w_units / T, T) if T > 1 else w_units

    @property
    def stacked_mask(self) -> np.ndarray:
        T = self.n_taus
        return np.tile(self.mask_units, T) if T > 1 else self.mask_units

    @property
    def stacked_units(self) -> np.ndarray:
        idx = np.arange(self.n)
        T = self.n_taus
        return np.tile(idx, T) if T > 1 else idx

    def population_delta(self, model: FittedModel, w_units: np.ndarray):
        """(values, weights) of the effect over the population of interest."""
        d = self.stack_values(self.evaluator(model))
        w = self.stack_weights(w_units)
        m = self.stacked_mask
        vals, wts = d[m], w[m]
        if not np.any(wts > 0):
            raise ValueError("population of interest carries no weight")
        return vals, wts
