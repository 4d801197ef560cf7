"""Bootstrap machinery: replicate weights, draw matrices and band arithmetic.

Two exchangeable-weight schemes are supported:

``nonpar``
    Multinomial resampling.  Replicate weights are the resample counts
    times the sampling weights, which is estimation-equivalent to
    refitting on the resampled rows.
``weighted``
    Independent standard-exponential draws times the sampling weights
    (a Bayesian-bootstrap flavour that never zeroes rows out).

Each replicate ``r`` owns an independent random stream derived from
``(seed, r)`` through a counter-based generator, so draws do not depend
on execution order or thread count: running with 1 or 16 workers gives
bit-identical draw matrices.

Standard errors come from rescaled interquartile ranges of the draws,
and uniform (sup-t) critical values from the empirical distribution of
the largest standardised deviation across coordinates.  Throughout,
empirical quantiles are the left-continuous inverse CDF: the smallest
order statistic whose cumulative share reaches the index.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

__all__ = [
    "BootstrapPlan",
    "BootstrapDraws",
    "BootstrapError",
    "replicate_rng",
    "replicate_weights",
    "bootstrap_statistics",
    "se_iqr",
    "uniform_critical_value",
    "pointwise_critical_value",
    "bias_correct",
    "rearrange",
    "quantile_left",
]

logger = logging.getLogger(__name__)

NONPAR = "nonpar"
WEIGHTED = "weighted"

#: Phi^{-1}(0.75) - Phi^{-1}(0.25), the IQR of a standard normal
_NORMAL_IQR = float(sp.ndtri(0.75) - sp.ndtri(0.25))

#: environment override for worker threads
THREADS_ENV = "SORTED_EFFECTS_THREADS"


class BootstrapError(RuntimeError):
    """Too many replicates failed, or the draw matrix is unusable."""


@dataclass(frozen=True)
class BootstrapPlan:
    """Replication settings shared by all inference routines."""

    boot_type: str = NONPAR
    b: int = 500
    seed: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.boot_type not in (NONPAR, WEIGHTED):
            raise ValueError(
                f"boot_type must be 'nonpar' or 'weighted', got {self.boot_type!r}"
            )
        if self.b < 1:
            raise ValueError("number of replicates b must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class BootstrapDraws:
    """Successful replicate statistics, row-ordered by replicate index.

    Attributes
    ----------
    draws : ndarray, shape (b_ok, k)
    replicate_ids : ndarray, shape (b_ok,)
        Which replicate produced each row; with ``seed`` this pins down
        the exact weight vector that generated it.
    failed : tuple of (int, str)
        Replicate index and reason for every dropped replicate.
    seed : int
    boot_type : str
    """

    draws: np.ndarray
    replicate_ids: np.ndarray
    failed: tuple = ()
    seed: int = 1
    boot_type: str = NONPAR

    @property
    def b_ok(self) -> int:
        return self.draws.shape[0]


def effective_threads(requested: int) -> int:
    """Thread count after the environment override, if any."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, requested)


# ----------------------------------------------------------------------
# replicate weight draws
# ----------------------------------------------------------------------


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Independent counter-based stream for replicate `r` of run `seed`."""
    ss = np.random.SeedSequence(seed, spawn_key=(r,))
    return np.random.Generator(np.random.Philox(ss))


def replicate_weights(plan: BootstrapPlan, r: int, n: int, samp_weight=None) -> np.ndarray:
    """Weight vector for replicate `r`.

    Parameters
    ----------
    plan : BootstrapPlan
    r : int
        Replicate index in ``range(plan.b)``.
    n : int
        Number of observations.
    samp_weight : ndarray, optional
        Sampling weights folded into the replicate weights.

    Returns
    -------
    ndarray, shape (n,)
        ``counts * samp_weight`` under ``nonpar`` (counts summing to n),
        ``exponential * samp_weight`` under ``weighted``.
    """
    if not 0 <= r < plan.b:
        raise ValueError(f"replicate index {r} outside range(0, {plan.b})")
    rng = replicate_rng(plan.seed, r)
    if plan.boot_type == NONPAR:
        base = rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)
    else:
        base = rng.standard_exponential(n)
    if samp_weight is not None:
        base = base * np.asarray(samp_weight, dtype=float)
    return base


def bootstrap_statistics(plan: BootstrapPlan, stat, n: int, samp_weight=None,
                         max_fail_share: float = 0.05) -> BootstrapDraws:
    """Evaluate ``stat(weights)`` across all replicates of a plan.

    Parameters
    ----------
    stat : callable
        Maps a weight vector of shape (n,) to a 1-d statistic vector of
        fixed length.  Exceptions raised inside mark the replicate failed.
    n : int
        Number of observations.
    samp_weight : ndarray, optional
    max_fail_share : float
        Abort when more than this share of replicates fails.

    Returns
    -------
    BootstrapDraws
        Rows in replicate order, failures excluded.  Identical across
        thread counts because every replicate owns its own stream.
    """
    threads = effective_threads(plan.threads)

    def one(r: int):
        w = replicate_weights(plan, r, n, samp_weight)
        try:
            return np.asarray(stat(w), dtype=float), None
        except Exception as exc:  # noqa: BLE001 - failure accounting
            return None, f"{type(exc).__name__}: {exc}"

    if threads == 1:
        results = [one(r) for r in range(plan.b)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(plan.b)))

    rows, ids, failed = [], [], []
    for r, (row, err) in enumerate(results):
        if err is None:
            rows.append(row)
            ids.append(r)
        else:
            failed.append((r, err))
    if failed:
        logger.info("dropped %d/%d bootstrap replicates", len(failed), plan.b)
    if len(failed) > max_fail_share * plan.b:
        examples = "; ".join(err for _, err in failed[:3])
        raise BootstrapError(
            f"{len(failed)} of {plan.b} bootstrap replicates failed"
            f" (limit {max_fail_share:.0%}): {examples}"
        )
    if not rows:
        raise BootstrapError("all bootstrap replicates failed")
    return BootstrapDraws(
        draws=np.vstack(rows),
        replicate_ids=np.asarray(ids),
        failed=tuple(failed),
        seed=plan.seed,
        boot_type=plan.boot_type,
    )


# ----------------------------------------------------------------------
# draw summaries
# ----------------------------------------------------------------------


def _draw_matrix(draws) -> np.ndarray:
    a = draws.draws if isinstance(draws, BootstrapDraws) else np.asarray(draws, float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def quantile_left(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """Left-continuous (inverse-CDF) empirical quantile along an axis."""
    values = np.asarray(values, dtype=float)
    m = values.shape[axis]
    k = max(int(np.ceil(q * m)) - 1, 0)
    return np.take(np.sort(values, axis=axis), min(k, m - 1), axis=axis)


def se_iqr(draws) -> np.ndarray:
    """Rescaled-interquartile-range standard errors, one per coordinate.

    ``(Q_0.75 - Q_0.25) / (Phi^{-1}(0.75) - Phi^{-1}(0.25))`` of the
    bootstrap draws; robust to stray diverged replicates.
    """
    a = _draw_matrix(draws)
    hi = quantile_left(a, 0.75, axis=0)
    lo = quantile_left(a, 0.25, axis=0)
    return (hi - lo) / _NORMAL_IQR


def uniform_critical_value(draws, center, se, alpha: float) -> float:
    """Sup-t critical value for a uniform confidence band.

    The (1 - alpha) empirical quantile over replicates of
    ``max_c |draw_rc - center_c| / se_c``.  Coordinates with zero
    standard error are excluded (and logged); if every coordinate is
    degenerate the band is undefined.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    a = _draw_matrix(draws)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    se = np.atleast_1d(np.asarray(se, dtype=float))
    ok = se > 0
    if not ok.any():
        raise BootstrapError(
            "all coordinates have zero bootstrap spread; no band exists"
        )
    if not ok.all():
        logger.info(
            "uniform band: excluding %d degenerate coordinate(s)",
            int((~ok).sum()),
        )
    t = np.max(np.abs(a[:, ok] - center[ok]) / se[ok], axis=1)
    return float(quantile_left(t, 1.0 - alpha))


def pointwise_critical_value(alpha: float) -> float:
    """Two-sided normal critical value ``Phi^{-1}(1 - alpha/2)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    return float(sp.ndtri(1.0 - alpha / 2.0))


def bias_correct(estimate, draws) -> np.ndarray:
    """Bootstrap bias correction: ``2 * estimate - mean(draws)``."""
    a = _draw_matrix(draws)
    est = np.atleast_1d(np.asarray(estimate, dtype=float))
    out = 2.0 * est - a.mean(axis=0)
    return out if np.ndim(estimate) else out[0]


def rearrange(values: np.ndarray) -> np.ndarray:
    """Monotone rearrangement over an ordered grid: ascending sort.

    Applied to estimated curves and band endpoints that are monotone in
    population but may wiggle in sample.  Idempotent, and it preserves
    pointwise ordering between curves: if ``a <= b`` elementwise then
    ``sort(a) <= sort(b)`` elementwise.
    """
    return np.sort(np.asarray(values, dtype=float))
