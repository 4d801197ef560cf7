"""Model fitting: weighted OLS, binary-outcome MLE and quantile regression.

All fitters take a design matrix (a :class:`~sorted_effects.formula.DesignMatrix`
or a plain 2-d array), a response vector and optional nonnegative weights.
They return a :class:`FittedModel` carrying coefficients, the design info
(when available) and convergence diagnostics.

Estimators
----------
``fit_ols``
    Weighted least squares solved through a pivoted orthogonal
    factorisation, never the normal equations.
``fit_binary_mle``
    Logit or probit maximum likelihood via Newton-Raphson in IRLS form
    with step halving.
``fit_qr``
    Koenker-Bassett check-function minimisation, one quantile index at a
    time, via a primal-dual interior-point method on the linear-program
    formulation with a Mehrotra corrector, followed by a vertex-polish
    step that recovers the exact basic solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import special as sp

from .formula import DesignInfo, DesignMatrix

__all__ = [
    "ModelSpec",
    "FittedModel",
    "FitError",
    "ConvergenceError",
    "SeparationError",
    "RankError",
    "fit_ols",
    "fit_binary_mle",
    "fit_qr",
    "fit_model",
    "predict",
    "log_likelihood",
]

OLS = "ols"
LOGIT = "logit"
PROBIT = "probit"
QR = "qr"

METHODS = (OLS, LOGIT, PROBIT, QR)

#: default quantile-index grid for quantile regression
DEFAULT_TAUS = tuple(np.arange(5, 96) / 100.0)


class FitError(RuntimeError):
    """Model fitting failed."""


class ConvergenceError(FitError):
    """Iteration limit reached before the convergence criteria."""


class SeparationError(FitError):
    """Binary MLE diverged with fitted probabilities at the boundary."""


class RankError(FitError):
    """The (weighted) design lost full column rank."""


@dataclass(frozen=True)
class ModelSpec:
    """What to fit: a method name plus, for ``qr``, a quantile grid."""

    method: str = OLS
    taus: tuple[float, ...] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; one of {METHODS}")
        if self.method == QR:
            taus = self.taus if self.taus else DEFAULT_TAUS
            if any(not 0.0 < t < 1.0 for t in taus):
                raise ValueError("quantile indexes must lie strictly in (0, 1)")
            object.__setattr__(self, "taus", tuple(float(t) for t in taus))
        elif self.taus:
            raise ValueError(f"taus only apply to method 'qr', not {self.method!r}")


@dataclass(frozen=True)
class FittedModel:
    """Coefficients plus provenance.

    ``beta`` has shape (p,) for single-fit methods and (p, T) for
    quantile regression with T quantile indexes.
    """

    spec: ModelSpec
    beta: np.ndarray
    info: DesignInfo | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def method(self) -> str:
        return self.spec.method


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------


def _as_matrix(X) -> tuple[np.ndarray, DesignInfo | None]:
    if isinstance(X, DesignMatrix):
        return X.matrix, X.info
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError("design must be a 2-d array")
    return arr, None


def _check_weights(w, n: int) -> np.ndarray:
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights have shape {w.shape}, expected ({n},)")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise ValueError("weights sum to zero")
    return w


# ----------------------------------------------------------------------
# weighted least squares
# ----------------------------------------------------------------------


def fit_ols(X, y, w=None) -> FittedModel:
    """Weighted least squares.

    Minimises ``sum_i w_i (y_i - x_i'b)^2`` via a column-pivoted QR
    factorisation of the weight-scaled design (LAPACK ``gelsy``), which
    avoids the conditioning loss of the normal equations.

    Parameters
    ----------
    X : DesignMatrix or ndarray, shape (n, p)
    y : ndarray, shape (n,)
    w : ndarray, shape (n,), optional
        Nonnegative weights; rows with zero weight drop out.

    Raises
    ------
    RankError
        If the weighted design has rank below p.
    """
    A, info = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    w = _check_weights(w, n)
    sw = np.sqrt(w)
    As = A * sw[:, None]
    # rank from singular values; the lstsq driver's own estimate can miss
    # exactly duplicated columns
    s = sla.svdvals(As)
    tol = (s[0] if s.size else 0.0) * max(n, p) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if rank < p:
        raise RankError(
            f"weighted design has rank {rank} < {p} columns"
        )
    beta, *_ = sla.lstsq(As, y * sw, lapack_driver="gelsy")
    return FittedModel(ModelSpec(OLS), beta, info, {"rank": rank})


# ----------------------------------------------------------------------
# binary-outcome maximum likelihood
# ----------------------------------------------------------------------


def _logit_mu(eta):
    return sp.expit(eta)


def _logit_loglik(eta, y, w):
    # log sigma(eta) = -log(1 + exp(-eta)); stable on both tails
    return float(np.sum(w * (y * -np.logaddexp(0.0, -eta)
                             + (1.0 - y) * -np.logaddexp(0.0, eta))))


def _probit_loglik(eta, y, w):
    return float(np.sum(w * (y * sp.log_ndtr(eta)
                             + (1.0 - y) * sp.log_ndtr(-eta))))


def fit_binary_mle(X, y, w=None, link: str = LOGIT,
                   max_iter: int = 50, grad_tol: float = 1e-8) -> FittedModel:
    """Logit or probit regression by Newton-Raphson (IRLS form).

    The update solves the Fisher-scoring system and halves the step while
    the weighted log-likelihood decreases.  Convergence is declared on
    ``max |score| <= grad_tol``; a fit stalled by step halving is still
    accepted when the score is within two orders of that.

    Raises
    ------
    SeparationError
        When the classes are separated: either the iteration diverges
        with fitted probabilities pinned to 0/1, or it "converges" at a
        point where every fitted probability agrees with its outcome to
        within 1e-6 (complete separation, no finite optimum).
    ConvergenceError
        On non-convergence for any other reason.
    RankError
        If the Fisher information is singular.
    """
    if link not in (LOGIT, PROBIT):
        raise ValueError(f"link must be 'logit' or 'probit', got {link!r}")
    A, dinfo = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    w = _check_weights(w, n)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("binary response must contain only 0 and 1")

    loglik = _logit_loglik if link == LOGIT else _probit_loglik
    beta = np.zeros(p)
    eta = A @ beta
    ll = loglik(eta, y, w)
    eps = 1e-12
    converged = False
    it = 0

    def score_and_irls(eta):
        if link == LOGIT:
            mu = sp.expit(eta)
            return mu, w * (y - mu), w * np.clip(mu * (1.0 - mu), eps, None)
        mu = sp.ndtr(eta)
        pq = np.clip(mu * (1.0 - mu), eps, None)
        phi = np.exp(-0.5 * eta**2) / np.sqrt(2.0 * np.pi)
        return mu, w * phi * (y - mu) / pq, w * phi**2 / pq

    for it in range(1, max_iter + 1):
        mu, score_resid, irls_w = score_and_irls(eta)
        score = A.T @ score_resid
        if np.max(np.abs(score)) <= grad_tol:
            converged = True
            break

        fisher = (A * irls_w[:, None]).T @ A
        try:
            chol = sla.cho_factor(fisher)
        except sla.LinAlgError:
            raise RankError(
                "Fisher information is singular; weighted design is rank"
                " deficient"
            ) from None
        step = sla.cho_solve(chol, score)

        # step halving: never accept a decrease in the log-likelihood
        scale, accepted = 1.0, False
        for _ in range(30):
            cand = beta + scale * step
            cand_ll = loglik(A @ cand, y, w)
            if cand_ll >= ll - 1e-12 * (1.0 + abs(ll)):
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        beta, eta, ll = cand, A @ cand, cand_ll

    mu, score_resid, _ = score_and_irls(eta)
    score = A.T @ score_resid
    grad_norm = float(np.max(np.abs(score)))
    converged = converged or grad_norm <= 100.0 * grad_tol
    active = w > 0
    if not converged:
        if np.any((mu[active] < 1e-10) | (mu[active] > 1.0 - 1e-10)):
            raise SeparationError(
                f"{link} fit did not converge in {max_iter} iterations and"
                " fitted probabilities reached the boundary; the classes are"
                " (quasi-)separated"
            )
        raise ConvergenceError(
            f"{link} fit did not converge in {max_iter} iterations"
            f" (max |score| = {grad_norm:.3e})"
        )
    if np.all(np.abs(mu[active] - y[active]) < 1e-6):
        raise SeparationError(
            f"{link} fit reproduces every outcome exactly; the classes are"
            " completely separated and no finite optimum exists"
        )
    diag = {"iterations": it, "grad_norm": grad_norm, "loglik": ll}
    return FittedModel(ModelSpec(link), beta, dinfo, diag)


# ----------------------------------------------------------------------
# quantile regression
# ----------------------------------------------------------------------


def _check_loss(r: np.ndarray, tau: float) -> float:
    return float(np.sum(r * (tau - (r < 0))))


def _qr_interior_point(A, b, tau, tol=1e-7, max_iter=100):
    """Frisch-Newton primal-dual interior point for one quantile index.

    Solves the dual box-constrained LP

        max b'd  subject to  A'd = (1 - tau) A'e,  0 <= d <= e

    whose equality multiplier is the coefficient vector.  Returns
    ``(beta, d, gap, iterations)``.
    """
    n, p = A.shape
    e = np.ones(n)
    c = (1.0 - tau) * (A.T @ e)

    beta, *_ = sla.lstsq(A, b, lapack_driver="gelsy")
    r = b - A @ beta
    delta = max(1e-4, 1e-4 * float(np.max(np.abs(r), initial=0.0)))
    z = np.maximum(-r, 0.0) + delta
    wv = np.maximum(r, 0.0) + delta
    d = np.full(n, 1.0 - tau)
    s = e - d

    gap = float(z @ d + wv @ s)
    step_scale = 0.99995
    for it in range(1, max_iter + 1):
        if gap < tol:
            break
        q = z / d + wv / s
        qinv = 1.0 / q
        rp = c - A.T @ d
        resid = b - A @ beta  # stationarity residual with exact z-w cancel

        AQ = A * qinv[:, None]
        M = AQ.T @ A
        try:
            chol = sla.cho_factor(M)
        except sla.LinAlgError:
            raise RankError(
                "quantile regression design lost full rank under the"
                " current weights"
            ) from None

        def solve_direction(rhs2):
            dbeta = sla.cho_solve(chol, AQ.T @ rhs2 - rp)
            dd = qinv * (rhs2 - A @ dbeta)
            return dbeta, dd

        # affine (predictor) direction
        dbeta_a, dd_a = solve_direction(resid)
        dz_a = -z - (z / d) * dd_a
        dw_a = -wv + (wv / s) * dd_a

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        ap = min(max_step(d, dd_a), max_step(s, -dd_a))
        ad = min(max_step(z, dz_a), max_step(wv, dw_a))
        gap_aff = float((z + ad * dz_a) @ (d + ap * dd_a)
                        + (wv + ad * dw_a) @ (s - ap * dd_a))
        mu = (max(gap_aff, 0.0) / gap) ** 3 * gap / (2.0 * n)

        # corrector direction with second-order complementarity terms
        rhs2 = (resid + mu * (1.0 / d - 1.0 / s)
                - (dd_a * dz_a) / d - (dd_a * dw_a) / s)
        dbeta, dd = solve_direction(rhs2)
        dz = mu / d - z - (z / d) * dd - (dd_a * dz_a) / d
        dw = mu / s - wv + (wv / s) * dd + (dd_a * dw_a) / s

        ap = step_scale * min(max_step(d, dd), max_step(s, -dd))
        ad = step_scale * min(max_step(z, dz), max_step(wv, dw))
        d = d + ap * dd
        s = s - ap * dd
        z = z + ad * dz
        wv = wv + ad * dw
        beta = beta + ad * dbeta
        gap = float(z @ d + wv @ s)
    else:
        it = max_iter
    return beta, d, gap, it


def _qr_polish(A, b, tau, beta_ip, d):
    """Snap an interior-point solution to the optimal basic solution.

    The optimal vertex interpolates p observations.  Candidate rows are
    ranked by interiority of the dual variable, a full-rank basis is
    selected greedily, and the exact solve is adopted whenever it does
    not worsen the check loss.
    """
    n, p = A.shape
    order = np.argsort(-np.minimum(d, 1.0 - d), kind="stable")
    basis: list[int] = []
    Q = np.empty((p, 0))
    for idx in order:
        row = A[idx]
        r = row - Q @ (Q.T @ row)
        r = r - Q @ (Q.T @ r)
        norm = np.linalg.norm(r)
        if norm > 1e-10 * max(1.0, np.linalg.norm(row)):
            Q = np.column_stack([Q, r / norm])
            basis.append(int(idx))
            if len(basis) == p:
                break
    if len(basis) < p:
        return beta_ip
    try:
        beta_v = sla.solve(A[basis], b[basis])
    except sla.LinAlgError:
        return beta_ip
    loss_ip = _check_loss(b - A @ beta_ip, tau)
    loss_v = _check_loss(b - A @ beta_v, tau)
    if loss_v <= loss_ip + 1e-9 * (1.0 + abs(loss_ip)):
        return beta_v
    return beta_ip


def fit_qr(X, y, w=None, taus=None, tol: float = 1e-7,
           max_iter: int = 100) -> FittedModel:
    """Quantile regression over a grid of quantile indexes.

    Each index is fitted independently by the interior-point method; the
    weighted problem folds the weights into the rows, since
    ``w * rho_tau(r) = rho_tau(w * r)`` for nonnegative ``w``.

    Parameters
    ----------
    X : DesignMatrix or ndarray, shape (n, p)
    y : ndarray, shape (n,)
    w : ndarray, optional
        Nonnegative weights; zero-weight rows are removed.
    taus : sequence of float, optional
        Quantile indexes in (0, 1); defaults to 0.05, 0.06, ..., 0.95.
    tol : float
        Duality-gap tolerance.

    Returns
    -------
    FittedModel
        ``beta`` has shape (p, len(taus)).
    """
    A, dinfo = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    w = _check_weights(w, n)
    spec = ModelSpec(QR, tuple(taus) if taus is not None else ())
    taus = spec.taus

    active = w > 0
    Aw = A[active] * w[active, None]
    bw = y[active] * w[active]
    if Aw.shape[0] < p:
        raise RankError(
            f"only {Aw.shape[0]} rows carry positive weight for {p} columns"
        )

    betas = np.empty((p, len(taus)))
    gaps, iters = [], []
    for k, tau in enumerate(taus):
        beta, d, gap, it = _qr_interior_point(Aw, bw, tau, tol, max_iter)
        if gap >= tol:
            raise ConvergenceError(
                f"quantile regression at tau={tau:g} stalled with duality"
                f" gap {gap:.3e} after {it} iterations"
            )
        betas[:, k] = _qr_polish(Aw, bw, tau, beta, d)
        gaps.append(gap)
        iters.append(it)
    diag = {"duality_gap": gaps, "iterations": iters}
    return FittedModel(spec, betas, dinfo, diag)


# ----------------------------------------------------------------------
# dispatch and prediction
# ----------------------------------------------------------------------


def fit_model(spec: ModelSpec, X, y, w=None) -> FittedModel:
    """Fit by method name; convenience dispatcher for pipelines."""
    if spec.method == OLS:
        return fit_ols(X, y, w)
    if spec.method in (LOGIT, PROBIT):
        return fit_binary_mle(X, y, w, link=spec.method)
    return fit_qr(X, y, w, taus=spec.taus)


def predict(model: FittedModel, X) -> np.ndarray:
    """Model predictions on the response scale.

    OLS and quantile regression return linear indexes; logit and probit
    return probabilities.  Quantile regression returns shape
    (n, len(taus)), everything else (n,).
    """
    A, dinfo = _as_matrix(X)
    if model.info is not None and dinfo is not None:
        if dinfo.column_names != model.info.column_names:
            raise ValueError(
                "design columns do not match the fitted model;"
                f" expected {list(model.info.column_names)}"
            )
    if model.info is not None and A.shape[1] != model.beta.shape[0]:
        raise ValueError(
            f"design has {A.shape[1]} columns, model expects"
            f" {model.beta.shape[0]}"
        )
    eta = A @ model.beta
    if model.method == LOGIT:
        return sp.expit(eta)
    if model.method == PROBIT:
        return sp.ndtr(eta)
    return eta


def log_likelihood(model: FittedModel, X, y, w=None) -> float:
    """Weighted log-likelihood of a binary-outcome fit (diagnostics)."""
    A, _ = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    w = _check_weights(w, A.shape[0])
    eta = A @ model.beta
    if model.method == LOGIT:
        return _logit_loglik(eta, y, w)
    if model.method == PROBIT:
        return _probit_loglik(eta, y, w)
    raise ValueError("log_likelihood applies to logit/probit fits")
