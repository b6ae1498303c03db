"""Empirical partial least squares for a scalar response.

The recursion works on residual matrices. Starting from the centered data
``e_0 = X - mean_x`` and ``f_0 = y - mean_y``, each step computes

* weights  ``w_a = Cov(e_{a-1}, f_{a-1})`` (raw, not normalized)
* scores   ``t_a = e_{a-1} w_a``
* loadings ``p_a = Cov(e_{a-1}, t_a) / Var(t_a)``, ``q_a = Cov(f_{a-1}, t_a) / Var(t_a)``
* deflation ``e_a = e_{a-1} - t_a p_a'``, ``f_a = f_{a-1} - q_a t_a``

with sample moments in place of population ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from modelkit.data_model import Dataset, center, sample_moments
from modelkit.errors import DataError

#: Relative tolerance for the early stop on weights and score variance.
STOP_TOL = 1e-12


@dataclass(frozen=True)
class PlsFit:
    """Result of :func:`pls_fit` after ``m`` completed steps.

    ``weights``, ``x_loadings`` are p x m; ``scores`` is n x m;
    ``y_loadings`` has length m. ``degenerate`` is set when the response
    has no covariance with any predictor, in which case ``m == 0``.
    """

    m: int
    weights: np.ndarray
    scores: np.ndarray
    x_loadings: np.ndarray
    y_loadings: np.ndarray
    mean_x: np.ndarray
    mean_y: float
    e_residual: np.ndarray
    f_residual: np.ndarray
    implied_beta: np.ndarray
    requested_m: int
    degenerate: bool = False

    @property
    def stopped_early(self) -> bool:
        return self.m < self.requested_m


def _cov(a: np.ndarray, b: np.ndarray, denom: int) -> np.ndarray:
    # inputs are column-centered by construction
    return a.T @ b / denom


def pls_fit(d: Dataset, m: int, ddof: int = 1) -> PlsFit:
    """Run ``m`` steps of the PLS recursion on ``d``.

    Stops before step ``a`` when ``||w_a|| <= STOP_TOL * ||cov_xy||`` or
    ``Var(t_a) <= STOP_TOL * ||w_a||^2 * tr(cov_xx)``; the returned ``m`` is
    the number of steps actually completed.
    """
    if d.n < 2:
        raise DataError("pls_fit needs n >= 2")
    upper = min(d.n - 1, d.p)
    if not (1 <= m <= upper):
        raise DataError(f"m={m} out of range 1..{upper} (min(n-1, p))")

    mom = sample_moments(d, ddof=ddof)
    dc, mean_x, mean_y = center(d)
    denom = d.n - ddof
    e = dc.x.copy()
    f = dc.y.copy()
    trace_xx = float(np.trace(mom.cov_xx))
    sxy_norm = float(np.linalg.norm(mom.cov_xy))
    # Cauchy-Schwarz bound on ||cov_xy||, used to detect a degenerate first step
    scale = math.sqrt(max(trace_xx * mom.var_y, 0.0))

    ws, ts, ps, qs = [], [], [], []
    degenerate = sxy_norm <= STOP_TOL * scale
    if not degenerate:
        for _ in range(m):
            w = _cov(e, f, denom)
            w_norm = float(np.linalg.norm(w))
            if w_norm <= STOP_TOL * sxy_norm:
                break
            t = e @ w
            var_t = float(t @ t) / denom
            if var_t <= STOP_TOL * w_norm**2 * trace_xx:
                break
            p_a = _cov(e, t, denom) / var_t
            q_a = float(f @ t) / denom / var_t
            e = e - np.outer(t, p_a)
            f = f - q_a * t
            ws.append(w)
            ts.append(t)
            ps.append(p_a)
            qs.append(q_a)

    k = len(ws)
    W = np.column_stack(ws) if k else np.zeros((d.p, 0))
    T = np.column_stack(ts) if k else np.zeros((d.n, 0))
    P = np.column_stack(ps) if k else np.zeros((d.p, 0))
    q = np.array(qs, dtype=float)
    beta = _beta_from_factors(W, P, q, d.p)
    return PlsFit(
        m=k,
        weights=W,
        scores=T,
        x_loadings=P,
        y_loadings=q,
        mean_x=mean_x,
        mean_y=mean_y,
        e_residual=e,
        f_residual=f,
        implied_beta=beta,
        requested_m=m,
        degenerate=degenerate,
    )


def _beta_from_factors(W, P, q, p):
    # t_a(x) = e_{a-1}(x)' w_a with e_a = e_{a-1} - t_a p_a gives
    # T = E0 W (P'W)^-1, hence beta = W (P'W)^-1 q.
    if W.shape[1] == 0:
        return np.zeros(p)
    return W @ np.linalg.solve(P.T @ W, q)


def implied_beta(fit: PlsFit) -> np.ndarray:
    """Coefficient vector in the original x-space; zeros when ``fit.m == 0``."""
    return _beta_from_factors(fit.weights, fit.x_loadings, fit.y_loadings,
                              fit.mean_x.shape[0])


def predict(fit: PlsFit, x0) -> float:
    """Predict the response at ``x0`` by propagating it through the scores."""
    e = np.asarray(x0, dtype=float) - fit.mean_x
    yhat = fit.mean_y
    for a in range(fit.m):
        t = float(e @ fit.weights[:, a])
        e = e - t * fit.x_loadings[:, a]
        yhat += fit.y_loadings[a] * t
    return float(yhat)


def predict_many(fit: PlsFit, x0) -> np.ndarray:
    """Vectorized :func:`predict` over the rows of ``x0``."""
    e = np.atleast_2d(np.asarray(x0, dtype=float)) - fit.mean_x
    yhat = np.full(e.shape[0], fit.mean_y)
    for a in range(fit.m):
        t = e @ fit.weights[:, a]
        e = e - np.outer(t, fit.x_loadings[:, a])
        yhat += fit.y_loadings[a] * t
    return yhat


def bilinear_check(fit: PlsFit, d: Dataset) -> float:
    """Largest absolute error of the bilinear reconstruction of ``(x, y)``.

    Checks ``x = mean_x + sum_a t_a p_a' + e_m`` and
    ``y = mean_y + sum_a q_a t_a + f_m`` entrywise.
    """
    if d.x.shape != fit.e_residual.shape or d.y.shape != fit.f_residual.shape:
        raise DataError(
            f"shape mismatch: data {d.x.shape}, fit residual {fit.e_residual.shape}"
        )
    x_rec = fit.mean_x + fit.scores @ fit.x_loadings.T + fit.e_residual
    y_rec = fit.mean_y + fit.scores @ fit.y_loadings + fit.f_residual
    return float(max(np.max(np.abs(d.x - x_rec)), np.max(np.abs(d.y - y_rec))))


@dataclass(frozen=True)
class CrossValidation:
    m_star: int
    press: np.ndarray  # press[m - 1] is PRESS with m components
    folds: int
    seed: int


def default_folds(n: int) -> int:
    return 10 if n >= 10 else n


def max_cv_components(n: int, p: int, folds: int) -> int:
    """Largest ``m_max`` accepted by :func:`cross_validate`."""
    return min(n - math.ceil(n / folds) - 1, p)


def cross_validate(d: Dataset, m_max: int, folds: int | None = None,
                   seed: int = 0) -> CrossValidation:
    """K-fold PRESS for ``m = 1..m_max`` with a seeded shuffle.

    ``m_star`` is the smallest ``m`` attaining the minimal PRESS.
    """
    if folds is None:
        folds = default_folds(d.n)
    if not 2 <= folds <= d.n:
        raise DataError(f"folds={folds} out of range 2..{d.n}")
    limit = max_cv_components(d.n, d.p, folds)
    if not 1 <= m_max <= limit:
        raise DataError(f"m_max={m_max} out of range 1..{limit}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(d.n)
    press = np.zeros(m_max)
    for test_idx in np.array_split(order, folds):
        train = np.ones(d.n, dtype=bool)
        train[test_idx] = False
        d_train = Dataset(d.x[train], d.y[train])
        fit = pls_fit(d_train, m_max)
        # predictions for every m from one fit: the first m factors of an
        # m_max-step fit are exactly the m-step fit
        e = d.x[test_idx] - fit.mean_x
        yhat = np.full(len(test_idx), fit.mean_y)
        for a in range(m_max):
            if a < fit.m:
                t = e @ fit.weights[:, a]
                e = e - np.outer(t, fit.x_loadings[:, a])
                yhat = yhat + fit.y_loadings[a] * t
            r = d.y[test_idx] - yhat
            press[a] += float(r @ r)
    m_star = int(np.argmin(press)) + 1  # argmin returns the first minimum
    return CrossValidation(m_star=m_star, press=press, folds=folds, seed=seed)
