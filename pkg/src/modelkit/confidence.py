"""Confidence curves and fiducial distributions for scalar parameters.

A confidence curve ``C(eta; Y)`` is a data-dependent distribution function
over ``eta`` that is Uniform(0, 1) at the true value when ``Y`` is drawn from
the model. Quantiles ``C^-1(alpha)`` are one-sided ``alpha`` upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from modelkit.data_model import Dataset, center, ols_fit
from modelkit.errors import ConvergenceError, DataError, ModelkitError


@dataclass(frozen=True)
class ConfidenceCurve:
    evaluate: Callable[[float], float]
    lower: float
    upper: float
    label: str = ""

    def __call__(self, eta):
        return self.evaluate(eta)


def normal_mean_confidence(data, sigma: float) -> ConfidenceCurve:
    """Curve for a normal mean with known ``sigma``: ``Phi((eta - ybar) / (sigma / sqrt(n)))``."""
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.size < 1:
        raise DataError("need at least one observation")
    if not sigma > 0:
        raise DataError("sigma must be positive")
    ybar = float(data.mean())
    se = sigma / math.sqrt(data.size)

    def cdf(eta):
        return special.ndtr((np.asarray(eta, dtype=float) - ybar) / se)

    return ConfidenceCurve(cdf, ybar - 10 * se, ybar + 10 * se,
                           f"normal mean, known sigma={sigma:g}, n={data.size}")


def regression_coef_confidence(d: Dataset, coef_index: int) -> ConfidenceCurve:
    """Student-t curve for one least squares coefficient, ``n - p - 1`` degrees of freedom."""
    n, p = d.n, d.p
    if not 0 <= coef_index < p:
        raise DataError(f"coef_index {coef_index} out of range 0..{p - 1}")
    if n <= p + 1:
        raise DataError(f"need n > p + 1, got n={n}, p={p}")
    beta, intercept = ols_fit(d)
    resid = d.y - intercept - d.x @ beta
    dof = n - p - 1
    s2 = float(resid @ resid) / dof
    dc = center(d)[0]
    if s2 <= 1e-20 * float(dc.y @ dc.y) / dof:
        raise ModelkitError("zero residual variance: t-pivot is degenerate")
    xc = dc.x
    cov_diag = np.linalg.inv(xc.T @ xc)[coef_index, coef_index]
    se = math.sqrt(s2 * cov_diag)
    bj = float(beta[coef_index])

    def cdf(eta):
        return special.stdtr(dof, (np.asarray(eta, dtype=float) - bj) / se)

    return ConfidenceCurve(cdf, bj - 10 * se, bj + 10 * se,
                           f"t-pivot for coefficient {coef_index}, dof={dof}")


def invert(curve: ConfidenceCurve, alpha: float, tol: float = 1e-9) -> float:
    """Return ``eta`` with ``|C(eta) - alpha| <= tol`` by bisection.

    The support hint is widened geometrically, at most 60 times, until it
    brackets ``alpha``.
    """
    if not 0 < alpha < 1:
        raise DataError("alpha must lie strictly between 0 and 1")
    lo, hi = float(curve.lower), float(curve.upper)
    width = max(hi - lo, 1.0)
    for _ in range(60):
        if curve(lo) <= alpha <= curve(hi):
            break
        if curve(lo) > alpha:
            lo -= width
        if curve(hi) < alpha:
            hi += width
        width *= 2
    else:
        raise ConvergenceError(f"support does not bracket alpha={alpha} after 60 expansions")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if curve(mid) < alpha:
            lo = mid
        else:
            hi = mid
    eta = lo if abs(curve(lo) - alpha) <= abs(curve(hi) - alpha) else hi
    if abs(float(curve(eta)) - alpha) > tol:
        raise ConvergenceError(
            f"bisection reached |C(eta) - alpha| = {abs(curve(eta) - alpha):.3g} > {tol}"
        )
    return float(eta)


@dataclass(frozen=True)
class FiducialModel:
    """Simple data-generating model ``y = structural(eta, u)`` with solver ``eta = inverse(y, u)``.

    ``sample_u(rng, size)`` draws the auxiliary variable.
    """

    structural: Callable
    sample_u: Callable[[np.random.Generator, int], np.ndarray]
    inverse: Callable
    label: str = ""


def location_model(scale: float = 1.0) -> FiducialModel:
    return FiducialModel(
        structural=lambda eta, u: eta + u,
        sample_u=lambda rng, size: scale * rng.standard_normal(size),
        inverse=lambda y, u: y - u,
        label=f"location y = eta + u, u ~ N(0, {scale:g}^2)",
    )


def scale_model() -> FiducialModel:
    return FiducialModel(
        structural=lambda eta, u: eta * u,
        sample_u=lambda rng, size: rng.exponential(1.0, size),
        inverse=lambda y, u: y / u,
        label="scale y = eta * u, u ~ Exp(1)",
    )


class FiducialError(ModelkitError):
    def __init__(self, msg, u=None):
        super().__init__(msg)
        self.u = u


def fiducial_distribution(model: FiducialModel, y_observed, draws: int, seed: int) -> np.ndarray:
    """Sample ``eta(y_observed, u_i)`` for ``draws`` auxiliary draws ``u_i``."""
    if draws < 1:
        raise DataError("draws must be at least 1")
    rng = np.random.default_rng(seed)
    u = model.sample_u(rng, draws)
    with np.errstate(all="ignore"):
        eta = np.asarray(model.inverse(y_observed, u), dtype=float)
    bad = ~np.isfinite(eta)
    if np.any(bad):
        u_bad = float(np.asarray(u)[np.argmax(bad)])
        raise FiducialError(f"inverse solver failed at u={u_bad!r}", u=u_bad)
    return eta


def ks_uniform(values) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``values`` and Uniform(0, 1)."""
    u = np.sort(np.clip(np.asarray(values, dtype=float), 0.0, 1.0))
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


@dataclass(frozen=True)
class TrueModel:
    """Simulator ``simulate(rng) -> data`` with the true parameter value ``eta``."""

    simulate: Callable[[np.random.Generator], object]
    eta: float
    label: str = ""


def normal_mean_truth(mu: float, sigma: float, n: int) -> TrueModel:
    return TrueModel(lambda rng: mu + sigma * rng.standard_normal(n), mu,
                     f"N({mu:g}, {sigma:g}^2), n={n}")


def regression_truth(beta, intercept: float, noise_sd: float, n: int,
                     x_seed: int = 0, coef_index: int = 0) -> TrueModel:
    """Fixed design from ``x_seed``; each replicate redraws the normal errors."""
    beta = np.asarray(beta, dtype=float)
    x = np.random.default_rng(x_seed).standard_normal((n, beta.size))
    mean = intercept + x @ beta

    def simulate(rng):
        return Dataset(x, mean + noise_sd * rng.standard_normal(n))

    return TrueModel(simulate, float(beta[coef_index]),
                     f"linear model p={beta.size}, n={n}, coefficient {coef_index}")


def coverage_values(curve_builder: Callable, truth: TrueModel, reps: int, seed: int) -> np.ndarray:
    """``C(eta_true; Y_j)`` for ``reps`` simulated datasets ``Y_j``."""
    rng = np.random.default_rng(seed)
    return np.array([float(curve_builder(truth.simulate(rng))(truth.eta)) for _ in range(reps)])


def uniformity_check(curve_builder: Callable, truth: TrueModel, reps: int, seed: int) -> float:
    """KS distance to Uniform(0, 1) of the curve evaluated at the true parameter."""
    if reps < 100:
        raise DataError("reps must be at least 100")
    return ks_uniform(coverage_values(curve_builder, truth, reps, seed))
