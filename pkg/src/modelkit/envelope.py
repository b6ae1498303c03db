"""Envelope parameterization of a regression model.

``Sigma_X = Phi Delta Phi' + Phi0 Delta0 Phi0'`` with ``B = Phi eta`` and
``[Phi Phi0]`` orthogonal. ``span(Phi)`` is a reducing subspace of
``Sigma_X`` that contains ``span(B)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from modelkit.data_model import Dataset
from modelkit.errors import DataError, ModelkitError
from modelkit.pls_population import (KRYLOV_TOL, PopulationRegression, krylov_space,
                                     random_orthogonal)


class EnvelopeError(ModelkitError):
    """An envelope could not be built or failed its reconstruction check."""


def _orthonormal_completion(phi: np.ndarray) -> np.ndarray:
    p = phi.shape[0]
    if phi.shape[1] == 0:
        return np.eye(p)
    if phi.shape[1] == p:
        return np.zeros((p, 0))
    # null space of phi' through a full SVD
    return scipy.linalg.null_space(phi.T)


def _is_spd(a: np.ndarray) -> bool:
    if a.size == 0:
        return True
    if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, np.max(np.abs(a))):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (a + a.T))[0] > 0)


@dataclass(frozen=True)
class EnvelopeSpec:
    phi: np.ndarray
    phi0: np.ndarray
    delta: np.ndarray
    delta0: np.ndarray
    eta: np.ndarray

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    @property
    def m(self) -> int:
        return self.phi.shape[1]

    @property
    def sigma_x(self) -> np.ndarray:
        s = self.phi @ self.delta @ self.phi.T + self.phi0 @ self.delta0 @ self.phi0.T
        return 0.5 * (s + s.T)

    @property
    def b(self) -> np.ndarray:
        return self.phi @ self.eta


def build_envelope(phi, delta, delta0, eta) -> EnvelopeSpec:
    """Assemble an :class:`EnvelopeSpec`, completing ``phi`` to an orthogonal basis.

    ``delta0`` must be ``(p - m) x (p - m)``; pass an empty array when
    ``m == p``. A 1-d ``eta`` is treated as a single response column.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[0] < phi.shape[1]:
        raise DataError(f"phi must be p x m with m <= p, got {phi.shape}")
    p, m = phi.shape
    gram_dev = np.max(np.abs(phi.T @ phi - np.eye(m))) if m else 0.0
    if gram_dev > 1e-8:
        raise EnvelopeError(f"phi columns are not orthonormal (Gram deviation {gram_dev:.3g})")
    delta = np.asarray(delta, dtype=float).reshape(m, m)
    delta0 = np.asarray(delta0, dtype=float).reshape(p - m, p - m)
    eta = np.asarray(eta, dtype=float)
    if eta.ndim < 2:
        eta = eta.reshape(m, -1) if eta.size else np.zeros((m, 1))
    if eta.shape[0] != m:
        raise DataError(f"eta must have {m} rows, got shape {eta.shape}")
    if not _is_spd(delta):
        raise EnvelopeError("delta is not symmetric positive definite")
    if not _is_spd(delta0):
        raise EnvelopeError("delta0 is not symmetric positive definite")
    phi0 = _orthonormal_completion(phi)
    return EnvelopeSpec(phi, phi0, delta, delta0, eta)


def envelope_from_krylov(model: PopulationRegression, tol: float = KRYLOV_TOL) -> EnvelopeSpec:
    """Envelope whose relevant subspace is the Krylov space of ``(Sigma_x, Sigma_x beta)``."""
    kr = krylov_space(model, "cov", tol)
    if kr.dim == 0:
        raise EnvelopeError("empty envelope: beta is zero")
    phi = kr.basis
    phi0 = _orthonormal_completion(phi)
    S = model.sigma_x
    delta = phi.T @ S @ phi
    delta0 = phi0.T @ S @ phi0
    spec = EnvelopeSpec(phi, phi0, 0.5 * (delta + delta.T), 0.5 * (delta0 + delta0.T),
                        (phi.T @ model.beta).reshape(-1, 1))
    err = reconstruction_error(spec, S)
    if err > 1e-8:
        raise EnvelopeError(
            f"Krylov space is not reducing: relative reconstruction error {err:.3g}"
        )
    return spec


def reconstruction_error(spec: EnvelopeSpec, sigma_x) -> float:
    """Relative Frobenius error of the envelope decomposition against ``sigma_x``."""
    sigma_x = np.asarray(sigma_x, dtype=float)
    return float(np.linalg.norm(spec.sigma_x - sigma_x) / np.linalg.norm(sigma_x))


def check_envelope_conditions(sigma_x, b, phi, tol: float = 1e-8) -> dict:
    """Check ``span(B) <= span(Phi)`` and that ``span(Phi)`` reduces ``sigma_x``.

    Returns ``{"contains_b": bool, "reducing": bool}``.
    """
    S = np.asarray(sigma_x, dtype=float)
    B = np.asarray(b, dtype=float)
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[0] != S.shape[0]:
        phi = phi.T
    resid = np.eye(S.shape[0]) - phi @ phi.T
    contains = np.linalg.norm(resid @ B) <= tol * np.linalg.norm(B)
    reducing = np.linalg.norm(resid @ S @ phi) <= tol * np.linalg.norm(S)
    return {"contains_b": bool(contains), "reducing": bool(reducing)}


def sample_from_envelope(spec: EnvelopeSpec, n: int, noise_var: float, seed: int) -> Dataset:
    """Draw ``x ~ N(0, Sigma_X)`` and ``y = x'B + N(0, noise_var)``; scalar response only."""
    if n < 2:
        raise DataError("n must be at least 2")
    if not noise_var > 0:
        raise DataError("noise_var must be positive")
    if spec.eta.shape[1] != 1:
        raise DataError("sampling supports a single response column only")
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(spec.sigma_x)
    x = rng.standard_normal((n, spec.p)) @ L.T
    y = x @ spec.b[:, 0] + np.sqrt(noise_var) * rng.standard_normal(n)
    return Dataset(x, y)


def random_envelope(rng: np.random.Generator, p: int, m: int, *,
                    eta_scale: float = 1.0) -> EnvelopeSpec:
    """Random envelope of dimension ``m`` with a scalar response.

    ``Delta`` and ``Delta0`` get eigenvalues drawn from ``[1, 5]`` and
    ``[0.5, 3]`` under random rotations; ``eta`` has entries of magnitude
    ``[0.5, 2] * eta_scale`` with random signs.
    """
    if not 1 <= m <= p:
        raise DataError(f"need 1 <= m <= p, got m={m}, p={p}")
    Q = random_orthogonal(rng, p)

    def spd(k, lo, hi):
        if k == 0:
            return np.zeros((0, 0))
        R = random_orthogonal(rng, k)
        a = R @ np.diag(rng.uniform(lo, hi, size=k)) @ R.T
        return 0.5 * (a + a.T)

    delta = spd(m, 1.0, 5.0)
    delta0 = spd(p - m, 0.5, 3.0)
    eta = eta_scale * rng.uniform(0.5, 2.0, size=m) * rng.choice([-1.0, 1.0], size=m)
    return build_envelope(Q[:, :m], delta, delta0, eta)
