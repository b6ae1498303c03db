"""Population PLS on exact second moments, with its two characterizations.

A regression model with random predictors is summarized by ``(Sigma_x, beta,
sigma^2)``. Running the PLS recursion on exact moments terminates after ``m``
steps, where ``m`` is both the number of distinct eigenvalues of ``Sigma_x``
whose eigenspaces carry part of ``beta`` and the dimension of the Krylov space
generated from ``beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from modelkit.errors import ConvergenceError, DataError

GROUP_TOL = 1e-8
RELEVANCE_TOL = 1e-10
KRYLOV_TOL = 1e-8
STOP_TOL = 1e-10


@dataclass(frozen=True)
class PopulationRegression:
    """Exact moment description of ``y = mu_y + beta'(x - mu_x) + e``."""

    sigma_x: np.ndarray
    beta: np.ndarray
    noise_var: float = 1.0
    mu_x: np.ndarray | None = None
    mu_y: float = 0.0

    def __post_init__(self):
        s = np.array(self.sigma_x, dtype=float)
        b = np.array(self.beta, dtype=float).reshape(-1)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise DataError(f"sigma_x must be square, got shape {s.shape}")
        p = s.shape[0]
        if b.shape[0] != p:
            raise DataError(f"beta has length {b.shape[0]}, expected {p}")
        if np.max(np.abs(s - s.T)) > 1e-12:
            raise DataError("sigma_x is not symmetric")
        s = 0.5 * (s + s.T)
        ev = np.linalg.eigvalsh(s)
        if ev[0] <= 1e-10 * ev[-1] or ev[-1] <= 0:
            raise DataError(f"sigma_x is not positive definite (min eigenvalue {ev[0]:.3g})")
        if not self.noise_var > 0:
            raise DataError("noise_var must be positive")
        mu = np.zeros(p) if self.mu_x is None else np.array(self.mu_x, dtype=float)
        for a in (s, b, mu):
            a.setflags(write=False)
        object.__setattr__(self, "sigma_x", s)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "mu_x", mu)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def p(self) -> int:
        return self.sigma_x.shape[0]

    @property
    def cov_xy(self) -> np.ndarray:
        return self.sigma_x @ self.beta

    @property
    def var_y(self) -> float:
        return float(self.beta @ self.sigma_x @ self.beta) + self.noise_var


@dataclass(frozen=True)
class PopulationPls:
    betas: list  # betas[a - 1] is the implied coefficient after step a
    m: int
    residual_norms: list = field(default_factory=list)


def population_pls(model: PopulationRegression, max_steps: int | None = None) -> PopulationPls:
    """Run the PLS recursion on exact moments until the y-residual vanishes.

    Residuals are carried as coefficient vectors on the centered ``x``:
    ``e_a = A_a (x - mu_x)`` and ``f_a = b_a'(x - mu_x) + eps``, where the
    noise ``eps`` is untouched by deflation. The recursion stops at the
    first ``a`` with ``||b_a|| <= STOP_TOL * ||beta||``.
    """
    p = model.p
    if max_steps is None:
        max_steps = p
    if not 0 <= max_steps <= p:
        raise DataError(f"max_steps={max_steps} out of range 0..{p}")
    S = model.sigma_x
    beta = model.beta
    beta_norm = float(np.linalg.norm(beta))
    if beta_norm == 0.0:
        return PopulationPls(betas=[], m=0, residual_norms=[])

    A = np.eye(p)
    b = beta.copy()
    betas, norms = [], []
    for _ in range(max_steps):
        w = A @ S @ b                      # Cov(e, f)
        c = A.T @ w                        # t = c'(x - mu_x)
        var_t = float(c @ S @ c)
        if var_t <= 0.0:
            break
        p_a = A @ S @ c / var_t            # Cov(e, t) / Var(t)
        q_a = float(b @ S @ c) / var_t     # Cov(f, t) / Var(t)
        A = A - np.outer(p_a, c)
        b = b - q_a * c
        betas.append(beta - b)
        r = float(np.linalg.norm(b))
        norms.append(r)
        if r <= STOP_TOL * beta_norm:
            return PopulationPls(betas=betas, m=len(betas), residual_norms=norms)
    achieved = norms[-1] if norms else beta_norm
    raise ConvergenceError(
        f"population PLS did not stop within {max_steps} steps "
        f"(residual norm {achieved:.3g}, relative {achieved / beta_norm:.3g})",
        residual=achieved,
    )


@dataclass(frozen=True)
class KrylovResult:
    basis: np.ndarray
    dim: int
    generator: np.ndarray


def krylov_basis(S: np.ndarray, v: np.ndarray, tol: float = KRYLOV_TOL,
                 max_dim: int | None = None) -> KrylovResult:
    """Orthonormal basis of ``span{v, S v, S^2 v, ...}``.

    Classical Gram-Schmidt with one reorthogonalization pass. The next
    candidate is ``S`` applied to the last admitted direction; it is admitted
    iff its residual after projection exceeds ``tol`` times its norm.
    """
    p = S.shape[0]
    if max_dim is None:
        max_dim = p
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return KrylovResult(np.zeros((p, 0)), 0, v)
    Q = [v / nv]
    while len(Q) < max_dim:
        cand = S @ Q[-1]
        cn = float(np.linalg.norm(cand))
        if cn == 0.0:
            break
        Qm = np.column_stack(Q)
        r = cand - Qm @ (Qm.T @ cand)
        r = r - Qm @ (Qm.T @ r)
        rn = float(np.linalg.norm(r))
        if rn <= tol * cn:
            break
        Q.append(r / rn)
    return KrylovResult(np.column_stack(Q), len(Q), v)


def krylov_space(model: PopulationRegression, generator: str = "cov",
                 tol: float = KRYLOV_TOL) -> KrylovResult:
    """Krylov space of ``Sigma_x`` from ``Sigma_x beta`` ("cov") or ``Sigma_x^-1 beta`` ("precision")."""
    if tol <= 0:
        raise DataError("tol must be positive")
    if generator == "cov":
        g = model.sigma_x @ model.beta
    elif generator == "precision":
        g = np.linalg.solve(model.sigma_x, model.beta)
    else:
        raise DataError(f"unknown generator {generator!r}; use 'cov' or 'precision'")
    return krylov_basis(model.sigma_x, g, tol)


@dataclass(frozen=True)
class RelevantComponents:
    eigenvalues: np.ndarray     # descending
    eigenvectors: np.ndarray    # columns match eigenvalues
    gamma: np.ndarray           # beta = eigenvectors @ gamma
    groups: list                # index lists of (numerically) equal eigenvalues
    relevant_groups: list       # positions into ``groups`` with nonzero projection

    @property
    def count(self) -> int:
        return len(self.relevant_groups)


def relevant_components(model: PopulationRegression, group_tol: float = GROUP_TOL,
                        relevance_tol: float = RELEVANCE_TOL) -> RelevantComponents:
    """Expand ``beta`` in eigenvectors of ``Sigma_x`` and find relevant eigenspaces."""
    ev, D = np.linalg.eigh(model.sigma_x)
    ev, D = ev[::-1], D[:, ::-1]
    gamma = D.T @ model.beta
    scale = group_tol * ev[0]
    groups = [[0]]
    for i in range(1, len(ev)):
        if ev[groups[-1][0]] - ev[i] <= scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    bn = float(np.linalg.norm(model.beta))
    relevant = [
        g for g, idx in enumerate(groups)
        if bn > 0 and np.linalg.norm(gamma[idx]) > relevance_tol * bn
    ]
    return RelevantComponents(ev, D, gamma, groups, relevant)


def krylov_projection_beta(model: PopulationRegression, m: int,
                           tol: float = KRYLOV_TOL) -> np.ndarray:
    """``K (K' S K)^-1 K' S beta`` for the first ``m`` Krylov directions.

    This is the ``Sigma_x``-weighted projection of ``beta`` on the Krylov space,
    an independent route to the population PLS coefficient after ``m`` steps.
    """
    kr = krylov_space(model, "cov", tol)
    if not 1 <= m <= kr.dim:
        raise DataError(f"m={m} out of range 1..{kr.dim} (Krylov dimension)")
    K = kr.basis[:, :m]
    S = model.sigma_x
    G = K.T @ S @ K
    assert np.linalg.cond(G) < 1e12, "K'SK singular within Krylov dimension"
    return K @ np.linalg.solve(G, K.T @ S @ model.beta)


@dataclass(frozen=True)
class EquivalenceReport:
    krylov_dim: int
    relevant_group_count: int
    pls_stop: int

    @property
    def agree(self) -> bool:
        return self.krylov_dim == self.relevant_group_count == self.pls_stop


def check_equivalence(model: PopulationRegression, tol: float = KRYLOV_TOL) -> EquivalenceReport:
    """Compare Krylov dimension, relevant eigenspace count and PLS stop index."""
    kdim = krylov_space(model, "cov", tol).dim
    rc = relevant_components(model).count
    try:
        stop = population_pls(model).m
    except ConvergenceError:
        stop = -1
    return EquivalenceReport(kdim, rc, stop)


def random_model(rng: np.random.Generator, p: int, k: int, *,
                 eigenvalues=None, noise_var: float = 1.0,
                 min_gap: float = 0.5, leading: bool = False) -> PopulationRegression:
    """Random model with ``k`` relevant eigenvectors and a random rotation.

    Eigenvalues default to distinct values in ``[1, 1 + 2 p]`` at least
    ``min_gap`` apart. ``beta`` has nonzero coordinates on ``k`` eigenvectors,
    randomly chosen or, with ``leading``, those of the ``k`` largest
    eigenvalues; magnitudes lie in ``[0.5, 2]``.
    """
    if not 0 <= k <= p:
        raise DataError(f"need 0 <= k <= p, got k={k}, p={p}")
    if eigenvalues is None:
        spacing = min_gap + rng.uniform(0.0, 1.5, size=p)
        eigenvalues = 1.0 + np.cumsum(spacing) - spacing[0]
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    D = random_orthogonal(rng, p)
    gamma = np.zeros(p)
    idx = rng.choice(p, size=k, replace=False)
    if leading:
        idx = np.argsort(eigenvalues)[::-1][:k]
    gamma[idx] = rng.uniform(0.5, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    S = D @ np.diag(eigenvalues) @ D.T
    return PopulationRegression(0.5 * (S + S.T), D @ gamma, noise_var)


def random_orthogonal(rng: np.random.Generator, p: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def separated_eigenvalues(rng: np.random.Generator, p: int, k: int) -> np.ndarray:
    """``k`` leading eigenvalues in ``[4, 10]`` above ``p - k`` trailing ones in ``[0.2, 1]``.

    Use with ``random_model(..., leading=True)`` for models whose relevant
    components dominate the predictor variance.
    """
    lead = np.sort(rng.uniform(4.0, 10.0, size=k))[::-1]
    tail = np.sort(rng.uniform(0.2, 1.0, size=p - k))[::-1]
    return np.concatenate([lead, tail])
