"""Finite-dimensional operators for conceptual variables.

A variable taking ``d`` distinct values ``u_i`` is represented on ``C^d`` by a
self-adjoint operator ``A = sum_i u_i P_i`` whose spectral projectors
``P_i`` encode the question "what is the value?" with the sharp answer
``u_i``. Coarser variables ``f(lambda)`` merge eigenspaces; a variable is
maximal iff all its eigenspaces are one-dimensional. States are density
operators and measurement probabilities follow the trace rule
``p = tr(rho P)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from modelkit.errors import DataError, ModelkitError

FAMILY_TOL = 1e-10
DEGENERACY_TOL = 1e-8


class QuantumError(ModelkitError):
    """An operator, state or projector violates its invariants."""


def _dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def _maxabs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_projector(P: np.ndarray, tol: float = FAMILY_TOL) -> bool:
    P = np.asarray(P)
    return (P.ndim == 2 and P.shape[0] == P.shape[1]
            and _maxabs(P @ P - P) <= tol and _maxabs(P - _dagger(P)) <= tol)


@dataclass(frozen=True)
class ProjectorFamily:
    """Orthogonal, complete family of projectors labelled by real values."""

    projectors: tuple
    values: np.ndarray

    def __post_init__(self):
        projs = tuple(np.array(P, dtype=complex) for P in self.projectors)
        values = np.array(self.values, dtype=float).reshape(-1)
        if not projs:
            raise QuantumError("empty projector family")
        if len(projs) != values.size:
            raise QuantumError(f"{len(projs)} projectors but {values.size} values")
        d = projs[0].shape[0]
        for i, P in enumerate(projs):
            if P.shape != (d, d):
                raise QuantumError(f"projector {i} has shape {P.shape}, expected {(d, d)}")
            if _maxabs(P @ P - P) > FAMILY_TOL:
                raise QuantumError(f"projector {i} is not idempotent")
            if _maxabs(P - _dagger(P)) > FAMILY_TOL:
                raise QuantumError(f"projector {i} is not self-adjoint")
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if _maxabs(projs[i] @ projs[j]) > FAMILY_TOL:
                    raise QuantumError(f"projectors {i} and {j} are not orthogonal")
        if _maxabs(sum(projs) - np.eye(d)) > FAMILY_TOL:
            raise QuantumError("projectors do not sum to the identity")
        for P in projs:
            P.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def ranks(self) -> np.ndarray:
        return np.array([int(round(np.trace(P).real)) for P in self.projectors])

    def __len__(self):
        return len(self.projectors)


@dataclass(frozen=True)
class Operator:
    """Self-adjoint matrix with its attached spectral family."""

    matrix: np.ndarray
    family: ProjectorFamily

    def __post_init__(self):
        A = np.array(self.matrix, dtype=complex)
        if _maxabs(A - _dagger(A)) > FAMILY_TOL:
            raise QuantumError("operator is not self-adjoint")
        recon = sum(v * P for v, P in zip(self.family.values, self.family.projectors))
        if _maxabs(A - recon) > 1e-9:
            raise QuantumError("matrix does not match its spectral family")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @classmethod
    def from_family(cls, family: ProjectorFamily) -> "Operator":
        A = sum(v * P for v, P in zip(family.values, family.projectors))
        return cls(0.5 * (A + _dagger(A)), family)

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def values(self) -> np.ndarray:
        return self.family.values


@dataclass(frozen=True)
class ConceptualVariable:
    name: str
    values: tuple
    accessible: bool = True

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        scale = max((abs(v) for v in vals), default=1.0) or 1.0
        s = sorted(vals)
        if any(b - a <= 1e-12 * scale for a, b in zip(s, s[1:])):
            raise DataError(f"values of {self.name!r} are not distinct")
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return len(self.values)


def operator_from_values(values: Sequence[float], basis=None) -> Operator:
    """``A = sum_i u_i |psi_i><psi_i|`` with ``psi_i`` the columns of ``basis``."""
    values = np.asarray(values, dtype=float).reshape(-1)
    d = values.size
    ConceptualVariable("theta", values)
    U = np.eye(d, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if U.shape != (d, d):
        raise QuantumError(f"basis must be {d} x {d}, got {U.shape}")
    if _maxabs(_dagger(U) @ U - np.eye(d)) > FAMILY_TOL:
        raise QuantumError("basis is not unitary")
    projs = [np.outer(U[:, i], U[:, i].conj()) for i in range(d)]
    return Operator.from_family(ProjectorFamily(tuple(projs), values))


def _group_values(values: np.ndarray) -> list[list[int]]:
    """Indices grouped by value equality within DEGENERACY_TOL x spectral radius."""
    radius = float(np.max(np.abs(values))) if values.size else 0.0
    tol = DEGENERACY_TOL * radius if radius > 0 else 0.0
    groups: list[list[int]] = []
    reps: list[float] = []
    for i, v in enumerate(values):
        for g, r in enumerate(reps):
            if abs(v - r) <= tol:
                groups[g].append(i)
                break
        else:
            groups.append([i])
            reps.append(float(v))
    return groups


def operator_from_matrix(A) -> Operator:
    """Spectral decomposition of a self-adjoint matrix into an :class:`Operator`."""
    A = np.asarray(A, dtype=complex)
    if _maxabs(A - _dagger(A)) > FAMILY_TOL:
        raise QuantumError("matrix is not self-adjoint")
    A = 0.5 * (A + _dagger(A))
    ev, V = np.linalg.eigh(A)
    groups = _group_values(ev)
    projs = tuple(V[:, g] @ _dagger(V[:, g]) for g in groups)
    values = np.array([ev[g].mean() for g in groups])
    return Operator(A, ProjectorFamily(projs, values))


def function_of_variable(op: Operator, f: Callable[[float], float]) -> Operator:
    """Operator of ``f(theta)``: eigenvalues mapped by ``f``, equal images merged."""
    images = np.array([float(f(v)) for v in op.values])
    if not np.all(np.isfinite(images)):
        raise QuantumError("f produced non-finite values")
    groups = _group_values(images)
    projs = tuple(sum(op.family.projectors[i] for i in g) for g in groups)
    values = np.array([images[g[0]] for g in groups])
    return Operator.from_family(ProjectorFamily(projs, values))


def is_maximal(op: Operator) -> bool:
    """True iff every eigenspace is one-dimensional."""
    return all(abs(np.trace(P).real - 1.0) <= 1e-8 for P in op.family.projectors)


def leq(theta: Operator, lam: Operator, tol: float = 1e-8) -> bool:
    """True iff ``theta`` is a function of ``lam``.

    Every eigenprojector ``Q`` of ``lam`` must lie inside a single eigenspace
    of ``theta``, i.e. ``P Q = Q`` for some projector ``P`` of ``theta``.
    """
    if theta.dim != lam.dim:
        return False
    return all(
        any(_maxabs(P @ Q - Q) <= tol for P in theta.family.projectors)
        for Q in lam.family.projectors
    )


def question_answer_state(op: Operator, value: float) -> np.ndarray:
    """Projector onto the eigenspace for the sharp answer ``theta = value``."""
    diffs = np.abs(op.values - value)
    i = int(np.argmin(diffs))
    if diffs[i] > 1e-9:
        raise QuantumError(f"{float(value)!r} is not an eigenvalue of the operator")
    return op.family.projectors[i]


@dataclass(frozen=True)
class MixedState:
    """Density operator: self-adjoint, positive semidefinite, unit trace."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise QuantumError(f"rho must be square, got shape {rho.shape}")
        if _maxabs(rho - _dagger(rho)) > FAMILY_TOL:
            raise QuantumError("rho is not self-adjoint")
        tr = np.trace(rho)
        if abs(tr - 1.0) > FAMILY_TOL:
            raise QuantumError(f"trace of rho is {tr.real:.12g}, not 1")
        ev = np.linalg.eigvalsh(0.5 * (rho + _dagger(rho)))
        if ev[0] < -FAMILY_TOL:
            raise QuantumError(f"rho has negative eigenvalue {ev[0]:.3g}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, psi) -> "MixedState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))


def mixed_state(probs, family: ProjectorFamily) -> MixedState:
    """``rho = sum_i p_i P_i``.

    Projectors are not divided by their ranks, so any degenerate projector
    with positive weight gives a trace above 1 and is rejected. Callers who
    want a state spread uniformly over an eigenspace pass ``p_i / rank(P_i)``.
    """
    probs = np.asarray(probs, dtype=float).reshape(-1)
    if probs.size != len(family):
        raise DataError(f"{probs.size} probabilities for {len(family)} projectors")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise DataError("probabilities must be nonnegative and sum to 1")
    rho = sum(p * P for p, P in zip(probs, family.projectors))
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > FAMILY_TOL:
        raise QuantumError(
            f"trace of sum p_i P_i is {tr:.12g}: degenerate projectors need "
            "rank-weighted probabilities p_i / rank(P_i)"
        )
    return MixedState(rho)


def born_probability(state: MixedState, projector) -> float:
    """``Re tr(rho P)``."""
    P = np.asarray(projector, dtype=complex)
    if P.shape != state.rho.shape or not is_projector(P):
        raise QuantumError("invalid projector")
    p = float(np.trace(state.rho @ P).real)
    if p < -FAMILY_TOL or p > 1 + FAMILY_TOL:
        raise QuantumError(f"probability {p!r} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def measurement_distribution(state: MixedState, op: Operator) -> np.ndarray:
    """Born probabilities of every eigenvalue of ``op``, in family order."""
    if state.dim != op.dim:
        raise DataError(f"state dimension {state.dim} != operator dimension {op.dim}")
    return np.array([born_probability(state, P) for P in op.family.projectors])


def decision_variable(r: int, name: str = "xi") -> ConceptualVariable:
    """Accessible variable with values ``1..r``; value ``k`` means choosing prospect ``k``."""
    if r < 1:
        raise DataError("a decision needs at least one prospect")
    return ConceptualVariable(name, tuple(range(1, r + 1)), accessible=True)


@dataclass(frozen=True)
class Prospect:
    label: str
    utility_factor: float
    attraction_factor: float = 0.0


def qdt_probabilities(prospects: Sequence[Prospect]) -> np.ndarray:
    """``p(pi_i) = f(pi_i) + q(pi_i)`` for a complete prospect set.

    Requires ``sum f = 1``, ``sum q = 0`` and every ``p`` in ``[0, 1]``;
    violations raise instead of being clipped.
    """
    if not prospects:
        raise DataError("empty prospect set")
    f = np.array([pr.utility_factor for pr in prospects], dtype=float)
    q = np.array([pr.attraction_factor for pr in prospects], dtype=float)
    for pr, fi, qi in zip(prospects, f, q):
        if not 0.0 <= fi <= 1.0:
            raise DataError(f"utility factor of {pr.label!r} is {float(fi)!r}, outside [0, 1]")
        if not -1.0 <= qi <= 1.0:
            raise DataError(f"attraction factor of {pr.label!r} is {float(qi)!r}, outside [-1, 1]")
    if abs(f.sum() - 1.0) > 1e-12:
        raise DataError(f"utility factors sum to {float(f.sum())!r}, not 1")
    if abs(q.sum()) > 1e-12:
        raise DataError(f"attraction factors sum to {float(q.sum())!r}, not 0")
    p = f + q
    for pr, pi in zip(prospects, p):
        if not 0.0 <= pi <= 1.0:
            raise DataError(
                f"inconsistent attraction factors: p({pr.label}) = {float(pi)!r} outside [0, 1]"
            )
    return p


@dataclass(frozen=True)
class Refinement:
    """A maximal operator and the map from its values to the original ones."""

    operator: Operator
    grouping: dict = field(default_factory=dict)

    def f(self, v: float) -> float:
        return self.grouping[int(round(v))]


def maximal_refinement(op: Operator) -> Refinement:
    """Split every eigenspace of ``op`` into rank-1 pieces labelled ``1..d``.

    The basis inside a degenerate eigenspace is whatever the eigensolver
    returns; only ``function_of_variable(result.operator, result.f) == op`` is
    guaranteed.
    """
    vectors, grouping = [], {}
    for v, P, rank in zip(op.values, op.family.projectors, op.family.ranks):
        _, V = np.linalg.eigh(0.5 * (P + _dagger(P)))
        for k in range(rank):
            vectors.append(V[:, -1 - k])
            grouping[len(vectors)] = float(v)
    U = np.column_stack(vectors)
    # re-orthonormalize across eigenspaces to scrub rounding
    U, _ = np.linalg.qr(U)
    lam = operator_from_values(np.arange(1, op.dim + 1, dtype=float), U)
    return Refinement(lam, grouping)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> MixedState:
    k = d if rank is None else rank
    G = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = G @ _dagger(G)
    rho = 0.5 * (rho + _dagger(rho))
    return MixedState(rho / np.trace(rho).real)


def dft_basis(d: int) -> np.ndarray:
    """Unitary discrete Fourier basis; for ``d = 2`` the Hadamard basis."""
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)
