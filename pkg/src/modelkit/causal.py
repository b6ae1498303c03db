"""Conditioning versus intervention in a discrete background/cause/response model.

The model factorizes as ``f(r, c, b) = f(r | c, b) f(c | b) f(b)``. Statistical
conditioning marginalizes the background through ``f(b | c)``; intervention on
``C`` cuts the ``B -> C`` arrow and marginalizes through ``f(b)``.

Array layout: ``f_b[b]``, ``f_c_given_b[c, b]``, ``f_r_given_cb[r, c, b]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from modelkit.errors import DataError, ModelkitError

SUM_TOL = 1e-12


class UndefinedConditionalError(ModelkitError):
    """A conditional on a zero-probability cause value was requested."""


def _check_stochastic(a: np.ndarray, name: str, axis: int, slice_fmt) -> None:
    if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        bad = np.argwhere(~((a >= 0) & (a <= 1)))[0]
        raise DataError(f"{name}{[int(i) for i in bad]} = {float(a[tuple(bad)])!r} is not a probability")
    sums = a.sum(axis=axis)
    off = np.abs(sums - 1.0) > SUM_TOL
    if np.any(off):
        idx = tuple(np.argwhere(np.atleast_1d(off))[0])
        raise DataError(
            f"{name}{slice_fmt(*idx)} sums to {float(np.atleast_1d(sums)[idx])!r}, not 1"
        )


@dataclass(frozen=True)
class DiscreteCausalModel:
    f_b: np.ndarray
    f_c_given_b: np.ndarray
    f_r_given_cb: np.ndarray

    def __post_init__(self):
        f_b = np.array(self.f_b, dtype=float)
        f_cb = np.array(self.f_c_given_b, dtype=float)
        f_rcb = np.array(self.f_r_given_cb, dtype=float)
        if f_b.ndim != 1 or f_b.size < 1:
            raise DataError(f"f_b must be a non-empty vector, got shape {f_b.shape}")
        nb = f_b.size
        if f_cb.ndim != 2 or f_cb.shape[1] != nb or f_cb.shape[0] < 1:
            raise DataError(f"f_c_given_b must have shape (c_card, {nb}), got {f_cb.shape}")
        nc = f_cb.shape[0]
        if f_rcb.ndim != 3 or f_rcb.shape[1:] != (nc, nb) or f_rcb.shape[0] < 1:
            raise DataError(
                f"f_r_given_cb must have shape (r_card, {nc}, {nb}), got {f_rcb.shape}"
            )
        _check_stochastic(f_b, "f_b", 0, lambda *_: "")
        _check_stochastic(f_cb, "f_c_given_b", 0, lambda b: f"[:, b={b}]")
        _check_stochastic(f_rcb, "f_r_given_cb", 0, lambda c, b: f"[:, c={c}, b={b}]")
        for a in (f_b, f_cb, f_rcb):
            a.setflags(write=False)
        object.__setattr__(self, "f_b", f_b)
        object.__setattr__(self, "f_c_given_b", f_cb)
        object.__setattr__(self, "f_r_given_cb", f_rcb)

    @property
    def b_card(self) -> int:
        return self.f_b.size

    @property
    def c_card(self) -> int:
        return self.f_c_given_b.shape[0]

    @property
    def r_card(self) -> int:
        return self.f_r_given_cb.shape[0]

    @classmethod
    def from_json(cls, doc) -> "DiscreteCausalModel":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        if not isinstance(doc, dict):
            raise DataError("causal model document must be a JSON object")
        missing = [k for k in ("f_b", "f_c_given_b", "f_r_given_cb") if k not in doc]
        if missing:
            raise DataError(f"causal model document is missing {', '.join(missing)}")
        try:
            arrays = {k: np.array(doc[k], dtype=float) for k in
                      ("f_b", "f_c_given_b", "f_r_given_cb")}
        except (TypeError, ValueError) as exc:
            raise DataError(f"ragged or non-numeric table: {exc}") from None
        return cls(**arrays)

    def to_json(self) -> dict:
        return {"f_b": self.f_b.tolist(), "f_c_given_b": self.f_c_given_b.tolist(),
                "f_r_given_cb": self.f_r_given_cb.tolist()}


def load_model(path) -> DiscreteCausalModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    return DiscreteCausalModel.from_json(doc)


def joint(model: DiscreteCausalModel) -> np.ndarray:
    """Joint table ``f(r, c, b)``."""
    return model.f_r_given_cb * model.f_c_given_b[None, :, :] * model.f_b[None, None, :]


@dataclass(frozen=True)
class ConditionalTable:
    """R x C table; columns with ``defined[c] == False`` are NaN."""

    table: np.ndarray
    defined: np.ndarray


def conditional_r_given_c(model: DiscreteCausalModel) -> ConditionalTable:
    """``f(r | c) = sum_b f(r | c, b) f(b | c)`` with ``f(b | c) = f(b, c) / f(c)``."""
    f_bc = model.f_c_given_b * model.f_b[None, :]        # [c, b]
    f_c = f_bc.sum(axis=1)
    defined = f_c > 0
    f_b_given_c = np.full_like(f_bc, np.nan)
    f_b_given_c[defined] = f_bc[defined] / f_c[defined, None]
    table = np.einsum("rcb,cb->rc", model.f_r_given_cb, f_b_given_c)
    return ConditionalTable(table, defined)


def intervention_r_given_c(model: DiscreteCausalModel) -> np.ndarray:
    """``f(r || c) = sum_b f(r | c, b) f(b)``."""
    return np.einsum("rcb,b->rc", model.f_r_given_cb, model.f_b)


@dataclass(frozen=True)
class Divergence:
    per_c: np.ndarray
    max_tv: float


def divergence(model: DiscreteCausalModel) -> Divergence:
    """Total variation between conditioning and intervention, per cause value."""
    cond = conditional_r_given_c(model)
    if not np.all(cond.defined):
        bad = [int(c) for c in np.flatnonzero(~cond.defined)]
        raise UndefinedConditionalError(f"f(r | c) undefined for c in {bad} (f(c) = 0)")
    tv = 0.5 * np.abs(cond.table - intervention_r_given_c(model)).sum(axis=0)
    return Divergence(tv, float(tv.max()))


def random_model(rng: np.random.Generator, b_card: int, c_card: int, r_card: int, *,
                 independent: bool = False) -> DiscreteCausalModel:
    """Dirichlet-random model; ``independent`` makes ``f(c | b)`` constant in ``b``."""
    f_b = rng.dirichlet(np.ones(b_card))
    if independent:
        col = rng.dirichlet(np.ones(c_card))
        f_cb = np.repeat(col[:, None], b_card, axis=1)
    else:
        f_cb = rng.dirichlet(np.ones(c_card), size=b_card).T
    f_rcb = rng.dirichlet(np.ones(r_card), size=(c_card, b_card)).transpose(2, 0, 1)
    return DiscreteCausalModel(_renormalize(f_b, 0), _renormalize(f_cb, 0),
                               _renormalize(f_rcb, 0))


def _renormalize(a, axis):
    return a / a.sum(axis=axis, keepdims=True)


def confounder_model() -> DiscreteCausalModel:
    """Binary model where ``B`` drives both ``C`` and ``R`` and ``R`` ignores ``C``."""
    f_r1_given_b = np.array([0.2, 0.9])
    f_rcb = np.empty((2, 2, 2))
    f_rcb[1] = np.broadcast_to(f_r1_given_b, (2, 2))
    f_rcb[0] = 1.0 - f_rcb[1]
    return DiscreteCausalModel(
        f_b=[0.3, 0.7],
        f_c_given_b=[[0.9, 0.2], [0.1, 0.8]],
        f_r_given_cb=f_rcb,
    )
