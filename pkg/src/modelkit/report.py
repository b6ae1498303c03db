"""Deterministic JSON reports.

Floats are written with 17 significant digits so that they round-trip
exactly; keys keep insertion order. Non-finite floats become ``null``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA = "modelkit/1"


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for stream ``label`` under the master ``seed``.

    The label is hashed (SHA-256, first 8 bytes, big endian) and combined
    with the seed through ``numpy.random.SeedSequence([seed, hash])``, so
    new labels never shift existing streams.
    """
    h = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([int(seed), h]))


def derive_seed(seed: int, label: str) -> int:
    """Integer seed drawn from :func:`derive_rng`, for APIs that take ints."""
    return int(derive_rng(seed, label).integers(0, 2**63 - 1))


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        s = format(x, ".17g")
        if not any(c in s for c in ".en"):
            s += ".0"
        return s
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    return _encode(obj) + "\n"


@dataclass
class Diagnostic:
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "pass": bool(self.passed)}


@dataclass
class Report:
    command: str
    parameters: dict
    seed: int | None = None
    tables: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def check(self, name: str, passed: bool, value=None, threshold=None) -> bool:
        self.diagnostics.append(Diagnostic(name, bool(passed), value, threshold))
        return bool(passed)

    @property
    def ok(self) -> bool:
        return all(d.passed for d in self.diagnostics)

    def first_failure(self) -> Diagnostic | None:
        return next((d for d in self.diagnostics if not d.passed), None)

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "tables": self.tables,
            "diagnostics": [d.as_dict() for d in self.diagnostics],
            "ok": self.ok,
        }

    def to_json(self) -> str:
        return dumps(self.as_dict())


def vector_rows(values, label: str = "value", index: str = "index") -> list:
    return [{index: i, label: float(v)} for i, v in enumerate(np.asarray(values).reshape(-1))]


def matrix_rows(a, prefix: str = "col") -> list:
    a = np.atleast_2d(np.asarray(a))
    return [{"row": i, **{f"{prefix}{j}": float(a[i, j]) for j in range(a.shape[1])}}
            for i in range(a.shape[0])]
