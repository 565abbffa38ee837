"""Solver-independent LP/MILP descriptions with a canonical JSON form.

A program is a list of named, bounded (optionally binary) variables, one
linear objective, and linear constraints with relations <=, =, >=. The JSON
form is canonical: variable order, per-row coefficient order and float
formatting are all deterministic, so two identical builds serialize to
identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import MalformedProgram

SCHEMA_TAG = "drokit-program/1"

LE, EQ, GE = "<=", "=", ">="
_RELS = (LE, EQ, GE)


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float | None = None
    upper: float | None = None
    binary: bool = False


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple  # ((var_index, value), ...) sorted by var_index
    rel: str
    rhs: float
    name: str | None = None


@dataclass(frozen=True)
class ProgramDescription:
    variables: tuple
    objective_sense: str
    objective_coeffs: tuple  # ((var_index, value), ...) sorted
    objective_constant: float
    constraints: tuple
    metadata: dict = field(default_factory=dict)
    name: str = "program"

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def has_binaries(self) -> bool:
        return any(v.binary for v in self.variables)

    def validate(self) -> None:
        n = len(self.variables)
        if self.objective_sense not in ("min", "max"):
            raise MalformedProgram(f"bad objective sense {self.objective_sense!r}")
        seen = set()
        for v in self.variables:
            if v.name in seen:
                raise MalformedProgram(f"duplicate variable name {v.name!r}")
            seen.add(v.name)
            lo = -math.inf if v.lower is None else v.lower
            hi = math.inf if v.upper is None else v.upper
            if lo > hi:
                raise MalformedProgram(f"variable {v.name!r} has lower > upper")
        for idx, val in self.objective_coeffs:
            if not (0 <= idx < n):
                raise MalformedProgram(f"objective references variable index {idx}")
            if not math.isfinite(val):
                raise MalformedProgram("objective coefficient not finite")
        for ci, con in enumerate(self.constraints):
            if con.rel not in _RELS:
                raise MalformedProgram(f"constraint {ci} has bad relation {con.rel!r}")
            if not math.isfinite(con.rhs):
                raise MalformedProgram(f"constraint {ci} rhs not finite")
            last = -1
            for idx, val in con.coeffs:
                if not (0 <= idx < n):
                    raise MalformedProgram(
                        f"constraint {ci} references variable index {idx}"
                    )
                if idx <= last:
                    raise MalformedProgram(f"constraint {ci} coefficients not sorted")
                if not math.isfinite(val):
                    raise MalformedProgram(f"constraint {ci} coefficient not finite")
                last = idx

    def matrix(self):
        """(A_csc, rels, rhs) with A one row per constraint."""
        m, n = len(self.constraints), len(self.variables)
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, v in con.coeffs:
                rows.append(i)
                cols.append(j)
                vals.append(v)
        a = sparse.csc_matrix((vals, (rows, cols)), shape=(m, n))
        rels = [c.rel for c in self.constraints]
        rhs = np.array([c.rhs for c in self.constraints], dtype=float)
        return a, rels, rhs

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for idx, val in self.objective_coeffs:
            c[idx] = val
        return c

    def objective_value(self, assignment: dict) -> float:
        x = np.array([assignment[v.name] for v in self.variables])
        return float(self.objective_vector() @ x + self.objective_constant)

    def to_canonical_json(self) -> str:
        self.validate()
        payload = {
            "schema": SCHEMA_TAG,
            "name": self.name,
            "sense": self.objective_sense,
            "objective_constant": self.objective_constant,
            "objective": [[int(i), float(v)] for i, v in self.objective_coeffs],
            "variables": [
                {
                    "name": v.name,
                    "lower": v.lower,
                    "upper": v.upper,
                    "binary": v.binary,
                }
                for v in self.variables
            ],
            "constraints": [
                {
                    "name": c.name,
                    "coeffs": [[int(i), float(v)] for i, v in c.coeffs],
                    "rel": c.rel,
                    "rhs": c.rhs,
                }
                for c in self.constraints
            ],
            "metadata": self.metadata,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_canonical_json(text: str) -> "ProgramDescription":
        payload = json.loads(text)
        if payload.get("schema") != SCHEMA_TAG:
            raise MalformedProgram(f"unknown program schema {payload.get('schema')!r}")
        variables = tuple(
            Variable(
                name=v["name"],
                lower=v["lower"],
                upper=v["upper"],
                binary=bool(v["binary"]),
            )
            for v in payload["variables"]
        )
        constraints = tuple(
            Constraint(
                coeffs=tuple((int(i), float(val)) for i, val in c["coeffs"]),
                rel=c["rel"],
                rhs=float(c["rhs"]),
                name=c.get("name"),
            )
            for c in payload["constraints"]
        )
        prog = ProgramDescription(
            variables=variables,
            objective_sense=payload["sense"],
            objective_coeffs=tuple((int(i), float(v)) for i, v in payload["objective"]),
            objective_constant=float(payload["objective_constant"]),
            constraints=constraints,
            metadata=payload.get("metadata", {}),
            name=payload.get("name", "program"),
        )
        prog.validate()
        return prog


class ProgramBuilder:
    """Incremental construction with stable variable/constraint ordering."""

    def __init__(self, name: str = "program", sense: str = "min"):
        self.name = name
        self.sense = sense
        self._vars: list[Variable] = []
        self._index: dict[str, int] = {}
        self._obj: dict[int, float] = {}
        self._constant = 0.0
        self._cons: list[Constraint] = []
        self.metadata: dict = {}

    def add_variable(
        self,
        name: str,
        lower: float | None = None,
        upper: float | None = None,
        binary: bool = False,
        objective: float = 0.0,
    ) -> int:
        if name in self._index:
            raise MalformedProgram(f"duplicate variable name {name!r}")
        if binary:
            lower = 0.0 if lower is None else lower
            upper = 1.0 if upper is None else upper
        idx = len(self._vars)
        self._vars.append(Variable(name, lower, upper, binary))
        self._index[name] = idx
        if objective:
            self._obj[idx] = self._obj.get(idx, 0.0) + objective
        return idx

    def index_of(self, name: str) -> int:
        return self._index[name]

    def name_at(self, idx: int) -> str:
        return self._vars[idx].name

    def add_objective(self, idx: int, value: float) -> None:
        if value:
            self._obj[idx] = self._obj.get(idx, 0.0) + value

    def add_objective_constant(self, value: float) -> None:
        self._constant += value

    def add_constraint(self, coeffs, rel: str, rhs: float, name: str | None = None) -> int:
        merged: dict[int, float] = {}
        for idx, val in coeffs:
            if val != 0.0:
                merged[idx] = merged.get(idx, 0.0) + val
        row = Constraint(
            coeffs=tuple(sorted(merged.items())), rel=rel, rhs=float(rhs), name=name
        )
        self._cons.append(row)
        return len(self._cons) - 1

    def build(self) -> ProgramDescription:
        prog = ProgramDescription(
            variables=tuple(self._vars),
            objective_sense=self.sense,
            objective_coeffs=tuple(sorted(self._obj.items())),
            objective_constant=self._constant,
            constraints=tuple(self._cons),
            metadata=dict(self.metadata),
            name=self.name,
        )
        prog.validate()
        return prog
