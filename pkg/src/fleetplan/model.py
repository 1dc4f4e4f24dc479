"""Solver-agnostic MILP container.

A model is an ordered list of named variables and named linear rows plus a
minimization objective. Builders append in a fixed order, so two builds of
the same instance are identical object-for-object and serialize to
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .errors import ModelError

INF = math.inf


class VarKind(str, Enum):
    CONTINUOUS = "C"
    INTEGER = "I"
    BINARY = "B"


@dataclass
class Var:
    name: str
    kind: VarKind
    lb: float
    ub: float
    obj: float = 0.0


@dataclass
class Row:
    name: str
    coeffs: Dict[int, float]
    sense: str  # "<=", ">=", "=="
    rhs: float


_SENSES = ("<=", ">=", "==")


class MilpModel:
    """Named variables + rows + min objective, with stable ordering."""

    def __init__(self, name: str, problem: str, variant: str,
                 metadata: Optional[Dict[str, Any]] = None):
        self.name = name
        self.problem = problem
        self.variant = variant
        self.metadata: Dict[str, Any] = metadata or {}
        self.vars: List[Var] = []
        self.rows: List[Row] = []
        self._var_idx: Dict[str, int] = {}
        self._row_idx: Dict[str, int] = {}

    # ------------------------------------------------------------ build --

    def add_var(self, name: str, kind: VarKind = VarKind.CONTINUOUS,
                lb: float = 0.0, ub: float = INF, obj: float = 0.0) -> int:
        if name in self._var_idx:
            raise ModelError(f"duplicate variable {name!r}", context="model.add_var")
        if lb > ub:
            raise ModelError(f"variable {name!r}: lb {lb} > ub {ub}",
                             context="model.add_var")
        if kind is VarKind.BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        idx = len(self.vars)
        self.vars.append(Var(name=name, kind=kind, lb=lb, ub=ub, obj=obj))
        self._var_idx[name] = idx
        return idx

    def add_row(self, name: str, coeffs: Iterable[Tuple[int, float]],
                sense: str, rhs: float) -> int:
        if sense not in _SENSES:
            raise ModelError(f"row {name!r}: bad sense {sense!r}",
                             context="model.add_row")
        if name in self._row_idx:
            raise ModelError(f"duplicate row {name!r}", context="model.add_row")
        cd: Dict[int, float] = {}
        for j, c in coeffs:
            if c == 0.0:
                continue
            cd[j] = cd.get(j, 0.0) + c
        idx = len(self.rows)
        self.rows.append(Row(name=name, coeffs=cd, sense=sense, rhs=rhs))
        self._row_idx[name] = idx
        return idx

    def add_to_objective(self, var_index: int, coeff: float) -> None:
        self.vars[var_index].obj += coeff

    # ------------------------------------------------------------ query --

    def var_index(self, name: str) -> int:
        try:
            return self._var_idx[name]
        except KeyError:
            raise ModelError(f"no variable named {name!r}", context="model.var_index")

    def has_var(self, name: str) -> bool:
        return name in self._var_idx

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def num_integer(self) -> int:
        return sum(1 for v in self.vars
                   if v.kind in (VarKind.INTEGER, VarKind.BINARY))

    def row_counts_by_family(self) -> Dict[str, int]:
        """Row-name family (text before '[') -> count."""
        out: Dict[str, int] = {}
        for r in self.rows:
            fam = r.name.split("[", 1)[0]
            out[fam] = out.get(fam, 0) + 1
        return out

    def var_counts_by_family(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for v in self.vars:
            fam = v.name.split("[", 1)[0]
            out[fam] = out.get(fam, 0) + 1
        return out

    def stats(self) -> str:
        return (f"{self.name}: {self.num_vars} vars "
                f"({self.num_integer} integer), {self.num_rows} rows")

    # ------------------------------------------------------- evaluation --

    def values_to_array(self, values: Mapping[str, float]) -> np.ndarray:
        x = np.zeros(self.num_vars)
        for name, val in values.items():
            x[self.var_index(name)] = val
        return x

    def array_to_values(self, x: Sequence[float]) -> Dict[str, float]:
        return {v.name: float(x[j]) for j, v in enumerate(self.vars)}

    def objective_value(self, x: Sequence[float]) -> float:
        return float(sum(v.obj * x[j] for j, v in enumerate(self.vars) if v.obj))

    # ----------------------------------------------------- matrix forms --

    def to_matrices(self) -> "MatrixForm":
        n = self.num_vars
        data, ri, ci = [], [], []
        row_lb = np.empty(self.num_rows)
        row_ub = np.empty(self.num_rows)
        for r_idx, row in enumerate(self.rows):
            for c_idx, coef in row.coeffs.items():
                ri.append(r_idx)
                ci.append(c_idx)
                data.append(coef)
            if row.sense == "<=":
                row_lb[r_idx], row_ub[r_idx] = -INF, row.rhs
            elif row.sense == ">=":
                row_lb[r_idx], row_ub[r_idx] = row.rhs, INF
            else:
                row_lb[r_idx] = row_ub[r_idx] = row.rhs
        A = sparse.csr_matrix((data, (ri, ci)), shape=(self.num_rows, n))
        c = np.array([v.obj for v in self.vars])
        lb = np.array([v.lb for v in self.vars])
        ub = np.array([v.ub for v in self.vars])
        integrality = np.array(
            [1 if v.kind in (VarKind.INTEGER, VarKind.BINARY) else 0
             for v in self.vars], dtype=np.int8)
        return MatrixForm(A=A, row_lb=row_lb, row_ub=row_ub, c=c,
                          lb=lb, ub=ub, integrality=integrality)


@dataclass
class MatrixForm:
    """Dense-objective / sparse-constraint view consumed by solve layers."""

    A: sparse.csr_matrix
    row_lb: np.ndarray
    row_ub: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
