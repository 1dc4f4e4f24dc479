"""Solution checking against a built model, and objective recomputation
straight from instance data (independent of any model coefficients)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Mapping, Sequence, Union

import numpy as np

from .domain import Instance
from .model import MilpModel, VarKind


@dataclass
class Violation:
    kind: str          # "row" | "bound" | "integrality"
    name: str
    value: float
    limit: str
    excess: float

    def __str__(self) -> str:
        return (f"{self.kind} {self.name}: value {self.value:.9g} vs "
                f"{self.limit} (excess {self.excess:.3g})")


@dataclass
class CheckReport:
    tol: float
    violations: List[Violation] = field(default_factory=list)
    n_rows: int = 0
    n_vars: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_excess(self) -> float:
        return max((v.excess for v in self.violations), default=0.0)

    def first_violation(self) -> str:
        return str(self.violations[0]) if self.violations else "none"

    def summary(self) -> str:
        if self.ok:
            return (f"clean: {self.n_rows} rows, {self.n_vars} variable "
                    f"bounds at tol {self.tol:g}")
        head = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        return f"{len(self.violations)} violations: {head}{more}"


def check_solution(model: MilpModel,
                   solution: Union[Mapping[str, float], Sequence[float], np.ndarray],
                   tol: float = 1e-6) -> CheckReport:
    """Verify every row, bound and integrality declaration at absolute tol."""
    if isinstance(solution, Mapping):
        x = model.values_to_array(solution)
    else:
        x = np.asarray(solution, dtype=float)
        if x.shape != (model.num_vars,):
            raise ValueError(f"solution has shape {x.shape}, expected "
                             f"({model.num_vars},)")
    rep = CheckReport(tol=tol, n_rows=model.num_rows, n_vars=model.num_vars)

    if model.num_rows:
        mf = model.to_matrices()
        lhs = mf.A @ x
        under = mf.row_lb - lhs
        over = lhs - mf.row_ub
        for idx in np.flatnonzero((under > tol) | (over > tol)):
            row = model.rows[idx]
            excess = max(under[idx], over[idx])
            rep.violations.append(Violation(
                kind="row", name=row.name, value=float(lhs[idx]),
                limit=f"{row.sense} {row.rhs:.9g}", excess=float(excess)))

    for j, v in enumerate(model.vars):
        if x[j] < v.lb - tol:
            rep.violations.append(Violation(
                kind="bound", name=v.name, value=float(x[j]),
                limit=f">= {v.lb:.9g}", excess=float(v.lb - x[j])))
        elif x[j] > v.ub + tol:
            rep.violations.append(Violation(
                kind="bound", name=v.name, value=float(x[j]),
                limit=f"<= {v.ub:.9g}", excess=float(x[j] - v.ub)))
        if v.kind in (VarKind.INTEGER, VarKind.BINARY):
            drift = abs(x[j] - round(x[j]))
            if drift > tol:
                rep.violations.append(Violation(
                    kind="integrality", name=v.name, value=float(x[j]),
                    limit="integer", excess=float(drift)))
    return rep


def eval_objective(inst: Instance, values: Mapping[str, float]) -> float:
    """Annual cost recomputed from the instance alone.

    vehicle capital + charger capital (incl. any slack chargers)
    + billed peaks + day-weighted energy + per-block maintenance.
    Missing variable names count as zero, so the same call works for the
    fleet-level model and both per-vehicle models.
    """
    g = lambda name: float(values.get(name, 0.0))  # noqa: E731
    total = 0.0
    for i, vt in enumerate(inst.vehicles, start=1):
        total += vt.capital_cost * g(f"N_v[i={i}]")
    for j, ct in enumerate(inst.chargers, start=1):
        total += ct.capital_cost * (g(f"N_c[j={j}]") + g(f"slack_Nc[j={j}]"))
    for l, grp in enumerate(inst.tariff.demand_groups, start=1):
        total += grp.rate * g(f"p_pk[l={l}]")
    dt = inst.grid.delta_t
    for t in range(1, inst.grid.T + 1):
        w = inst.grid.day_weight[inst.grid.day_of(t) - 1]
        total += g(f"p_g[t={t}]") * dt * inst.tariff.energy_price[t - 1] * w
    for k, blk in enumerate(inst.blocks, start=1):
        for i, vt in enumerate(inst.vehicles, start=1):
            total += blk.distance_km * vt.maintenance_cost_per_km * g(f"b[k={k},i={i}]")
    return total


def relative_gap(a: float, b: float) -> float:
    """|a-b| scaled by max(1, |a|, |b|)."""
    return abs(a - b) / max(1.0, abs(a), abs(b))


def objective_tolerance(j: float) -> float:
    """Comparison tolerance for objective values: max(1e-6*|J|, 1e-3)."""
    return max(1e-6 * abs(j), 1e-3)
