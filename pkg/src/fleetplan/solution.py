"""Aggregate solution container passed from the fleet-level solve to the
disaggregation builders.

Integer families are rounded to exact integers on construction (after a
closeness check), and the depot-count series n is recomputed from the
rounded values so downstream right-hand sides are exactly consistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

from .domain import Instance, ScheduleMatrices
from .errors import PreconditionViolated

_INT_FAMILIES = ("N_v[", "N_c[", "b[", "slack_Nc[")


@dataclass
class AggSolution:
    """Values of every fleet-level variable plus the objective."""

    values: Dict[str, float]
    objective: float

    @staticmethod
    def from_values(inst: Instance, values: Mapping[str, float],
                    objective: float, int_tol: float = 1e-5) -> "AggSolution":
        cleaned: Dict[str, float] = {}
        for name, val in values.items():
            if any(name.startswith(f) for f in _INT_FAMILIES):
                r = round(val)
                if abs(val - r) > int_tol:
                    raise PreconditionViolated(
                        f"{name} = {val} is not integral within {int_tol}",
                        context="solution.AggSolution")
                cleaned[name] = float(r)
            else:
                cleaned[name] = float(val)
        sched = ScheduleMatrices.from_instance(inst)
        for i in range(1, inst.I + 1):
            Nv = cleaned.get(f"N_v[i={i}]", 0.0)
            for t in range(1, inst.grid.T + 1):
                out = sum(int(sched.A[k - 1, t - 1])
                          * cleaned.get(f"b[k={k},i={i}]", 0.0)
                          for k in range(1, inst.K + 1))
                cleaned[f"n[i={i},t={t}]"] = Nv - out
        return AggSolution(values=cleaned, objective=float(objective))

    # typed accessors, all 1-based
    def N_v(self, i: int) -> int:
        return int(self.values[f"N_v[i={i}]"])

    def N_c(self, j: int) -> int:
        return int(self.values[f"N_c[j={j}]"])

    def b(self, k: int, i: int) -> int:
        return int(self.values.get(f"b[k={k},i={i}]", 0.0))

    def n(self, i: int, t: int) -> float:
        return self.values[f"n[i={i},t={t}]"]

    def m(self, i: int, j: int, t: int) -> float:
        return self.values[f"m[i={i},j={j},t={t}]"]

    def p_v(self, i: int, t: int) -> float:
        return self.values[f"p_v[i={i},t={t}]"]

    def d(self, k: int, i: int) -> float:
        return self.values.get(f"d[k={k},i={i}]", 0.0)

    def p_g(self, t: int) -> float:
        return self.values[f"p_g[t={t}]"]

    def total_vehicles(self) -> int:
        total = 0
        i = 1
        while f"N_v[i={i}]" in self.values:
            total += self.N_v(i)
            i += 1
        return total
