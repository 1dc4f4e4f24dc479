"""Builders for the four optimization stages.

p1  fleet-level sizing and depot operation, blocks pooled per vehicle type
p2  p1 plus a per-vehicle layer tied to the pool by matching rows (the
    exact benchmark; vehicle slots v = 1..K per type)
p3  feasibility of realizing a fixed p1 solution vehicle-by-vehicle,
    decomposed into one independent submodel per vehicle type
p4  per-vehicle re-optimization of operations with purchases and the
    block-to-type assignment frozen, plus optional integer charger slack

Stored-energy convention: departure and return adjustments land in the
transition *into* the marked interval, i.e. the recursion for interval t
uses the markers U(:,t) / V(:,t) and the charge power bought in t-1. The
first interval of each representative day wraps to its last (periodic
days). Rows and variables are named family[index=value,...], 1-based.

Every builder asserts its row counts against closed-form formulas before
returning; a mismatch means the builder itself is broken.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .domain import Instance, ScheduleMatrices, Variant
from .errors import ModelError, ModelTooLarge, PreconditionViolated
from .instance_io import instance_digest
from .model import MilpModel, VarKind
from .solution import AggSolution


@dataclass(frozen=True)
class BuildOptions:
    symmetry_breaking: bool = True
    max_variables: int = 2_000_000


DEFAULT_OPTIONS = BuildOptions()


@dataclass
class P3Submodel:
    """Feasibility submodel for one vehicle type (1-based index)."""

    type_index: int
    n_slots: int
    model: MilpModel


# --------------------------------------------------------------------------
# shared context
# --------------------------------------------------------------------------

class _Sched:
    """Per-interval block lookups derived from the schedule matrices."""

    def __init__(self, inst: Instance):
        sm = ScheduleMatrices.from_instance(inst)
        T = inst.grid.T
        self.at = [list(np.flatnonzero(sm.A[:, t - 1]) + 1) for t in range(T + 1)]
        self.dep = [list(np.flatnonzero(sm.U[:, t - 1]) + 1) for t in range(T + 1)]
        self.ret = [list(np.flatnonzero(sm.V[:, t - 1]) + 1) for t in range(T + 1)]
        self.at[0] = self.dep[0] = self.ret[0] = []
        self.active_t = [t for t in range(1, T + 1) if self.at[t]]


def _weight_of(inst: Instance, t: int) -> float:
    return float(inst.grid.day_weight[inst.grid.day_of(t) - 1])


# --------------------------------------------------------------------------
# fleet-level (aggregate) layer
# --------------------------------------------------------------------------

def _add_aggregate(m: MilpModel, inst: Instance, sched: _Sched,
                   fixed: Optional[AggSolution],
                   slack_limit: Optional[int]) -> Dict[str, Dict]:
    """Add all fleet-level variables and rows; returns name->index tables.

    With `fixed`, purchases and the assignment (N_v, N_c, b) get lb=ub from
    the given solution. With `slack_limit` (not None), integer slack_Nc[j]
    relaxes the charger-count cap and its capital joins the objective.
    """
    g = inst.grid
    T, S, dt = g.T, g.S, g.delta_t
    K, I, J = inst.K, inst.I, inst.J
    P = inst.pairing.p_kw

    vb: Dict[Tuple[int, int], int] = {}
    vNv: Dict[int, int] = {}
    vNc: Dict[int, int] = {}
    vslack: Dict[int, int] = {}
    vn: Dict[Tuple[int, int], int] = {}
    vm: Dict[Tuple[int, int, int], int] = {}
    vpv: Dict[Tuple[int, int], int] = {}
    vsoe: Dict[Tuple[int, int], int] = {}
    vd: Dict[Tuple[int, int], int] = {}
    vpg: Dict[int, int] = {}
    vpk: Dict[int, int] = {}

    for k in range(1, K + 1):
        blk = inst.blocks[k - 1]
        for i in range(1, I + 1):
            maint = blk.distance_km * inst.vehicles[i - 1].maintenance_cost_per_km
            if fixed is not None:
                val = float(fixed.b(k, i))
                vb[k, i] = m.add_var(f"b[k={k},i={i}]", VarKind.BINARY,
                                     lb=val, ub=val, obj=maint)
            else:
                vb[k, i] = m.add_var(f"b[k={k},i={i}]", VarKind.BINARY, obj=maint)
    for i in range(1, I + 1):
        cap = inst.vehicles[i - 1].capital_cost
        if fixed is not None:
            val = float(fixed.N_v(i))
            vNv[i] = m.add_var(f"N_v[i={i}]", VarKind.INTEGER, lb=val, ub=val, obj=cap)
        else:
            vNv[i] = m.add_var(f"N_v[i={i}]", VarKind.INTEGER, obj=cap)
    for j in range(1, J + 1):
        cap = inst.chargers[j - 1].capital_cost
        if fixed is not None:
            val = float(fixed.N_c(j))
            vNc[j] = m.add_var(f"N_c[j={j}]", VarKind.INTEGER, lb=val, ub=val, obj=cap)
        else:
            vNc[j] = m.add_var(f"N_c[j={j}]", VarKind.INTEGER, obj=cap)
    if slack_limit is not None:
        for j in range(1, J + 1):
            vslack[j] = m.add_var(f"slack_Nc[j={j}]", VarKind.INTEGER,
                                  lb=0.0, ub=float(slack_limit),
                                  obj=inst.chargers[j - 1].capital_cost)
    for i in range(1, I + 1):
        for t in range(1, T + 1):
            vn[i, t] = m.add_var(f"n[i={i},t={t}]")
    for i in range(1, I + 1):
        for j in range(1, J + 1):
            for t in range(1, T + 1):
                vm[i, j, t] = m.add_var(f"m[i={i},j={j},t={t}]")
    for i in range(1, I + 1):
        for t in range(1, T + 1):
            vpv[i, t] = m.add_var(f"p_v[i={i},t={t}]")
    for i in range(1, I + 1):
        for t in range(1, T + 1):
            vsoe[i, t] = m.add_var(f"soe[i={i},t={t}]")
    for k in range(1, K + 1):
        for i in range(1, I + 1):
            vd[k, i] = m.add_var(f"d[k={k},i={i}]")
    for t in range(1, T + 1):
        price = inst.tariff.energy_price[t - 1]
        vpg[t] = m.add_var(f"p_g[t={t}]", lb=0.0, ub=inst.tariff.grid_cap_kw,
                           obj=dt * price * _weight_of(inst, t))
    for l, grp in enumerate(inst.tariff.demand_groups, start=1):
        vpk[l] = m.add_var(f"p_pk[l={l}]", obj=grp.rate)

    # every block served by exactly one type
    for k in range(1, K + 1):
        m.add_row(f"eq01_cover[k={k}]",
                  [(vb[k, i], 1.0) for i in range(1, I + 1)], "==", 1.0)
    # depot headcount: n = N_v - (blocks en route)
    for i in range(1, I + 1):
        for t in range(1, T + 1):
            coeffs = [(vn[i, t], 1.0), (vNv[i], -1.0)]
            coeffs += [(vb[k, i], 1.0) for k in sched.at[t]]
            m.add_row(f"eq02_depot[i={i},t={t}]", coeffs, "==", 0.0)
    # chargers serving type i cannot exceed vehicles present
    for i in range(1, I + 1):
        for t in range(1, T + 1):
            coeffs = [(vm[i, j, t], 1.0) for j in range(1, J + 1)]
            coeffs.append((vn[i, t], -1.0))
            m.add_row(f"eq03_chg_veh[i={i},t={t}]", coeffs, "<=", 0.0)
    # chargers of type j in use cannot exceed the count purchased (+ slack)
    for j in range(1, J + 1):
        for t in range(1, T + 1):
            coeffs = [(vm[i, j, t], 1.0) for i in range(1, I + 1)]
            coeffs.append((vNc[j], -1.0))
            if slack_limit is not None:
                coeffs.append((vslack[j], -1.0))
            m.add_row(f"eq04_chg_cap[j={j},t={t}]", coeffs, "<=", 0.0)
    # pooled stored energy, interior transitions then periodic wrap
    for i in range(1, I + 1):
        eta = inst.vehicles[i - 1].drive_efficiency_kwh_per_km
        for s in range(1, S + 1):
            lo, hi = g.tau_lo(s), g.tau_hi(s)
            for t in range(lo + 1, hi + 1):
                coeffs = [(vsoe[i, t], 1.0), (vsoe[i, t - 1], -1.0),
                          (vpv[i, t - 1], -dt)]
                for k in sched.dep[t]:
                    coeffs.append((vd[k, i], 1.0))
                for k in sched.ret[t]:
                    coeffs.append((vd[k, i], -1.0))
                    coeffs.append((vb[k, i],
                                   inst.blocks[k - 1].distance_km * eta))
                m.add_row(f"eq09_soe[i={i},s={s},t={t}]", coeffs, "==", 0.0)
            coeffs = [(vsoe[i, lo], 1.0), (vsoe[i, hi], -1.0), (vpv[i, hi], -dt)]
            for k in sched.dep[lo]:
                coeffs.append((vd[k, i], 1.0))
            for k in sched.ret[lo]:
                coeffs.append((vd[k, i], -1.0))
                coeffs.append((vb[k, i], inst.blocks[k - 1].distance_km * eta))
            m.add_row(f"eq11_wrap[i={i},s={s}]", coeffs, "==", 0.0)
    # charge power limited by chargers in use
    for i in range(1, I + 1):
        for t in range(1, T + 1):
            coeffs = [(vpv[i, t], 1.0)]
            coeffs += [(vm[i, j, t], -P[i - 1][j - 1]) for j in range(1, J + 1)]
            m.add_row(f"eq10_pwr[i={i},t={t}]", coeffs, "<=", 0.0)
    # pooled energy fits the packs present at the depot
    for i in range(1, I + 1):
        R = inst.vehicles[i - 1].energy_capacity_kwh
        for t in range(1, T + 1):
            m.add_row(f"eq12_soe_cap[i={i},t={t}]",
                      [(vsoe[i, t], 1.0), (vn[i, t], -R)], "<=", 0.0)
    # per-trip energy draw vs. need and pack size
    for k in range(1, K + 1):
        D = inst.blocks[k - 1].distance_km
        for i in range(1, I + 1):
            eta = inst.vehicles[i - 1].drive_efficiency_kwh_per_km
            R = inst.vehicles[i - 1].energy_capacity_kwh
            if inst.variant is Variant.SURPLUS:
                m.add_row(f"eq13_d_lo[k={k},i={i}]",
                          [(vb[k, i], D * eta), (vd[k, i], -1.0)], "<=", 0.0)
                m.add_row(f"eq13_d_hi[k={k},i={i}]",
                          [(vd[k, i], 1.0), (vb[k, i], -R)], "<=", 0.0)
            else:
                m.add_row(f"eq14_d_eq[k={k},i={i}]",
                          [(vd[k, i], 1.0), (vb[k, i], -D * eta)], "==", 0.0)
                m.add_row(f"eq14_d_hi[k={k},i={i}]",
                          [(vd[k, i], 1.0), (vb[k, i], -R)], "<=", 0.0)
    # grid balance and billed peaks
    for t in range(1, T + 1):
        coeffs = [(vpv[i, t], 1.0) for i in range(1, I + 1)]
        coeffs.append((vpg[t], -1.0))
        m.add_row(f"balance[t={t}]", coeffs, "==", 0.0)
    for l, grp in enumerate(inst.tariff.demand_groups, start=1):
        for t in sorted(grp.intervals):
            m.add_row(f"peak[l={l},t={t}]",
                      [(vpg[t], 1.0), (vpk[l], -1.0)], "<=", 0.0)

    return {"b": vb, "N_v": vNv, "N_c": vNc, "slack": vslack, "n": vn,
            "m": vm, "p_v": vpv, "soe": vsoe, "d": vd, "p_g": vpg,
            "p_pk": vpk}


def _aggregate_expected_counts(inst: Instance, sched: _Sched) -> Dict[str, int]:
    g = inst.grid
    T, S = g.T, g.S
    K, I, J = inst.K, inst.I, inst.J
    G = sum(len(grp.intervals) for grp in inst.tariff.demand_groups)
    counts = {
        "eq01_cover": K,
        "eq02_depot": I * T,
        "eq03_chg_veh": I * T,
        "eq04_chg_cap": J * T,
        "eq09_soe": I * (T - S),
        "eq11_wrap": I * S,
        "eq10_pwr": I * T,
        "eq12_soe_cap": I * T,
        "balance": T,
        "peak": G,
    }
    if inst.variant is Variant.SURPLUS:
        counts["eq13_d_lo"] = K * I
        counts["eq13_d_hi"] = K * I
    else:
        counts["eq14_d_eq"] = K * I
        counts["eq14_d_hi"] = K * I
    return counts


# --------------------------------------------------------------------------
# per-vehicle (individual) layer
# --------------------------------------------------------------------------

def _add_individual(m: MilpModel, inst: Instance, sched: _Sched,
                    slots: Dict[int, int],
                    agg_vars: Optional[Dict[str, Dict]],
                    agg_const: Optional[AggSolution],
                    with_y: bool, sb: bool) -> None:
    """Add the per-vehicle layer for the types in `slots` (type -> slot count).

    Matching rows tie per-vehicle sums either to the fleet-level variables
    (`agg_vars`, used by p2/p4) or to fixed numbers (`agg_const`, used by
    p3). `with_y` adds slot-usage binaries and the fleet-count row (p2).
    `sb` adds symmetry breaking: monotone slot usage (p2) and a sparse
    prefix encoding of the lexicographic block-to-slot cut.
    """
    if (agg_vars is None) == (agg_const is None):
        raise ModelError("exactly one of agg_vars/agg_const required",
                         context="builders._add_individual")
    g = inst.grid
    T, S, dt = g.T, g.S, g.delta_t
    K, J = inst.K, inst.J
    P = inst.pairing.p_kw

    for i in sorted(slots):
        V = slots[i]
        vt = inst.vehicles[i - 1]
        eta, R = vt.drive_efficiency_kwh_per_km, vt.energy_capacity_kwh

        vy: Dict[int, int] = {}
        vbb: Dict[Tuple[int, int], int] = {}
        vdd: Dict[Tuple[int, int], int] = {}
        vx: Dict[Tuple[int, int, int], int] = {}
        vpp: Dict[Tuple[int, int, int], int] = {}
        vsoev: Dict[Tuple[int, int], int] = {}
        vz: Dict[Tuple[int, int], int] = {}

        if with_y:
            for v in range(1, V + 1):
                vy[v] = m.add_var(f"y[i={i},v={v}]", VarKind.BINARY)
        for k in range(1, K + 1):
            for v in range(1, V + 1):
                vbb[k, v] = m.add_var(f"bb[i={i},k={k},v={v}]", VarKind.BINARY)
        for k in range(1, K + 1):
            for v in range(1, V + 1):
                vdd[k, v] = m.add_var(f"dd[i={i},k={k},v={v}]")
        for v in range(1, V + 1):
            for j in range(1, J + 1):
                for t in range(1, T + 1):
                    vx[v, j, t] = m.add_var(f"x[i={i},v={v},j={j},t={t}]",
                                            VarKind.BINARY)
        for v in range(1, V + 1):
            for j in range(1, J + 1):
                for t in range(1, T + 1):
                    vpp[v, j, t] = m.add_var(f"pp[i={i},v={v},j={j},t={t}]")
        for v in range(1, V + 1):
            for t in range(1, T + 1):
                vsoev[v, t] = m.add_var(f"soev[i={i},v={v},t={t}]",
                                        lb=0.0, ub=R)
        if sb and V >= 2:
            for v in range(1, V):
                for k in range(1, K + 1):
                    vz[v, k] = m.add_var(f"sbz[i={i},v={v},k={k}]",
                                         lb=0.0, ub=1.0)

        if with_y:
            for k in range(1, K + 1):
                for v in range(1, V + 1):
                    m.add_row(f"eq15_use[i={i},k={k},v={v}]",
                              [(vbb[k, v], 1.0), (vy[v], -1.0)], "<=", 0.0)
            coeffs = [(vy[v], 1.0) for v in range(1, V + 1)]
            coeffs.append((agg_vars["N_v"][i], -1.0))
            m.add_row(f"eq16_fleet[i={i}]", coeffs, "==", 0.0)

        # one block at a time per slot; charge only when parked at the depot
        for v in range(1, V + 1):
            for t in sched.active_t:
                m.add_row(f"eq17_one_block[i={i},v={v},t={t}]",
                          [(vbb[k, v], 1.0) for k in sched.at[t]], "<=", 1.0)
            for t in range(1, T + 1):
                coeffs = [(vx[v, j, t], 1.0) for j in range(1, J + 1)]
                coeffs += [(vbb[k, v], 1.0) for k in sched.at[t]]
                m.add_row(f"eq18_depot_charge[i={i},v={v},t={t}]",
                          coeffs, "<=", 1.0)

        # per-vehicle stored energy, same convention as the pooled recursion
        for v in range(1, V + 1):
            for s in range(1, S + 1):
                lo, hi = g.tau_lo(s), g.tau_hi(s)
                for t in range(lo + 1, hi + 1):
                    coeffs = [(vsoev[v, t], 1.0), (vsoev[v, t - 1], -1.0)]
                    coeffs += [(vpp[v, j, t - 1], -dt) for j in range(1, J + 1)]
                    for k in sched.dep[t]:
                        coeffs.append((vdd[k, v], 1.0))
                    for k in sched.ret[t]:
                        coeffs.append((vdd[k, v], -1.0))
                        coeffs.append((vbb[k, v],
                                       inst.blocks[k - 1].distance_km * eta))
                    m.add_row(f"eq20_soev[i={i},v={v},s={s},t={t}]",
                              coeffs, "==", 0.0)
                coeffs = [(vsoev[v, lo], 1.0), (vsoev[v, hi], -1.0)]
                coeffs += [(vpp[v, j, hi], -dt) for j in range(1, J + 1)]
                for k in sched.dep[lo]:
                    coeffs.append((vdd[k, v], 1.0))
                for k in sched.ret[lo]:
                    coeffs.append((vdd[k, v], -1.0))
                    coeffs.append((vbb[k, v], inst.blocks[k - 1].distance_km * eta))
                m.add_row(f"eq23_wrapv[i={i},v={v},s={s}]", coeffs, "==", 0.0)

        for v in range(1, V + 1):
            for j in range(1, J + 1):
                for t in range(1, T + 1):
                    m.add_row(f"eq21_pp_cap[i={i},v={v},j={j},t={t}]",
                              [(vpp[v, j, t], 1.0),
                               (vx[v, j, t], -P[i - 1][j - 1])], "<=", 0.0)

        for k in range(1, K + 1):
            D = inst.blocks[k - 1].distance_km
            for v in range(1, V + 1):
                if inst.variant is Variant.SURPLUS:
                    m.add_row(f"eq24_dd_lo[i={i},k={k},v={v}]",
                              [(vbb[k, v], D * eta), (vdd[k, v], -1.0)], "<=", 0.0)
                    m.add_row(f"eq24_dd_hi[i={i},k={k},v={v}]",
                              [(vdd[k, v], 1.0), (vbb[k, v], -R)], "<=", 0.0)
                else:
                    m.add_row(f"eq25_dd_eq[i={i},k={k},v={v}]",
                              [(vdd[k, v], 1.0), (vbb[k, v], -D * eta)], "==", 0.0)
                    m.add_row(f"eq25_dd_hi[i={i},k={k},v={v}]",
                              [(vdd[k, v], 1.0), (vbb[k, v], -R)], "<=", 0.0)

        # tie the per-vehicle layer to the fleet level
        def _match(name: str, coeffs: List[Tuple[int, float]],
                   sense: str, var_key: Optional[Tuple], family: str,
                   const_val: float, var_coef: float = -1.0) -> None:
            if agg_vars is not None:
                coeffs.append((agg_vars[family][var_key], var_coef))
                m.add_row(name, coeffs, sense, 0.0)
            else:
                m.add_row(name, coeffs, sense, const_val)

        for k in range(1, K + 1):
            _match(f"eq26_assign[i={i},k={k}]",
                   [(vbb[k, v], 1.0) for v in range(1, V + 1)], "==",
                   (k, i), "b", float(agg_const.b(k, i)) if agg_const else 0.0)
        for k in range(1, K + 1):
            _match(f"eq27_energy[i={i},k={k}]",
                   [(vdd[k, v], 1.0) for v in range(1, V + 1)], "==",
                   (k, i), "d", agg_const.d(k, i) if agg_const else 0.0)
        for j in range(1, J + 1):
            for t in range(1, T + 1):
                _match(f"eq28_chg_match[i={i},j={j},t={t}]",
                       [(vx[v, j, t], 1.0) for v in range(1, V + 1)], "==",
                       (i, j, t), "m",
                       agg_const.m(i, j, t) if agg_const else 0.0)
        for t in range(1, T + 1):
            coeffs = [(vpp[v, j, t], 1.0)
                      for v in range(1, V + 1) for j in range(1, J + 1)]
            _match(f"eq29_pwr_match[i={i},t={t}]", coeffs, "==",
                   (i, t), "p_v", agg_const.p_v(i, t) if agg_const else 0.0)
        for t in range(1, T + 1):
            coeffs = [(vsoev[v, t], 1.0) for v in range(1, V + 1)]
            _match(f"eq30_soe_pool[i={i},t={t}]", coeffs, "<=",
                   (i, t), "n",
                   R * agg_const.n(i, t) if agg_const else 0.0, var_coef=-R)

        if sb and with_y:
            for v in range(2, V + 1):
                m.add_row(f"sb_y[i={i},v={v}]",
                          [(vy[v], 1.0), (vy[v - 1], -1.0)], "<=", 0.0)
        if sb and V >= 2:
            # sbz[v,k] tracks whether slot v already uses a block <= k;
            # slot v+1 may take block k only if it does
            for v in range(1, V):
                for k in range(1, K + 1):
                    coeffs = [(vz[v, k], 1.0), (vbb[k, v], -1.0)]
                    if k > 1:
                        coeffs.append((vz[v, k - 1], -1.0))
                    m.add_row(f"sb_pfx[i={i},v={v},k={k}]", coeffs, "<=", 0.0)
            for k in range(1, K + 1):
                for v in range(1, V):
                    m.add_row(f"sb_lex[i={i},k={k},v={v}]",
                              [(vbb[k, v + 1], 1.0), (vz[v, k], -1.0)],
                              "<=", 0.0)


def _individual_expected_counts(inst: Instance, sched: _Sched,
                                slots: Dict[int, int], with_y: bool,
                                sb: bool) -> Dict[str, int]:
    g = inst.grid
    T, S = g.T, g.S
    K, J = inst.K, inst.J
    Ta = len(sched.active_t)
    counts: Dict[str, int] = {}

    def bump(fam: str, n: int) -> None:
        if n:
            counts[fam] = counts.get(fam, 0) + n

    for i, V in slots.items():
        if with_y:
            bump("eq15_use", K * V)
            bump("eq16_fleet", 1)
        bump("eq17_one_block", V * Ta)
        bump("eq18_depot_charge", V * T)
        bump("eq20_soev", V * (T - S))
        bump("eq23_wrapv", V * S)
        bump("eq21_pp_cap", V * J * T)
        if inst.variant is Variant.SURPLUS:
            bump("eq24_dd_lo", K * V)
            bump("eq24_dd_hi", K * V)
        else:
            bump("eq25_dd_eq", K * V)
            bump("eq25_dd_hi", K * V)
        bump("eq26_assign", K)
        bump("eq27_energy", K)
        bump("eq28_chg_match", J * T)
        bump("eq29_pwr_match", T)
        bump("eq30_soe_pool", T)
        if sb and with_y:
            bump("sb_y", V - 1)
        if sb and V >= 2:
            bump("sb_pfx", (V - 1) * K)
            bump("sb_lex", (V - 1) * K)
    return counts


def _assert_counts(m: MilpModel, expected: Dict[str, int], where: str) -> None:
    got = m.row_counts_by_family()
    if got != {k: v for k, v in expected.items() if v}:
        missing = {k: v for k, v in expected.items() if v and got.get(k) != v}
        extra = {k: v for k, v in got.items() if expected.get(k, 0) != v}
        raise ModelError(
            f"row-count mismatch (expected {missing}, built {extra})",
            context=where)


def _guard_size(n_vars: int, options: BuildOptions, where: str) -> None:
    if n_vars > options.max_variables:
        raise ModelTooLarge(
            f"model would have {n_vars} variables, over the "
            f"max_variables={options.max_variables} guard", context=where)


def _agg_var_count(inst: Instance, with_slack: bool) -> int:
    T = inst.grid.T
    K, I, J = inst.K, inst.I, inst.J
    L = len(inst.tariff.demand_groups)
    n = K * I + I + J + I * T + I * J * T + 2 * I * T + K * I + T + L
    if with_slack:
        n += J
    return n


def _indiv_var_count(inst: Instance, slots: Dict[int, int], with_y: bool,
                     sb: bool) -> int:
    T, K, J = inst.grid.T, inst.K, inst.J
    n = 0
    for V in slots.values():
        n += 2 * K * V + 2 * V * J * T + V * T
        if with_y:
            n += V
        if sb and V >= 2:
            n += (V - 1) * K
    return n


def _base_metadata(inst: Instance, problem: str) -> Dict:
    return {
        "problem": problem,
        "variant": inst.variant.value,
        "instance_digest": instance_digest(inst),
        "block_ids": [b.id for b in inst.blocks],
        "vehicle_ids": [v.id for v in inst.vehicles],
        "charger_ids": [c.id for c in inst.chargers],
        "demand_group_names": [g.name for g in inst.tariff.demand_groups],
    }


# --------------------------------------------------------------------------
# public builders
# --------------------------------------------------------------------------

def build_p1(inst: Instance, options: BuildOptions = DEFAULT_OPTIONS) -> MilpModel:
    """Fleet-level sizing model."""
    sched = _Sched(inst)
    _guard_size(_agg_var_count(inst, False), options, "builders.build_p1")
    m = MilpModel(name=f"p1_{inst.variant.value}", problem="p1",
                  variant=inst.variant.value, metadata=_base_metadata(inst, "p1"))
    _add_aggregate(m, inst, sched, fixed=None, slack_limit=None)
    _assert_counts(m, _aggregate_expected_counts(inst, sched), "builders.build_p1")
    return m


def build_p2(inst: Instance, options: BuildOptions = DEFAULT_OPTIONS) -> MilpModel:
    """Exact per-vehicle benchmark: fleet level + individual layer, K slots
    per type."""
    sched = _Sched(inst)
    slots = {i: inst.K for i in range(1, inst.I + 1)}
    n_vars = (_agg_var_count(inst, False)
              + _indiv_var_count(inst, slots, True, options.symmetry_breaking))
    _guard_size(n_vars, options, "builders.build_p2")
    m = MilpModel(name=f"p2_{inst.variant.value}", problem="p2",
                  variant=inst.variant.value, metadata=_base_metadata(inst, "p2"))
    m.metadata["symmetry_breaking"] = options.symmetry_breaking
    agg_vars = _add_aggregate(m, inst, sched, fixed=None, slack_limit=None)
    _add_individual(m, inst, sched, slots, agg_vars=agg_vars, agg_const=None,
                    with_y=True, sb=options.symmetry_breaking)
    expected = _aggregate_expected_counts(inst, sched)
    expected.update(_individual_expected_counts(inst, sched, slots, True,
                                                options.symmetry_breaking))
    _assert_counts(m, expected, "builders.build_p2")
    return m


def _check_agg_preconditions(inst: Instance, agg: AggSolution,
                             where: str) -> None:
    from .checking import check_solution  # local import, no cycle at module load

    p1m = build_p1(inst)
    rep = check_solution(p1m, agg.values, tol=1e-6)
    if not rep.ok:
        raise PreconditionViolated(
            f"aggregate solution violates the fleet-level model: "
            f"{rep.first_violation()}", context=where)


def build_p3(inst: Instance, agg: AggSolution,
             options: BuildOptions = DEFAULT_OPTIONS) -> List[P3Submodel]:
    """Per-type feasibility submodels for a fixed fleet-level solution.

    Types with no purchased vehicles are not emitted; their matching data
    must be all-zero, which is asserted here (it follows from feasibility
    of the fleet-level solution, which is also checked).
    """
    _check_agg_preconditions(inst, agg, "builders.build_p3")
    sched = _Sched(inst)
    out: List[P3Submodel] = []
    for i in range(1, inst.I + 1):
        V = agg.N_v(i)
        if V == 0:
            bad = [k for k in range(1, inst.K + 1) if agg.b(k, i) != 0]
            bad += [f"m[{i},{j},{t}]" for j in range(1, inst.J + 1)
                    for t in range(1, inst.grid.T + 1)
                    if abs(agg.m(i, j, t)) > 1e-9]
            if bad:
                raise PreconditionViolated(
                    f"type {i} has no vehicles but nonzero assignments: {bad[:4]}",
                    context="builders.build_p3")
            continue
        slots = {i: V}
        _guard_size(_indiv_var_count(inst, slots, False, False), options,
                    "builders.build_p3")
        m = MilpModel(name=f"p3_{inst.variant.value}_type{i}", problem="p3",
                      variant=inst.variant.value,
                      metadata=_base_metadata(inst, "p3"))
        m.metadata["type_index"] = i
        m.metadata["n_slots"] = V
        _add_individual(m, inst, sched, slots, agg_vars=None, agg_const=agg,
                        with_y=False, sb=False)
        expected = _individual_expected_counts(inst, sched, slots, False, False)
        _assert_counts(m, expected, "builders.build_p3")
        out.append(P3Submodel(type_index=i, n_slots=V, model=m))
    return out


def build_p4(inst: Instance, agg: AggSolution, slack_limit: int = 0,
             options: BuildOptions = DEFAULT_OPTIONS) -> MilpModel:
    """Re-optimize operations with purchases and assignment frozen.

    slack_limit >= 1 lets the model buy up to that many extra chargers of
    each type (integer slack on the charger-count cap) at their capital
    cost; slack 0 keeps the frozen charger counts exactly.
    """
    if slack_limit < 0:
        raise ModelError(f"slack_limit must be >= 0, got {slack_limit}",
                         context="builders.build_p4")
    _check_agg_preconditions(inst, agg, "builders.build_p4")
    sched = _Sched(inst)
    slots = {i: agg.N_v(i) for i in range(1, inst.I + 1)}
    n_vars = (_agg_var_count(inst, True)
              + _indiv_var_count(inst, slots, False, options.symmetry_breaking))
    _guard_size(n_vars, options, "builders.build_p4")
    m = MilpModel(name=f"p4_{inst.variant.value}", problem="p4",
                  variant=inst.variant.value, metadata=_base_metadata(inst, "p4"))
    m.metadata["symmetry_breaking"] = options.symmetry_breaking
    m.metadata["slack_limit"] = slack_limit
    agg_vars = _add_aggregate(m, inst, sched, fixed=agg, slack_limit=slack_limit)
    _add_individual(m, inst, sched, {i: V for i, V in slots.items() if V > 0},
                    agg_vars=agg_vars, agg_const=None, with_y=False,
                    sb=options.symmetry_breaking)
    # types with no vehicles still need their fleet-level charging zeroed:
    # without slots, eq28/eq29 sums are empty, so pin m and p_v directly
    for i, V in slots.items():
        if V:
            continue
        for j in range(1, inst.J + 1):
            for t in range(1, inst.grid.T + 1):
                m.add_row(f"eq28_chg_match[i={i},j={j},t={t}]",
                          [(agg_vars["m"][i, j, t], -1.0)], "==", 0.0)
        for t in range(1, inst.grid.T + 1):
            m.add_row(f"eq29_pwr_match[i={i},t={t}]",
                      [(agg_vars["p_v"][i, t], -1.0)], "==", 0.0)
    expected = _aggregate_expected_counts(inst, sched)
    indiv = _individual_expected_counts(
        inst, sched, {i: V for i, V in slots.items() if V > 0}, False,
        options.symmetry_breaking)
    for fam, n in indiv.items():
        expected[fam] = expected.get(fam, 0) + n
    n_empty = sum(1 for V in slots.values() if V == 0)
    expected["eq28_chg_match"] = expected.get("eq28_chg_match", 0) \
        + n_empty * inst.J * inst.grid.T
    expected["eq29_pwr_match"] = expected.get("eq29_pwr_match", 0) \
        + n_empty * inst.grid.T
    _assert_counts(m, expected, "builders.build_p4")
    return m
