"""Exhaustive ground truth for tiny instances.

Independently recomputes the per-vehicle benchmark optimum by brute force:
enumerate every way of grouping blocks onto vehicles (groups must be pairwise
compatible), every vehicle type per group, and every fleet/charger sizing a
grouping admits, then price the surviving charging subproblem exactly.

The subproblem keeps the charger-connection indicators integral. Relaxing
them would let two vehicles split one charger within a single interval,
which the benchmark model forbids, so an LP relaxation can undercut the true
optimum on tight instances. Everything else (powers, stored energy, drains,
peaks) is continuous.

Nothing here touches the model-builder code paths; the matrices are
assembled from scratch so the comparison is meaningful.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .domain import Instance, ScheduleMatrices, Variant, compatibility_matrix
from .errors import GuardExceeded, SolverCrashed

GUARD_K = 6
GUARD_I = 2
GUARD_J = 2

_CTX = "oracle.brute_force_oracle"


def _compatible_partitions(n: int, compat: np.ndarray):
    """Yield set partitions of range(n) whose groups are pairwise compatible.

    Standard restricted-growth recursion: element k either joins an existing
    group (only if compatible with every member) or opens a new one, so each
    partition is produced exactly once.
    """
    groups: List[List[int]] = []

    def rec(k: int):
        if k == n:
            yield tuple(tuple(g) for g in groups)
            return
        for g in groups:
            if all(compat[k, m] for m in g):
                g.append(k)
                yield from rec(k + 1)
                g.pop()
        groups.append([k])
        yield from rec(k + 1)
        groups.pop()

    yield from rec(0)


def _min_price_per_day(inst: Instance) -> List[float]:
    return [min(inst.tariff.energy_price[t - 1] for t in inst.grid.day_intervals(s))
            for s in range(1, inst.grid.S + 1)]


def _candidate_floor(inst: Instance, groups: Sequence[Tuple[int, ...]],
                     types: Sequence[int], min_price: List[float]) -> float:
    """Cost any completion of this grouping must pay, charger capital aside."""
    total = 0.0
    for g, i in zip(groups, types):
        vt = inst.vehicles[i - 1]
        total += vt.capital_cost
        for k0 in g:
            blk = inst.blocks[k0 + 1 - 1]
            s = inst.grid.day_of(blk.start_interval)
            need = inst.energy_need(k0 + 1, i)
            total += blk.distance_km * vt.maintenance_cost_per_km
            total += need * min_price[s - 1] * inst.grid.day_weight[s - 1]
    return total


def _evaluate(inst: Instance, slots: Sequence[Tuple[int, Tuple[int, ...]]],
              n_v: Dict[int, int], n_c: Sequence[int], sched: ScheduleMatrices,
              mip_rel_gap: float) -> Optional[float]:
    """Exact cost of one (grouping, sizing) candidate, or None if infeasible.

    slots: (vehicle type, 0-based block indices) per real vehicle.
    n_v:   owned count per type (>= number of slots of that type).
    n_c:   owned count per charger type.
    """
    grid = inst.grid
    T, J = grid.T, inst.J
    dt = grid.delta_t
    P = inst.pairing.as_array()
    exact = inst.variant is Variant.EXACT
    price = inst.tariff.energy_price
    weight = [grid.day_weight[grid.day_of(t) - 1] for t in range(1, T + 1)]

    depot = []                      # per slot: boolean depot mask, index t-1
    for _, blocks in slots:
        active = np.zeros(T, dtype=bool)
        for k0 in blocks:
            active |= sched.A[k0].astype(bool)
        depot.append(~active)

    # variable layout
    lb: List[float] = []
    ub: List[float] = []
    cost: List[float] = []
    integrality: List[int] = []

    def add(lo: float, hi: float, c: float = 0.0, integer: bool = False) -> int:
        lb.append(lo)
        ub.append(hi)
        cost.append(c)
        integrality.append(1 if integer else 0)
        return len(lb) - 1

    pp: Dict[Tuple[int, int, int], int] = {}    # (slot, j, t)
    x: Dict[Tuple[int, int, int], int] = {}
    soev: Dict[Tuple[int, int], int] = {}
    dd: Dict[Tuple[int, int], int] = {}         # (slot, block) surplus drains

    for v, (i, blocks) in enumerate(slots):
        R = inst.vehicles[i - 1].energy_capacity_kwh
        for t in range(1, T + 1):
            soev[v, t] = add(0.0, R)
            if depot[v][t - 1]:
                for j in range(1, J + 1):
                    if P[i - 1, j - 1] > 0.0:
                        pp[v, j, t] = add(0.0, P[i - 1, j - 1],
                                          dt * price[t - 1] * weight[t - 1])
                        x[v, j, t] = add(0.0, 1.0, integer=True)
        if not exact:
            for k0 in blocks:
                dd[v, k0] = add(inst.energy_need(k0 + 1, i), R)

    ppk = [add(0.0, math.inf, grp.rate) for grp in inst.tariff.demand_groups]

    rows_i: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    row_lo: List[float] = []
    row_hi: List[float] = []

    def row(entries: Dict[int, float], lo: float, hi: float):
        r = len(row_lo)
        for c, a in entries.items():
            rows_i.append(r)
            cols.append(c)
            vals.append(a)
        row_lo.append(lo)
        row_hi.append(hi)

    # stored-energy recursion, cyclic per representative day; drains debit in
    # the transition into the departure interval and credits land in the
    # transition into the return interval
    for v, (i, blocks) in enumerate(slots):
        starts = {inst.blocks[k0].start_interval: k0 for k0 in blocks}
        for s in range(1, grid.S + 1):
            lo_t, hi_t = grid.tau_lo(s), grid.tau_hi(s)
            for t in grid.day_intervals(s):
                prev = hi_t if t == lo_t else t - 1
                entries = {soev[v, t]: 1.0, soev[v, prev]: -1.0}
                rhs = 0.0
                for j in range(1, J + 1):
                    idx = pp.get((v, j, prev))
                    if idx is not None:
                        entries[idx] = -dt
                k0 = starts.get(t)
                if k0 is not None:
                    need = inst.energy_need(k0 + 1, i)
                    if exact:
                        rhs -= need
                    else:
                        entries[dd[v, k0]] = entries.get(dd[v, k0], 0.0) + 1.0
                for k0 in blocks:
                    if sched.V[k0, t - 1]:
                        if not exact:
                            entries[dd[v, k0]] = entries.get(dd[v, k0], 0.0) - 1.0
                            rhs -= inst.energy_need(k0 + 1, i)
                row(entries, rhs, rhs)

    # one charger per vehicle, power gated by connection
    for (v, j, t), xi in x.items():
        row({pp[v, j, t]: 1.0, xi: -P[slots[v][0] - 1, j - 1]}, -math.inf, 0.0)
    for v in range(len(slots)):
        for t in range(1, T + 1):
            idxs = [x[v, j, t] for j in range(1, J + 1) if (v, j, t) in x]
            if len(idxs) > 1:
                row({c: 1.0 for c in idxs}, -math.inf, 1.0)

    # owned-charger limits
    for j in range(1, J + 1):
        for t in range(1, T + 1):
            idxs = [x[v, j, t] for v in range(len(slots)) if (v, j, t) in x]
            if len(idxs) > n_c[j - 1]:
                row({c: 1.0 for c in idxs}, -math.inf, float(n_c[j - 1]))

    # depot storage pool per type: summed stored energy cannot exceed the
    # capacity of vehicles currently at the depot (owned minus en route)
    for i in sorted(n_v):
        members = [v for v, (ti, _) in enumerate(slots) if ti == i]
        if not members:
            continue
        R = inst.vehicles[i - 1].energy_capacity_kwh
        out = np.zeros(T, dtype=int)
        for v in members:
            out += ~depot[v]
        for t in range(1, T + 1):
            room = n_v[i] - int(out[t - 1])
            if room < len(members):
                row({soev[v, t]: 1.0 for v in members}, -math.inf, R * room)

    # grid connection cap and billed peaks
    for t in range(1, T + 1):
        draws = {pp[v, j, t]: 1.0 for v in range(len(slots))
                 for j in range(1, J + 1) if (v, j, t) in pp}
        if draws:
            row(dict(draws), -math.inf, inst.tariff.grid_cap_kw)
            for l0, grp in enumerate(inst.tariff.demand_groups):
                if t in grp.intervals:
                    entries = dict(draws)
                    entries[ppk[l0]] = -1.0
                    row(entries, -math.inf, 0.0)

    fixed = sum(inst.vehicles[i - 1].capital_cost * n for i, n in n_v.items())
    fixed += sum(ct.capital_cost * n for ct, n in zip(inst.chargers, n_c))
    for i, blocks in slots:
        for k0 in blocks:
            fixed += (inst.blocks[k0].distance_km
                      * inst.vehicles[i - 1].maintenance_cost_per_km)

    A = sp.csr_matrix((vals, (rows_i, cols)), shape=(len(row_lo), len(lb)))
    res = milp(np.array(cost),
               constraints=LinearConstraint(A, np.array(row_lo), np.array(row_hi)),
               integrality=np.array(integrality),
               bounds=Bounds(np.array(lb), np.array(ub)),
               options={"mip_rel_gap": mip_rel_gap, "presolve": True})
    if res.status == 2:
        return None
    if res.status != 0:
        raise SolverCrashed(
            f"oracle subproblem ended with status {res.status}: {res.message}",
            context=_CTX)
    return fixed + float(res.fun)


def brute_force_oracle(inst: Instance, *, mip_rel_gap: float = 1e-9) -> float:
    """Minimum cost of the per-vehicle benchmark, found by enumeration.

    Returns math.inf when no grouping is serviceable. Guarded to K <= 6 and
    at most two vehicle and charger types; anything larger explodes
    combinatorially and belongs to the regular solver path.
    """
    if inst.K > GUARD_K or inst.I > GUARD_I or inst.J > GUARD_J:
        raise GuardExceeded(
            f"K={inst.K}, I={inst.I}, J={inst.J} exceeds guard "
            f"({GUARD_K}, {GUARD_I}, {GUARD_J})", context=_CTX)
    if inst.K == 0:
        return 0.0

    sched = ScheduleMatrices.from_instance(inst)
    compat = compatibility_matrix(inst)
    min_price = _min_price_per_day(inst)
    P = inst.pairing.as_array()
    exact = inst.variant is Variant.EXACT
    total_need_positive = any(b.distance_km > 0 for b in inst.blocks)
    min_charger_cap = min((c.capital_cost for c in inst.chargers), default=0.0)

    # enumerate groupings and type choices, cheapest floor first
    candidates = []
    for groups in _compatible_partitions(inst.K, compat):
        for types in itertools.product(range(1, inst.I + 1), repeat=len(groups)):
            ok = True
            for g, i in zip(groups, types):
                R = inst.vehicles[i - 1].energy_capacity_kwh
                charges = P[i - 1].max() > 0.0 if inst.J else False
                for k0 in g:
                    need = inst.energy_need(k0 + 1, i)
                    if need > R or (need > 0 and not charges):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                floor = _candidate_floor(inst, groups, types, min_price)
                candidates.append((floor, groups, types))
    candidates.sort(key=lambda c: c[0])

    v_total = inst.K  # more vehicles than blocks is never needed
    nc_vectors = sorted(
        itertools.product(range(v_total + 1), repeat=inst.J),
        key=lambda nc: sum(c.capital_cost * n for c, n in zip(inst.chargers, nc)))

    best = math.inf
    for floor, groups, types in candidates:
        if floor + (min_charger_cap if total_need_positive else 0.0) >= best:
            break
        slots = [(i, g) for g, i in zip(groups, types)]
        base_nv = {}
        for i, _ in slots:
            base_nv[i] = base_nv.get(i, 0) + 1

        # extra idle vehicles only ever pay off in the exact variant, where
        # energy banked for a later block stays in the depot pool while its
        # vehicle is out; out_max bounds how much pool room extras can add
        extras_space: List[Dict[int, int]] = [{}]
        if exact:
            out_max = {}
            for i in base_nv:
                tot = np.zeros(inst.grid.T, dtype=int)
                for (ti, blocks) in slots:
                    if ti == i:
                        for k0 in blocks:
                            tot += sched.A[k0]
                out_max[i] = int(tot.max()) if tot.size else 0
            keys = sorted(base_nv)
            extras_space = [dict(zip(keys, combo)) for combo in itertools.product(
                *[range(out_max[i] + 1) for i in keys])]
            extras_space.sort(key=lambda e: sum(
                inst.vehicles[i - 1].capital_cost * n for i, n in e.items()))

        for extra in extras_space:
            extra_cap = sum(inst.vehicles[i - 1].capital_cost * n
                            for i, n in extra.items())
            if floor + extra_cap >= best:
                break
            n_v = {i: base_nv[i] + extra.get(i, 0) for i in base_nv}
            for nc in nc_vectors:
                nc_cap = sum(c.capital_cost * n for c, n in zip(inst.chargers, nc))
                if floor + extra_cap + nc_cap >= best:
                    break
                usable = True
                for g, i in zip(groups, types):
                    if any(inst.energy_need(k0 + 1, i) > 0 for k0 in g):
                        if not any(nc[j] and P[i - 1, j] > 0 for j in range(inst.J)):
                            usable = False
                            break
                if not usable:
                    continue
                val = _evaluate(inst, slots, n_v, list(nc), sched, mip_rel_gap)
                if val is not None and val < best:
                    best = val
    return best
