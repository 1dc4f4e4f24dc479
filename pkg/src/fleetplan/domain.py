"""Core domain model: time grid, equipment catalog, tariff, blocks, instances.

Interval convention: the horizon is a sequence of S representative days of
T_d intervals each, indexed 1..T with T = S*T_d. Interval t covers the
half-open span [(t-1)*delta_t, t*delta_t) hours within its day. A block
occupies intervals start_interval..end_interval inclusive, both 1-based.
All arrays handed to numpy are 0-based internally; public indices stay
1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import (
    AssumptionViolation,
    DomainError,
    InvalidInterval,
    InvalidMatrix,
    NegativeParameter,
)


class Variant(str, Enum):
    """Energy-accounting mode for served blocks.

    SURPLUS lets the drawn pool energy for a block exceed the strict trip
    need (the excess returns to the depot pool); EXACT pins it to the need.
    """

    SURPLUS = "SurplusAllowed"
    EXACT = "ExactEnergy"


@dataclass(frozen=True)
class TimeGrid:
    """Discretized horizon of S representative days.

    day_weight[s] is the number of real days the representative day s
    stands for (e.g. 365 for a single-day year model).
    """

    S: int
    T_d: int
    delta_t: float
    day_weight: Tuple[int, ...]

    def __post_init__(self):
        if self.S < 1 or self.T_d < 1:
            raise NegativeParameter(
                f"S and T_d must be >= 1, got S={self.S}, T_d={self.T_d}",
                context="domain.TimeGrid")
        if not self.delta_t > 0:
            raise NegativeParameter(
                f"delta_t must be > 0, got {self.delta_t}",
                context="domain.TimeGrid")
        object.__setattr__(self, "day_weight", tuple(int(w) for w in self.day_weight))
        if len(self.day_weight) != self.S:
            raise InvalidMatrix(
                f"day_weight has {len(self.day_weight)} entries for S={self.S}",
                context="domain.TimeGrid")
        if any(w < 1 for w in self.day_weight):
            raise NegativeParameter(
                f"day weights must be >= 1, got {self.day_weight}",
                context="domain.TimeGrid")

    @property
    def T(self) -> int:
        return self.S * self.T_d

    def tau_lo(self, s: int) -> int:
        """First interval of day s (1-based day, 1-based interval)."""
        return (s - 1) * self.T_d + 1

    def tau_hi(self, s: int) -> int:
        """Last interval of day s."""
        return s * self.T_d

    def day_of(self, t: int) -> int:
        """Representative day containing interval t."""
        return (t - 1) // self.T_d + 1

    def intervals(self) -> range:
        return range(1, self.T + 1)

    def day_intervals(self, s: int) -> range:
        return range(self.tau_lo(s), self.tau_hi(s) + 1)


@dataclass(frozen=True)
class VehicleType:
    """Purchasable vehicle model; costs are annualized dollars."""

    id: str
    energy_capacity_kwh: float
    drive_efficiency_kwh_per_km: float
    capital_cost: float
    maintenance_cost_per_km: float
    max_accept_power_kw: float

    def __post_init__(self):
        for name in ("energy_capacity_kwh", "drive_efficiency_kwh_per_km",
                     "capital_cost", "maintenance_cost_per_km",
                     "max_accept_power_kw"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise NegativeParameter(
                    f"vehicle type {self.id!r}: {name} must be finite and >= 0, got {v}",
                    context="domain.VehicleType")


@dataclass(frozen=True)
class ChargerType:
    """Purchasable charger model; capital is annualized dollars."""

    id: str
    rated_power_kw: float
    capital_cost: float

    def __post_init__(self):
        for name in ("rated_power_kw", "capital_cost"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise NegativeParameter(
                    f"charger type {self.id!r}: {name} must be finite and >= 0, got {v}",
                    context="domain.ChargerType")


@dataclass(frozen=True)
class PairingMatrix:
    """Effective charge power P[i][j] (kW) for vehicle type i on charger j."""

    p_kw: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.p_kw)
        object.__setattr__(self, "p_kw", rows)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise InvalidMatrix(
                f"pairing rows have unequal lengths {sorted(widths)}",
                context="domain.PairingMatrix")
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                if not np.isfinite(v) or v < 0:
                    raise NegativeParameter(
                        f"pairing power P[{i + 1},{j + 1}] must be finite and >= 0, got {v}",
                        context="domain.PairingMatrix")

    @property
    def shape(self) -> Tuple[int, int]:
        if not self.p_kw:
            return (0, 0)
        return (len(self.p_kw), len(self.p_kw[0]))

    def as_array(self) -> np.ndarray:
        return np.array(self.p_kw, dtype=float).reshape(self.shape)

    @staticmethod
    def from_min_rule(vehicles: Sequence[VehicleType],
                      chargers: Sequence[ChargerType]) -> "PairingMatrix":
        """min(charger rating, vehicle acceptance) for every pair."""
        rows = tuple(
            tuple(min(c.rated_power_kw, v.max_accept_power_kw) for c in chargers)
            for v in vehicles)
        return PairingMatrix(rows)


@dataclass(frozen=True)
class DemandGroup:
    """One billed peak: intervals it covers and its $/kW rate.

    The rate must already include the number of billing periods the group
    stands for (e.g. monthly rate times months covered).
    """

    name: str
    intervals: Tuple[int, ...]
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(int(t) for t in self.intervals))
        if self.rate < 0 or not np.isfinite(self.rate):
            raise NegativeParameter(
                f"demand group {self.name!r}: rate must be finite and >= 0, got {self.rate}",
                context="domain.DemandGroup")


@dataclass(frozen=True)
class Tariff:
    """Energy prices per interval, demand-charge groups, grid connection cap."""

    energy_price: Tuple[float, ...]
    demand_groups: Tuple[DemandGroup, ...]
    grid_cap_kw: float

    def __post_init__(self):
        object.__setattr__(self, "energy_price",
                           tuple(float(p) for p in self.energy_price))
        object.__setattr__(self, "demand_groups", tuple(self.demand_groups))
        for t, p in enumerate(self.energy_price, start=1):
            if not np.isfinite(p) or p < 0:
                raise NegativeParameter(
                    f"energy price at interval {t} must be finite and >= 0, got {p}",
                    context="domain.Tariff")
        if not np.isfinite(self.grid_cap_kw) or self.grid_cap_kw <= 0:
            raise NegativeParameter(
                f"grid_cap_kw must be finite and > 0, got {self.grid_cap_kw}",
                context="domain.Tariff")


@dataclass(frozen=True)
class Block:
    """One vehicle duty: total distance and the interval span it occupies."""

    id: str
    distance_km: float
    start_interval: int
    end_interval: int

    def __post_init__(self):
        if not np.isfinite(self.distance_km) or self.distance_km < 0:
            raise NegativeParameter(
                f"block {self.id!r}: distance_km must be finite and >= 0, "
                f"got {self.distance_km}", context="domain.Block")
        if self.start_interval < 1 or self.end_interval < self.start_interval:
            raise InvalidInterval(
                f"block {self.id!r}: bad interval span "
                f"[{self.start_interval}, {self.end_interval}]",
                context="domain.Block")


@dataclass(frozen=True)
class Instance:
    """A complete planning problem."""

    variant: Variant
    grid: TimeGrid
    vehicles: Tuple[VehicleType, ...]
    chargers: Tuple[ChargerType, ...]
    pairing: PairingMatrix
    tariff: Tariff
    blocks: Tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "chargers", tuple(self.chargers))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        I, J = len(self.vehicles), len(self.chargers)
        if self.pairing.shape != (I, J):
            raise InvalidMatrix(
                f"pairing shape {self.pairing.shape} does not match "
                f"(I={I}, J={J})", context="domain.Instance")
        if len(self.tariff.energy_price) != self.grid.T:
            raise InvalidMatrix(
                f"energy_price has {len(self.tariff.energy_price)} entries "
                f"for T={self.grid.T}", context="domain.Instance")
        for g in self.tariff.demand_groups:
            for t in g.intervals:
                if not 1 <= t <= self.grid.T:
                    raise InvalidInterval(
                        f"demand group {g.name!r}: interval {t} outside 1..{self.grid.T}",
                        context="domain.Instance")
        for b in self.blocks:
            if b.end_interval > self.grid.T:
                raise InvalidInterval(
                    f"block {b.id!r}: end interval {b.end_interval} outside horizon "
                    f"T={self.grid.T}", context="domain.Instance")
            if self.grid.day_of(b.start_interval) != self.grid.day_of(b.end_interval):
                raise InvalidInterval(
                    f"block {b.id!r}: span [{b.start_interval}, {b.end_interval}] "
                    f"crosses a representative-day boundary", context="domain.Instance")
        for coll, label in ((self.vehicles, "vehicle"), (self.chargers, "charger"),
                            (self.blocks, "block")):
            ids = [x.id for x in coll]
            if len(set(ids)) != len(ids):
                dup = sorted({i for i in ids if ids.count(i) > 1})
                raise DomainError(f"duplicate {label} ids: {dup}",
                                  context="domain.Instance")

    @property
    def K(self) -> int:
        return len(self.blocks)

    @property
    def I(self) -> int:
        return len(self.vehicles)

    @property
    def J(self) -> int:
        return len(self.chargers)

    def block_day(self, k: int) -> int:
        """Representative day of block k (both 1-based)."""
        return self.grid.day_of(self.blocks[k - 1].start_interval)

    def energy_need(self, k: int, i: int) -> float:
        """kWh consumed by block k when served by vehicle type i (1-based)."""
        return self.blocks[k - 1].distance_km * self.vehicles[i - 1].drive_efficiency_kwh_per_km


def block_compatibility(b1: Block, b2: Block, grid: TimeGrid) -> bool:
    """True iff one vehicle can serve both blocks.

    Blocks on different representative days never conflict. Within a day the
    spans must be disjoint with at least one full interval order between
    them: a block ending at t hands the vehicle back at the start of t+1, so
    [3,5] and [6,9] are compatible while [1,4] and [4,8] are not.
    """
    if grid.day_of(b1.start_interval) != grid.day_of(b2.start_interval):
        return True
    return b1.end_interval < b2.start_interval or b2.end_interval < b1.start_interval


def compatibility_matrix(inst: Instance) -> np.ndarray:
    """Symmetric K x K boolean matrix of block_compatibility; diagonal False."""
    K = inst.K
    out = np.zeros((K, K), dtype=bool)
    for a in range(K):
        for b in range(a + 1, K):
            ok = block_compatibility(inst.blocks[a], inst.blocks[b], inst.grid)
            out[a, b] = out[b, a] = ok
    return out


@dataclass(frozen=True)
class ScheduleMatrices:
    """Dense 0/1 schedule encodings derived from a block set.

    A[k, t-1] = 1 while block k is en route (inclusive span).
    U[k, t-1] = 1 at the departure interval.
    V[k, t-1] = 1 at the return interval (the interval after the span ends,
    wrapped to the first interval of the block's day when the span runs to
    the day's last interval).
    """

    A: np.ndarray
    U: np.ndarray
    V: np.ndarray

    @staticmethod
    def from_instance(inst: Instance) -> "ScheduleMatrices":
        K, T = inst.K, inst.grid.T
        A = np.zeros((K, T), dtype=np.int8)
        U = np.zeros((K, T), dtype=np.int8)
        V = np.zeros((K, T), dtype=np.int8)
        for k0, blk in enumerate(inst.blocks):
            s = inst.grid.day_of(blk.start_interval)
            A[k0, blk.start_interval - 1:blk.end_interval] = 1
            U[k0, blk.start_interval - 1] = 1
            if blk.end_interval < inst.grid.tau_hi(s):
                V[k0, blk.end_interval] = 1  # 0-based index of end_interval + 1
            else:
                V[k0, inst.grid.tau_lo(s) - 1] = 1
        return ScheduleMatrices(A=A, U=U, V=V)


@dataclass(frozen=True)
class CheckResult:
    check: str
    ok: bool
    detail: str = ""


@dataclass
class ValidationReport:
    """Outcome of validate_instance: one entry per check."""

    entries: List[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self) -> List[CheckResult]:
        return [e for e in self.entries if not e.ok]

    def raise_if_failed(self) -> None:
        bad = self.failures()
        if not bad:
            return
        assumption = [e for e in bad if e.check.startswith("assumption")]
        msg = "; ".join(e.detail or e.check for e in bad)
        if assumption:
            raise AssumptionViolation(msg, context="domain.validate_instance")
        raise DomainError(msg, context="domain.validate_instance")

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            mark = "PASS" if e.ok else "FAIL"
            lines.append(f"{mark} {e.check}" + (f": {e.detail}" if e.detail else ""))
        return "\n".join(lines)


def _serviceable(inst: Instance, k: int) -> Tuple[bool, str]:
    """Can any purchasable (vehicle, charger) pair cover block k's energy?

    Conservative day-budget test: type i works if its pack holds the trip
    energy and some charger pairing could refill that energy within one full
    day at rated power.
    """
    blk = inst.blocks[k - 1]
    day_hours = inst.grid.T_d * inst.grid.delta_t
    best: list[str] = []
    for i, vt in enumerate(inst.vehicles, start=1):
        need = inst.energy_need(k, i)
        if vt.energy_capacity_kwh < need:
            best.append(f"{vt.id}: pack {vt.energy_capacity_kwh} < need {need:.3f}")
            continue
        powers = inst.pairing.p_kw[i - 1]
        if any(p * day_hours >= need for p in powers):
            return True, ""
        best.append(f"{vt.id}: no charger refills {need:.3f} kWh in {day_hours} h")
    return False, f"block {blk.id!r}: " + "; ".join(best)


def validate_instance(inst: Instance) -> ValidationReport:
    """Full structural + serviceability validation.

    Structural invariants are already enforced by the constructors, so their
    entries normally pass; they are re-checked here so the report is
    self-contained. The serviceability check is necessary but not
    sufficient for feasibility of the planning problem itself.
    """
    rep = ValidationReport()
    rep.entries.append(CheckResult("grid", True,
                                   f"S={inst.grid.S} T_d={inst.grid.T_d} "
                                   f"delta_t={inst.grid.delta_t}"))
    rep.entries.append(CheckResult(
        "pairing_shape", inst.pairing.shape == (inst.I, inst.J),
        f"shape={inst.pairing.shape}"))
    rep.entries.append(CheckResult(
        "tariff_length", len(inst.tariff.energy_price) == inst.grid.T,
        f"{len(inst.tariff.energy_price)} prices for T={inst.grid.T}"))

    bad_spans = [b.id for b in inst.blocks
                 if inst.grid.day_of(b.start_interval) != inst.grid.day_of(b.end_interval)
                 or b.end_interval > inst.grid.T]
    rep.entries.append(CheckResult("block_spans", not bad_spans,
                                   f"offending: {bad_spans}" if bad_spans else
                                   f"{inst.K} blocks"))

    if inst.K == 0 or inst.I == 0:
        rep.entries.append(CheckResult(
            "assumption_serviceable", True,
            "vacuous (no blocks)" if inst.K == 0 else "vacuous (no vehicle types)"))
        return rep

    failing = []
    for k in range(1, inst.K + 1):
        ok, why = _serviceable(inst, k)
        if not ok:
            failing.append(why)
    rep.entries.append(CheckResult(
        "assumption_serviceable", not failing,
        failing[0] if failing else f"all {inst.K} blocks serviceable"))
    for extra in failing[1:]:
        rep.entries.append(CheckResult("assumption_serviceable", False, extra))
    return rep


def max_simultaneous_out(inst: Instance, block_indices: Iterable[int]) -> int:
    """Peak count of the given blocks (1-based indices) en route at once."""
    idx = list(block_indices)
    if not idx:
        return 0
    sched = ScheduleMatrices.from_instance(inst)
    return int(sched.A[[k - 1 for k in idx], :].sum(axis=0).max())
