"""Seeded synthetic instance generator for tests and benchmark sweeps.

Instances are guaranteed serviceable by construction: every generated block
fits its day with idle intervals left over, and the config is rejected when
the weakest purchasable (vehicle, charger) pairing could not refill the
longest block's energy within that block's own idle time. That makes the
one-vehicle-per-block plan feasible, so the aggregate problem always has a
solution (possibly an expensive one).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .catalog import (
    FLAT_ENERGY_PRICE,
    default_charger_types,
    default_tariff,
    default_vehicle_types,
    seasonal_demand_groups,
)
from .domain import (
    Block,
    ChargerType,
    Instance,
    PairingMatrix,
    Tariff,
    TimeGrid,
    VehicleType,
    Variant,
)
from .errors import ConfigInfeasible


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for generate_synthetic; defaults give a one-day depot study."""

    K: int
    seed: int = 0
    S: int = 1
    T_d: int = 24
    delta_t: float = 1.0
    day_weight: Tuple[int, ...] = ()
    variant: Variant = Variant.SURPLUS
    n_vehicle_types: int = 2
    n_charger_types: int = 3
    duration_min: int = 2          # intervals
    duration_max: int = 8
    km_per_hour: float = 18.0
    distance_jitter: Tuple[float, float] = (0.6, 1.0)
    grid_cap_kw: Optional[float] = None
    discount_rate: float = 0.0
    # "tou": overnight valley, evening ridge, small seeded jitter per
    # interval. The jitter keeps optima unique, which matters for solver
    # proof times; "flat" reproduces the constant default price.
    price_profile: str = "tou"

    def __post_init__(self):
        if self.K < 0:
            raise ConfigInfeasible(f"K must be >= 0, got {self.K}",
                                   context="synthetic.generate")
        if self.price_profile not in ("tou", "flat"):
            raise ConfigInfeasible(
                f"price_profile must be tou|flat, got {self.price_profile!r}",
                context="synthetic.generate")
        if not self.day_weight:
            object.__setattr__(self, "day_weight", tuple([365] * self.S))
        if self.duration_min < 1 or self.duration_max < self.duration_min:
            raise ConfigInfeasible(
                f"bad duration range [{self.duration_min}, {self.duration_max}]",
                context="synthetic.generate")
        if self.duration_max > self.T_d - 1:
            raise ConfigInfeasible(
                f"duration_max={self.duration_max} leaves no idle interval in a "
                f"{self.T_d}-interval day", context="synthetic.generate")


def _check_refillable(cfg: SyntheticConfig, vehicles: Sequence[VehicleType],
                      chargers: Sequence[ChargerType],
                      pairing: PairingMatrix) -> None:
    """Reject configs whose worst-case block cannot be refilled in its idle time."""
    max_km = cfg.duration_max * cfg.delta_t * cfg.km_per_hour * cfg.distance_jitter[1]
    idle_h = (cfg.T_d - cfg.duration_max) * cfg.delta_t
    ok = False
    for i, vt in enumerate(vehicles):
        need = max_km * vt.drive_efficiency_kwh_per_km
        if vt.energy_capacity_kwh < need:
            continue
        if any(p * idle_h >= need for p in pairing.p_kw[i]):
            ok = True
            break
    if not ok:
        raise ConfigInfeasible(
            f"worst-case block ({max_km:.1f} km, {idle_h:.1f} idle hours) cannot be "
            "refilled by any vehicle/charger pairing; shorten blocks or lower "
            "km_per_hour", context="synthetic.generate")


def generate_synthetic(cfg: SyntheticConfig) -> Instance:
    """Deterministic instance from a seed; same cfg -> identical instance."""
    rng = np.random.default_rng(cfg.seed)
    grid = TimeGrid(S=cfg.S, T_d=cfg.T_d, delta_t=cfg.delta_t,
                    day_weight=cfg.day_weight)

    vehicles = tuple(default_vehicle_types(cfg.discount_rate)[: cfg.n_vehicle_types])
    chargers = tuple(default_charger_types(cfg.discount_rate)[: cfg.n_charger_types])
    if len(vehicles) < cfg.n_vehicle_types or len(chargers) < cfg.n_charger_types:
        raise ConfigInfeasible(
            f"default catalog has {len(default_vehicle_types())} vehicle and "
            f"{len(default_charger_types())} charger types; requested "
            f"{cfg.n_vehicle_types}/{cfg.n_charger_types}",
            context="synthetic.generate")
    pairing = PairingMatrix.from_min_rule(vehicles, chargers)
    _check_refillable(cfg, vehicles, chargers, pairing)

    blocks = []
    for k in range(1, cfg.K + 1):
        s = int(rng.integers(1, cfg.S + 1))
        dur = int(rng.integers(cfg.duration_min, cfg.duration_max + 1))
        start_local = int(rng.integers(1, cfg.T_d - dur + 2))
        start = grid.tau_lo(s) + start_local - 1
        end = start + dur - 1
        km = dur * cfg.delta_t * cfg.km_per_hour * float(
            rng.uniform(cfg.distance_jitter[0], cfg.distance_jitter[1]))
        blocks.append(Block(id=f"synth{k:04d}", distance_km=round(km, 3),
                            start_interval=start, end_interval=end))

    cap = cfg.grid_cap_kw if cfg.grid_cap_kw is not None else max(
        1000.0, 150.0 * max(cfg.K, 1))
    if cfg.price_profile == "flat":
        tariff = default_tariff(grid, grid_cap_kw=cap)
    else:
        prices = []
        for t in grid.intervals():
            hour = ((t - 1) % cfg.T_d) * cfg.delta_t
            if hour < 6.0:
                mult = 0.6
            elif 17.0 <= hour < 21.0:
                mult = 1.5
            else:
                mult = 1.0
            prices.append(FLAT_ENERGY_PRICE * mult)
        jitter = rng.uniform(0.98, 1.02, size=grid.T)
        tariff = Tariff(
            energy_price=tuple(round(p * j, 6)
                               for p, j in zip(prices, jitter)),
            demand_groups=seasonal_demand_groups(grid),
            grid_cap_kw=cap)
    return Instance(variant=cfg.variant, grid=grid, vehicles=vehicles,
                    chargers=chargers, pairing=pairing, tariff=tariff,
                    blocks=tuple(blocks))
