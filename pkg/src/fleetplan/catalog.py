"""Default equipment catalog and tariff profile for transit-depot studies.

Costs are annualized at construction: straight-line (capital / lifetime)
by default, capital-recovery-factor when a nonzero discount rate is given.
Charger capital includes installation. Vehicle drive efficiencies are
derived from nominal pack size over rated range (225 kWh / 106 mi and
450 kWh / 197 mi), rounded to 3 decimals.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from .domain import ChargerType, DemandGroup, Tariff, TimeGrid, VehicleType

# blended demand rates, $/kW per billing month
SUMMER_RATE_PER_MONTH = 24.09
OTHER_RATE_PER_MONTH = 17.92
SUMMER_MONTHS = 4
OTHER_MONTHS = 8

FLAT_ENERGY_PRICE = 0.132  # $/kWh


def annualize(capital: float, lifetime_years: float, discount_rate: float = 0.0) -> float:
    """Annual cost of a capital purchase.

    discount_rate = 0 gives straight-line capital/lifetime; otherwise the
    standard capital recovery factor r/(1-(1+r)^-n) applies.
    """
    if lifetime_years <= 0:
        raise ValueError(f"lifetime_years must be > 0, got {lifetime_years}")
    if discount_rate == 0.0:
        return capital / lifetime_years
    r = discount_rate
    return capital * r / (1.0 - (1.0 + r) ** (-lifetime_years))


def default_vehicle_types(discount_rate: float = 0.0) -> List[VehicleType]:
    return [
        VehicleType(
            id="bev_225",
            energy_capacity_kwh=225.0,
            drive_efficiency_kwh_per_km=1.319,
            capital_cost=annualize(800_000.0, 12.0, discount_rate),
            maintenance_cost_per_km=0.64,
            max_accept_power_kw=500.0,
        ),
        VehicleType(
            id="bev_450",
            energy_capacity_kwh=450.0,
            drive_efficiency_kwh_per_km=1.419,
            capital_cost=annualize(821_944.0, 12.0, discount_rate),
            maintenance_cost_per_km=0.64,
            max_accept_power_kw=500.0,
        ),
    ]


def default_charger_types(discount_rate: float = 0.0) -> List[ChargerType]:
    install = 22_626.0
    return [
        ChargerType(id="dcfc_50", rated_power_kw=50.0,
                    capital_cost=annualize(37_000.0 + install, 28.0, discount_rate)),
        ChargerType(id="dcfc_150", rated_power_kw=150.0,
                    capital_cost=annualize(45_000.0 + install, 28.0, discount_rate)),
        ChargerType(id="dcfc_500", rated_power_kw=500.0,
                    capital_cost=annualize(349_000.0 + 250_000.0, 28.0, discount_rate)),
    ]


def seasonal_demand_groups(grid: TimeGrid,
                           season_of_day: Optional[Sequence[str]] = None
                           ) -> Tuple[DemandGroup, ...]:
    """One demand group per representative day.

    season_of_day[s-1] in {"summer", "other"} selects the monthly rate; the
    group rate is that monthly rate times the months the season covers. With
    a single representative day the full 12-month blend is used.
    """
    if grid.S == 1 and season_of_day is None:
        rate = SUMMER_RATE_PER_MONTH * SUMMER_MONTHS + OTHER_RATE_PER_MONTH * OTHER_MONTHS
        return (DemandGroup(name="all_year",
                            intervals=tuple(grid.intervals()), rate=rate),)
    if season_of_day is None:
        # default split: first day summer, the rest off-season
        season_of_day = ["summer"] + ["other"] * (grid.S - 1)
    if len(season_of_day) != grid.S:
        raise ValueError(f"season_of_day has {len(season_of_day)} entries for S={grid.S}")
    groups = []
    for s in range(1, grid.S + 1):
        season = season_of_day[s - 1]
        if season == "summer":
            rate = SUMMER_RATE_PER_MONTH * SUMMER_MONTHS
        elif season == "other":
            rate = OTHER_RATE_PER_MONTH * OTHER_MONTHS
        else:
            raise ValueError(f"unknown season {season!r} for day {s}")
        groups.append(DemandGroup(name=f"peak_day{s}_{season}",
                                  intervals=tuple(grid.day_intervals(s)), rate=rate))
    return tuple(groups)


def default_tariff(grid: TimeGrid, grid_cap_kw: float = 10_000.0,
                   energy_price: float = FLAT_ENERGY_PRICE,
                   season_of_day: Optional[Sequence[str]] = None) -> Tariff:
    return Tariff(
        energy_price=tuple(energy_price for _ in grid.intervals()),
        demand_groups=seasonal_demand_groups(grid, season_of_day),
        grid_cap_kw=grid_cap_kw,
    )


def assemble_instance(grid: TimeGrid, blocks, variant,
                      grid_cap_kw: float = 10_000.0,
                      discount_rate: float = 0.0,
                      tariff: Optional[Tariff] = None):
    """Blocks + default catalog -> ready-to-solve Instance."""
    from .domain import Instance, PairingMatrix

    vehicles = tuple(default_vehicle_types(discount_rate))
    chargers = tuple(default_charger_types(discount_rate))
    pairing = PairingMatrix.from_min_rule(vehicles, chargers)
    if tariff is None:
        tariff = default_tariff(grid, grid_cap_kw=grid_cap_kw)
    return Instance(variant=variant, grid=grid, vehicles=vehicles,
                    chargers=chargers, pairing=pairing, tariff=tariff,
                    blocks=tuple(blocks))
