"""Shared fixtures: solver config, hand-built instances, synthetic factories, GTFS feeds."""

from __future__ import annotations

import zipfile
from pathlib import Path

import pytest

from fleetplan.domain import (
    Block,
    ChargerType,
    Instance,
    PairingMatrix,
    Tariff,
    TimeGrid,
    Variant,
    VehicleType,
)
from fleetplan.solver import SolverConfig
from fleetplan.synthetic import SyntheticConfig, generate_synthetic


@pytest.fixture
def cfg() -> SolverConfig:
    """Deterministic in-process solver config used by every solve in the suite."""
    return SolverConfig(solver="scipy", mip_rel_gap=1e-9, time_limit_s=600.0)


def make_tiny(
    seed: int = 0,
    K: int = 3,
    variant: Variant = Variant.SURPLUS,
    n_charger_types: int = 2,
    **kw,
) -> Instance:
    """Small synthetic instance; defaults sized so the exhaustive oracle can run."""
    config = SyntheticConfig(
        K=K,
        seed=seed,
        variant=variant,
        n_charger_types=n_charger_types,
        **kw,
    )
    return generate_synthetic(config)


@pytest.fixture
def tiny():
    return make_tiny


def build_witness(variant: Variant = Variant.SURPLUS) -> Instance:
    """One-day instance whose aggregate optimum admits no exact vehicle split.

    A single vehicle type and a single 50 kW charger type serve two blocks,
    120 km and 80 km, that occupy the same window [4, 12], so two vehicles
    are forced. Cheap energy (0.01/kWh) exists only in intervals 1 and 2,
    and the pooled fleet model exploits that window in a way no per-vehicle
    schedule with the same purchases reproduces: the exact split is
    infeasible, while re-optimized per-vehicle operation at the same
    investments costs exactly 2117.0 more per year (20 kWh repriced from
    0.01 to 0.30 across 365 days).
    """
    grid = TimeGrid(S=1, T_d=24, delta_t=1.0, day_weight=(365,))
    veh = VehicleType(
        id="bus",
        energy_capacity_kwh=225.0,
        drive_efficiency_kwh_per_km=1.0,
        capital_cost=66_666.67,
        maintenance_cost_per_km=0.64,
        max_accept_power_kw=500.0,
    )
    chg = ChargerType(id="plug50", rated_power_kw=50.0, capital_cost=2000.0)
    pairing = PairingMatrix.from_min_rule([veh], [chg])
    price = tuple(0.01 if t in (1, 2) else 0.30 for t in range(1, 25))
    tariff = Tariff(energy_price=price, demand_groups=(), grid_cap_kw=1000.0)
    blocks = (
        Block(id="A", distance_km=120.0, start_interval=4, end_interval=12),
        Block(id="B", distance_km=80.0, start_interval=4, end_interval=12),
    )
    return Instance(
        variant=variant,
        grid=grid,
        vehicles=(veh,),
        chargers=(chg,),
        pairing=pairing,
        tariff=tariff,
        blocks=blocks,
    )


@pytest.fixture
def witness() -> Instance:
    return build_witness()


def build_overload(variant: Variant = Variant.SURPLUS) -> Instance:
    """Instance that passes per-block validation yet has no feasible plan.

    Each of the two 120 km blocks alone is serviceable: the pack holds
    120 kWh and a 15 kW charger refills it within a day. Jointly they
    need 240 kWh per day, but the 9 kW grid connection delivers at most
    216 kWh per day in total, so the sizing model is infeasible no matter
    how many vehicles or chargers are bought.
    """
    grid = TimeGrid(S=1, T_d=24, delta_t=1.0, day_weight=(365,))
    veh = VehicleType(
        id="bus",
        energy_capacity_kwh=130.0,
        drive_efficiency_kwh_per_km=1.0,
        capital_cost=50_000.0,
        maintenance_cost_per_km=0.5,
        max_accept_power_kw=100.0,
    )
    chg = ChargerType(id="slow", rated_power_kw=15.0, capital_cost=1000.0)
    pairing = PairingMatrix.from_min_rule([veh], [chg])
    tariff = Tariff(
        energy_price=tuple(0.2 for _ in range(24)),
        demand_groups=(),
        grid_cap_kw=9.0,
    )
    blocks = (
        Block(id="A", distance_km=120.0, start_interval=4, end_interval=12),
        Block(id="B", distance_km=120.0, start_interval=4, end_interval=12),
    )
    return Instance(
        variant=variant,
        grid=grid,
        vehicles=(veh,),
        chargers=(chg,),
        pairing=pairing,
        tariff=tariff,
        blocks=blocks,
    )


def _write(path: Path, text: str) -> None:
    path.write_text(text.lstrip("\n"), encoding="utf-8")


def write_feed(root: Path) -> Path:
    """Write a minimal static transit feed exercising every ingest path.

    Weekday service ``wk`` carries block ``b1`` (two trips, 08:10 to 11:20)
    and block ``b2`` (one trip, 06:00 to 09:00). Saturday service ``sat``
    carries block ``b3``. Tuesday-only service ``night`` carries two
    boundary-crossing blocks ``b4`` and ``b5``. Trip ``t4`` has no block id.
    Calendar exceptions remove ``wk`` on 2025-12-25 and add ``sat`` on
    2025-12-26.
    """
    root.mkdir(parents=True, exist_ok=True)
    _write(
        root / "stops.txt",
        """
stop_id,stop_name,stop_lat,stop_lon
depot,Depot,42.3000,-71.0600
s1,First,42.3300,-71.0800
s2,Second,42.3600,-71.1000
""",
    )
    _write(
        root / "calendar.txt",
        """
service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date
wk,1,1,1,1,1,0,0,20250901,20251231
sat,0,0,0,0,0,1,0,20250901,20251231
night,0,1,0,0,0,0,0,20250901,20251231
""",
    )
    _write(
        root / "calendar_dates.txt",
        """
service_id,date,exception_type
wk,20251225,2
sat,20251226,1
""",
    )
    _write(
        root / "trips.txt",
        """
route_id,service_id,trip_id,block_id
r1,wk,t1,b1
r1,wk,t2,b1
r1,wk,t3,b2
r1,wk,t4,
r1,sat,t5,b3
r1,night,t6,b4
r1,night,t7,b5
""",
    )
    _write(
        root / "stop_times.txt",
        """
trip_id,arrival_time,departure_time,stop_id,stop_sequence
t1,08:10:00,08:10:00,depot,1
t1,09:40:00,09:40:00,s1,2
t2,09:50:00,09:50:00,s1,1
t2,11:20:00,11:20:00,depot,2
t3,06:00:00,06:00:00,depot,1
t3,07:30:00,07:30:00,s2,2
t3,09:00:00,09:00:00,depot,3
t4,12:00:00,12:00:00,s1,1
t4,13:00:00,13:00:00,s2,2
t5,10:00:00,10:00:00,depot,1
t5,11:30:00,11:30:00,s1,2
t6,23:30:00,23:30:00,depot,1
t6,24:40:00,24:40:00,s1,2
t7,24:10:00,24:10:00,s1,1
t7,25:00:00,25:00:00,depot,2
""",
    )
    return root


@pytest.fixture
def feed_dir(tmp_path: Path) -> Path:
    return write_feed(tmp_path / "feed")


@pytest.fixture
def feed_zip(tmp_path: Path) -> Path:
    root = write_feed(tmp_path / "feed")
    out = tmp_path / "feed.zip"
    with zipfile.ZipFile(out, "w") as zf:
        for child in sorted(root.iterdir()):
            zf.write(child, arcname=child.name)
    return out
