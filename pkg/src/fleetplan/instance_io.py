"""Canonical instance file format (versioned JSON).

The encoder is deterministic (sorted keys, fixed indentation, trailing
newline) so save -> load -> save is byte-identical. Floats are emitted with
Python's shortest round-trip repr, so values survive the trip bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Union

from .domain import (
    Block,
    ChargerType,
    DemandGroup,
    Instance,
    PairingMatrix,
    Tariff,
    TimeGrid,
    VehicleType,
    Variant,
)
from .errors import SchemaError

SCHEMA_ID = "fleet-instance/1"


def instance_to_dict(inst: Instance) -> Dict[str, Any]:
    return {
        "schema": SCHEMA_ID,
        "variant": inst.variant.value,
        "time_grid": {
            "S": inst.grid.S,
            "T_d": inst.grid.T_d,
            "delta_t": inst.grid.delta_t,
            "day_weight": list(inst.grid.day_weight),
        },
        "vehicle_types": [
            {
                "id": v.id,
                "energy_capacity_kwh": v.energy_capacity_kwh,
                "drive_efficiency_kwh_per_km": v.drive_efficiency_kwh_per_km,
                "capital_cost": v.capital_cost,
                "maintenance_cost_per_km": v.maintenance_cost_per_km,
                "max_accept_power_kw": v.max_accept_power_kw,
            }
            for v in inst.vehicles
        ],
        "charger_types": [
            {
                "id": c.id,
                "rated_power_kw": c.rated_power_kw,
                "capital_cost": c.capital_cost,
            }
            for c in inst.chargers
        ],
        "pairing": {"p_kw": [list(row) for row in inst.pairing.p_kw]},
        "tariff": {
            "energy_price": list(inst.tariff.energy_price),
            "demand_groups": [
                {"name": g.name, "intervals": list(g.intervals), "rate": g.rate}
                for g in inst.tariff.demand_groups
            ],
            "grid_cap_kw": inst.tariff.grid_cap_kw,
        },
        "blocks": [
            {
                "id": b.id,
                "distance_km": b.distance_km,
                "start_interval": b.start_interval,
                "end_interval": b.end_interval,
            }
            for b in inst.blocks
        ],
    }


def instance_from_dict(data: Dict[str, Any]) -> Instance:
    try:
        schema = data.get("schema")
        if schema != SCHEMA_ID:
            raise SchemaError(f"unsupported schema {schema!r}, expected {SCHEMA_ID!r}",
                              context="instance_io.load_instance")
        tg = data["time_grid"]
        grid = TimeGrid(S=int(tg["S"]), T_d=int(tg["T_d"]),
                        delta_t=float(tg["delta_t"]),
                        day_weight=tuple(tg["day_weight"]))
        vehicles = tuple(
            VehicleType(
                id=str(v["id"]),
                energy_capacity_kwh=float(v["energy_capacity_kwh"]),
                drive_efficiency_kwh_per_km=float(v["drive_efficiency_kwh_per_km"]),
                capital_cost=float(v["capital_cost"]),
                maintenance_cost_per_km=float(v["maintenance_cost_per_km"]),
                max_accept_power_kw=float(v["max_accept_power_kw"]),
            )
            for v in data["vehicle_types"])
        chargers = tuple(
            ChargerType(id=str(c["id"]), rated_power_kw=float(c["rated_power_kw"]),
                        capital_cost=float(c["capital_cost"]))
            for c in data["charger_types"])
        pairing = PairingMatrix(tuple(tuple(row) for row in data["pairing"]["p_kw"]))
        tr = data["tariff"]
        tariff = Tariff(
            energy_price=tuple(tr["energy_price"]),
            demand_groups=tuple(
                DemandGroup(name=str(g["name"]), intervals=tuple(g["intervals"]),
                            rate=float(g["rate"]))
                for g in tr["demand_groups"]),
            grid_cap_kw=float(tr["grid_cap_kw"]),
        )
        blocks = tuple(
            Block(id=str(b["id"]), distance_km=float(b["distance_km"]),
                  start_interval=int(b["start_interval"]),
                  end_interval=int(b["end_interval"]))
            for b in data["blocks"])
        return Instance(variant=Variant(data["variant"]), grid=grid,
                        vehicles=vehicles, chargers=chargers, pairing=pairing,
                        tariff=tariff, blocks=blocks)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed instance document: {exc}",
                          context="instance_io.load_instance") from exc


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, indent=2) + "\n"


def save_instance(inst: Instance, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


def load_instance(path: Union[str, Path]) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read instance file {path}: {exc}",
                          context="instance_io.load_instance") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"instance file {path} is not valid JSON: {exc}",
                          context="instance_io.load_instance") from exc
    return instance_from_dict(data)


def instance_digest(inst: Instance) -> str:
    """sha256 of the canonical encoding; stable across processes."""
    return hashlib.sha256(dumps_instance(inst).encode("utf-8")).hexdigest()
