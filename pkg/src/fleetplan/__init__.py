"""Depot fleet electrification planning toolkit.

Builds and solves time-indexed MILPs that size an electric vehicle fleet and
its depot chargers against scheduled service blocks, then recovers per-vehicle
schedules from the fleet-level answer and certifies the optimality bounds that
relate the two views.

The heavy lifting lives in submodules:

``domain``       core value types (instances, blocks, tariffs) and validation
``builders``     the four model builders (fleet sizing, per-vehicle benchmark,
                 exact disaggregation feasibility, re-optimizing recovery)
``solver``       backend-agnostic solve layer (in-process or file-based)
``pipeline``     cluster -> disaggregate workflow and bound verification
``oracle``       exhaustive ground truth for tiny instances
``bench``        subsampling sweep harness with CSV reporting
``gtfs``         schedule ingestion (GTFS feeds), kept import-lazy here
"""

from __future__ import annotations

from .domain import (
    Block,
    ChargerType,
    DemandGroup,
    Instance,
    PairingMatrix,
    ScheduleMatrices,
    Tariff,
    TimeGrid,
    ValidationReport,
    Variant,
    VehicleType,
    block_compatibility,
    compatibility_matrix,
    validate_instance,
)
from .errors import FleetError
from .instance_io import instance_digest, load_instance, save_instance
from .model import MilpModel
from .solution import AggSolution
from .solver import SolveResult, SolveStatus, SolverConfig, solve

__all__ = [
    "AggSolution",
    "Block",
    "ChargerType",
    "DemandGroup",
    "FleetError",
    "Instance",
    "MilpModel",
    "PairingMatrix",
    "ScheduleMatrices",
    "SolveResult",
    "SolveStatus",
    "SolverConfig",
    "Tariff",
    "TimeGrid",
    "ValidationReport",
    "Variant",
    "VehicleType",
    "block_compatibility",
    "compatibility_matrix",
    "instance_digest",
    "load_instance",
    "save_instance",
    "solve",
    "validate_instance",
]

__version__ = "0.1.0"
