"""GTFS feed ingestion: parse tables, resolve service days, cut vehicle blocks.

A vehicle block is every trip sharing a ``block_id`` on one service day. Its
interval span is snapped outward (start floored to the grid, end ceiled) and
its distance is the sum of trip distances, measured along the trip's shape
polyline when shapes.txt is present and over consecutive stop coordinates
otherwise. Deadhead to/from the depot is not modeled.
"""

from __future__ import annotations

import math
import zipfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .catalog import (
    default_charger_types,
    default_tariff,
    default_vehicle_types,
)
from .domain import (
    Block,
    Instance,
    PairingMatrix,
    Tariff,
    TimeGrid,
    Variant,
)
from .errors import (
    BlockSpansDayBoundary,
    DanglingReference,
    EmptySelection,
    MalformedRow,
    MissingFile,
)

EARTH_RADIUS_KM = 6371.0088

_REQUIRED = {
    "trips.txt": ["trip_id", "service_id"],
    "stop_times.txt": ["trip_id", "arrival_time", "departure_time",
                       "stop_id", "stop_sequence"],
    "stops.txt": ["stop_id", "stop_lat", "stop_lon"],
}
_CAL_COLS = ["service_id", "monday", "tuesday", "wednesday", "thursday",
             "friday", "saturday", "sunday", "start_date", "end_date"]
_CALDATE_COLS = ["service_id", "date", "exception_type"]
_SHAPE_COLS = ["shape_id", "shape_pt_lat", "shape_pt_lon", "shape_pt_sequence"]

_WEEKDAYS = ["monday", "tuesday", "wednesday", "thursday", "friday",
             "saturday", "sunday"]


@dataclass
class GtfsFeed:
    """Parsed feed tables (string dtype throughout)."""

    trips: pd.DataFrame
    stop_times: pd.DataFrame
    stops: pd.DataFrame
    calendar: Optional[pd.DataFrame]
    calendar_dates: Optional[pd.DataFrame]
    shapes: Optional[pd.DataFrame]
    source: str = ""

    def service_universe(self) -> FrozenSet[str]:
        ids: set = set()
        if self.calendar is not None:
            ids.update(self.calendar["service_id"])
        if self.calendar_dates is not None:
            ids.update(self.calendar_dates["service_id"])
        return frozenset(ids)


def _read_table(root: Union[Path, zipfile.ZipFile], name: str,
                required: bool) -> Optional[pd.DataFrame]:
    if isinstance(root, zipfile.ZipFile):
        if name not in root.namelist():
            if required:
                raise MissingFile(f"feed is missing {name}", context="gtfs.parse_gtfs")
            return None
        with root.open(name) as fh:
            return pd.read_csv(fh, dtype=str, keep_default_na=False)
    path = root / name
    if not path.exists():
        if required:
            raise MissingFile(f"feed is missing {name}", context="gtfs.parse_gtfs")
        return None
    return pd.read_csv(path, dtype=str, keep_default_na=False)


def _require_columns(df: pd.DataFrame, name: str, cols: Sequence[str]) -> None:
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise MalformedRow(f"{name}: missing required columns {missing}",
                           context="gtfs.parse_gtfs")


def parse_gtfs(path: Union[str, Path]) -> GtfsFeed:
    """Read a GTFS directory or .zip and check referential integrity."""
    p = Path(path)
    if not p.exists():
        raise MissingFile(f"no such feed path: {p}", context="gtfs.parse_gtfs")
    root: Union[Path, zipfile.ZipFile]
    if p.is_file() and p.suffix == ".zip":
        root = zipfile.ZipFile(p)
    else:
        root = p

    trips = _read_table(root, "trips.txt", required=True)
    stop_times = _read_table(root, "stop_times.txt", required=True)
    stops = _read_table(root, "stops.txt", required=True)
    calendar = _read_table(root, "calendar.txt", required=False)
    calendar_dates = _read_table(root, "calendar_dates.txt", required=False)
    shapes = _read_table(root, "shapes.txt", required=False)

    for name, cols in _REQUIRED.items():
        df = {"trips.txt": trips, "stop_times.txt": stop_times,
              "stops.txt": stops}[name]
        _require_columns(df, name, cols)
    if calendar is None and calendar_dates is None:
        raise MissingFile("feed has neither calendar.txt nor calendar_dates.txt",
                          context="gtfs.parse_gtfs")
    if calendar is not None:
        _require_columns(calendar, "calendar.txt", _CAL_COLS)
    if calendar_dates is not None:
        _require_columns(calendar_dates, "calendar_dates.txt", _CALDATE_COLS)
    if shapes is not None:
        _require_columns(shapes, "shapes.txt", _SHAPE_COLS)

    feed = GtfsFeed(trips=trips, stop_times=stop_times, stops=stops,
                    calendar=calendar, calendar_dates=calendar_dates,
                    shapes=shapes, source=str(p))

    # referential integrity
    trip_ids = set(trips["trip_id"])
    bad = set(stop_times["trip_id"]) - trip_ids
    if bad:
        raise DanglingReference(
            f"stop_times.txt references unknown trip_id(s), e.g. {sorted(bad)[:3]}",
            context="gtfs.parse_gtfs")
    services = feed.service_universe()
    bad = set(trips["service_id"]) - services
    if bad:
        raise DanglingReference(
            f"trips.txt references unknown service_id(s), e.g. {sorted(bad)[:3]}",
            context="gtfs.parse_gtfs")
    bad = set(stop_times["stop_id"]) - set(stops["stop_id"])
    if bad:
        raise DanglingReference(
            f"stop_times.txt references unknown stop_id(s), e.g. {sorted(bad)[:3]}",
            context="gtfs.parse_gtfs")
    if shapes is not None and "shape_id" in trips.columns:
        used = {s for s in trips["shape_id"] if s}
        bad = used - set(shapes["shape_id"])
        if bad:
            raise DanglingReference(
                f"trips.txt references unknown shape_id(s), e.g. {sorted(bad)[:3]}",
                context="gtfs.parse_gtfs")
    return feed


def _parse_gtfs_time(value: str, file: str, row: int) -> float:
    """GTFS HH:MM:SS (hours may exceed 23) -> hours as float."""
    parts = value.strip().split(":")
    if len(parts) != 3:
        raise MalformedRow(f"{file} row {row}: bad time {value!r}",
                           context="gtfs.extract_blocks")
    try:
        h, m, s = (int(x) for x in parts)
    except ValueError as exc:
        raise MalformedRow(f"{file} row {row}: bad time {value!r}",
                           context="gtfs.extract_blocks") from exc
    if m < 0 or m > 59 or s < 0 or s > 59 or h < 0:
        raise MalformedRow(f"{file} row {row}: bad time {value!r}",
                           context="gtfs.extract_blocks")
    return h + m / 60.0 + s / 3600.0


def haversine_km(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Great-circle distance; accepts scalars or numpy arrays (degrees)."""
    la1, lo1, la2, lo2 = (np.radians(np.asarray(x, dtype=float))
                          for x in (lat1, lon1, lat2, lon2))
    dlat = la2 - la1
    dlon = lo2 - lo1
    a = np.sin(dlat / 2) ** 2 + np.cos(la1) * np.cos(la2) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))


@dataclass(frozen=True)
class SelectedDay:
    """One representative service day of the plan."""

    label: str
    weight: int
    date: Optional[str] = None                 # YYYYMMDD
    service_ids: Optional[FrozenSet[str]] = None
    season: Optional[str] = None               # "summer" | "other"

    def __post_init__(self):
        if (self.date is None) == (self.service_ids is None):
            raise ValueError(
                f"day {self.label!r}: give exactly one of date / service_ids")


@dataclass(frozen=True)
class ServiceDaySelection:
    days: Tuple[SelectedDay, ...]
    delta_t: float = 1.0
    overnight: str = "error"  # or "drop"

    def __post_init__(self):
        if not self.days:
            raise EmptySelection("selection has no days",
                                 context="gtfs.extract_blocks")
        if self.overnight not in ("error", "drop"):
            raise ValueError(f"overnight policy must be error|drop, got {self.overnight!r}")
        day_hours = 24.0
        n = day_hours / self.delta_t
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"delta_t={self.delta_t} does not divide a 24 h day")


def resolve_service_ids(feed: GtfsFeed, date: str) -> FrozenSet[str]:
    """Service ids active on a YYYYMMDD date per calendar + exceptions."""
    try:
        weekday = _WEEKDAYS[datetime.strptime(date, "%Y%m%d").weekday()]
    except ValueError as exc:
        raise MalformedRow(f"bad date {date!r}, expected YYYYMMDD",
                           context="gtfs.resolve_service_ids") from exc
    active: set = set()
    if feed.calendar is not None:
        cal = feed.calendar
        mask = ((cal["start_date"] <= date) & (cal["end_date"] >= date)
                & (cal[weekday] == "1"))
        active.update(cal.loc[mask, "service_id"])
    if feed.calendar_dates is not None:
        cd = feed.calendar_dates
        on_date = cd[cd["date"] == date]
        active.update(on_date.loc[on_date["exception_type"] == "1", "service_id"])
        active -= set(on_date.loc[on_date["exception_type"] == "2", "service_id"])
    return frozenset(active)


@dataclass
class IngestReport:
    """Counts describing what extract_blocks kept and dropped."""

    n_trips: int = 0
    n_blocks: int = 0
    skipped_no_block_id: int = 0
    dropped_overnight: int = 0
    distance_from_shapes: int = 0
    distance_from_stops: int = 0
    per_day: Dict[str, int] = field(default_factory=dict)

    def summary(self) -> str:
        days = ", ".join(f"{k}={v}" for k, v in self.per_day.items())
        return (f"{self.n_blocks} blocks from {self.n_trips} trips ({days}); "
                f"skipped {self.skipped_no_block_id} trips without block_id, "
                f"dropped {self.dropped_overnight} overnight blocks; "
                f"distance via shapes for {self.distance_from_shapes} trips, "
                f"via stops for {self.distance_from_stops}")


def _shape_lengths(feed: GtfsFeed, shape_ids: set) -> Dict[str, float]:
    if feed.shapes is None or not shape_ids:
        return {}
    sh = feed.shapes[feed.shapes["shape_id"].isin(shape_ids)].copy()
    try:
        sh["_lat"] = sh["shape_pt_lat"].astype(float)
        sh["_lon"] = sh["shape_pt_lon"].astype(float)
        sh["_seq"] = sh["shape_pt_sequence"].astype(int)
    except ValueError as exc:
        raise MalformedRow(f"shapes.txt: non-numeric coordinate or sequence ({exc})",
                           context="gtfs.extract_blocks") from exc
    out: Dict[str, float] = {}
    for sid, grp in sh.sort_values("_seq").groupby("shape_id", sort=False):
        lat = grp["_lat"].to_numpy()
        lon = grp["_lon"].to_numpy()
        if len(lat) < 2:
            out[sid] = 0.0
            continue
        out[sid] = float(haversine_km(lat[:-1], lon[:-1], lat[1:], lon[1:]).sum())
    return out


def _trip_distances(feed: GtfsFeed, trip_ids: List[str],
                    report: IngestReport) -> Dict[str, float]:
    """km per trip: shape polyline when available, else stop-to-stop."""
    trips = feed.trips[feed.trips["trip_id"].isin(trip_ids)]
    shape_of: Dict[str, str] = {}
    if feed.shapes is not None and "shape_id" in trips.columns:
        shape_of = {t: s for t, s in zip(trips["trip_id"], trips["shape_id"]) if s}
    lengths = _shape_lengths(feed, set(shape_of.values()))

    dist: Dict[str, float] = {}
    need_stops = [t for t in trip_ids if t not in shape_of]
    for t, sid in shape_of.items():
        dist[t] = lengths[sid]
        report.distance_from_shapes += 1

    if need_stops:
        st = feed.stop_times[feed.stop_times["trip_id"].isin(need_stops)].copy()
        try:
            st["_seq"] = st["stop_sequence"].astype(int)
        except ValueError as exc:
            raise MalformedRow(f"stop_times.txt: non-integer stop_sequence ({exc})",
                               context="gtfs.extract_blocks") from exc
        stops = feed.stops.set_index("stop_id")
        try:
            lat = stops["stop_lat"].astype(float)
            lon = stops["stop_lon"].astype(float)
        except ValueError as exc:
            raise MalformedRow(f"stops.txt: non-numeric stop_lat/stop_lon ({exc})",
                               context="gtfs.extract_blocks") from exc
        st["_lat"] = st["stop_id"].map(lat)
        st["_lon"] = st["stop_id"].map(lon)
        for tid, grp in st.sort_values("_seq").groupby("trip_id", sort=False):
            glat = grp["_lat"].to_numpy()
            glon = grp["_lon"].to_numpy()
            if len(glat) < 2:
                dist[tid] = 0.0
            else:
                dist[tid] = float(haversine_km(glat[:-1], glon[:-1],
                                               glat[1:], glon[1:]).sum())
            report.distance_from_stops += 1
    return dist


def extract_blocks(feed: GtfsFeed, selection: ServiceDaySelection
                   ) -> Tuple[TimeGrid, Tuple[Block, ...], IngestReport]:
    """Cut blocks for each selected day; returns (grid, blocks, report)."""
    delta_t = selection.delta_t
    T_d = int(round(24.0 / delta_t))
    grid = TimeGrid(S=len(selection.days), T_d=T_d, delta_t=delta_t,
                    day_weight=tuple(d.weight for d in selection.days))
    report = IngestReport()

    has_block_col = "block_id" in feed.trips.columns
    all_blocks: List[Block] = []

    for s, day in enumerate(selection.days, start=1):
        if day.service_ids is not None:
            services = frozenset(day.service_ids)
            unknown = services - feed.service_universe()
            if unknown:
                raise DanglingReference(
                    f"day {day.label!r}: unknown service_id(s) {sorted(unknown)[:3]}",
                    context="gtfs.extract_blocks")
        else:
            services = resolve_service_ids(feed, day.date)
        day_trips = feed.trips[feed.trips["service_id"].isin(services)]
        if not has_block_col:
            report.skipped_no_block_id += len(day_trips)
            report.per_day[day.label] = 0
            continue
        no_block = day_trips["block_id"] == ""
        report.skipped_no_block_id += int(no_block.sum())
        day_trips = day_trips[~no_block]
        report.n_trips += len(day_trips)

        trip_ids = list(day_trips["trip_id"])
        if not trip_ids:
            report.per_day[day.label] = 0
            continue

        st = feed.stop_times[feed.stop_times["trip_id"].isin(trip_ids)].copy()
        try:
            st["_seq"] = st["stop_sequence"].astype(int)
        except ValueError as exc:
            raise MalformedRow(f"stop_times.txt: non-integer stop_sequence ({exc})",
                               context="gtfs.extract_blocks") from exc
        st = st.sort_values(["trip_id", "_seq"])
        first = st.groupby("trip_id", sort=False).first()
        last = st.groupby("trip_id", sort=False).last()

        dist = _trip_distances(feed, trip_ids, report)

        offset = (s - 1) * T_d
        tau_hi = s * T_d
        per_block: Dict[str, List[Tuple[float, float, float]]] = {}
        for _, row in day_trips.iterrows():
            tid = row["trip_id"]
            dep = _parse_gtfs_time(str(first.loc[tid, "departure_time"]),
                                   "stop_times.txt", 0)
            arr = _parse_gtfs_time(str(last.loc[tid, "arrival_time"]),
                                   "stop_times.txt", 0)
            per_block.setdefault(row["block_id"], []).append((dep, arr, dist[tid]))

        day_count = 0
        for bid in sorted(per_block):
            legs = per_block[bid]
            start_h = min(l[0] for l in legs)
            end_h = max(l[1] for l in legs)
            total_km = sum(l[2] for l in legs)
            if end_h > 24.0 + 1e-9 or start_h >= 24.0:
                if selection.overnight == "drop":
                    report.dropped_overnight += 1
                    continue
                raise BlockSpansDayBoundary(
                    f"block {bid!r} on day {day.label!r} runs "
                    f"{start_h:.2f}h..{end_h:.2f}h, past the 24 h day",
                    context="gtfs.extract_blocks")
            start_iv = int(math.floor(start_h / delta_t + 1e-9)) + 1
            end_iv = int(math.ceil(end_h / delta_t - 1e-9))
            end_iv = max(end_iv, start_iv)
            blk = Block(id=f"{day.label}:{bid}", distance_km=total_km,
                        start_interval=offset + start_iv,
                        end_interval=min(offset + end_iv, tau_hi))
            all_blocks.append(blk)
            day_count += 1
        report.per_day[day.label] = day_count

    if not all_blocks:
        raise EmptySelection(
            "selection produced no blocks "
            f"(skipped {report.skipped_no_block_id} trips without block_id)",
            context="gtfs.extract_blocks")
    all_blocks.sort(key=lambda b: (b.start_interval, b.end_interval, b.id))
    report.n_blocks = len(all_blocks)
    return grid, tuple(all_blocks), report


def subsample(blocks: Sequence[Block], omega: int) -> Tuple[Block, ...]:
    """Every omega-th block from the (start_interval, id)-sorted sequence.

    Keeps indices 0, omega, 2*omega, ... so the result has ceil(K/omega)
    blocks. omega=1 returns the full sorted set.
    """
    if omega < 1:
        raise ValueError(f"omega must be >= 1, got {omega}")
    ordered = sorted(blocks, key=lambda b: (b.start_interval, b.id))
    return tuple(ordered[::omega])


def build_instance(feed: GtfsFeed, selection: ServiceDaySelection,
                   variant: Variant = Variant.SURPLUS,
                   grid_cap_kw: float = 10_000.0,
                   discount_rate: float = 0.0,
                   tariff: Optional[Tariff] = None) -> Tuple[Instance, IngestReport]:
    """Feed + selection + default catalog -> ready-to-solve Instance."""
    grid, blocks, report = extract_blocks(feed, selection)
    vehicles = tuple(default_vehicle_types(discount_rate))
    chargers = tuple(default_charger_types(discount_rate))
    pairing = PairingMatrix.from_min_rule(vehicles, chargers)
    if tariff is None:
        seasons = [d.season for d in selection.days]
        season_of_day = None if all(x is None for x in seasons) else [
            x or "other" for x in seasons]
        tariff = default_tariff(grid, grid_cap_kw=grid_cap_kw,
                                season_of_day=season_of_day)
    inst = Instance(variant=variant, grid=grid, vehicles=vehicles,
                    chargers=chargers, pairing=pairing, tariff=tariff,
                    blocks=blocks)
    return inst, report
