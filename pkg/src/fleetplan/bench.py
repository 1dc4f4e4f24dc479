"""Subsampling sweep harness.

Scales a block dataset down by keeping every omega-th block, runs the
cluster -> disaggregate workflow (and the per-vehicle benchmark) on each
scaled instance, and reports gaps, solve times and the benchmark/workflow
speedup as CSV. Rows are appended as they finish so an interrupted sweep
resumes by skipping keys already on disk.
"""

from __future__ import annotations

import csv
import dataclasses
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .catalog import assemble_instance
from .domain import Block, TimeGrid, Variant
from .errors import EmptyInput, FleetError
from .gtfs import subsample
from .pipeline import PipelineReport, run_cluster_disaggregate
from .solver import SolveStatus, SolverConfig

DEFAULT_OMEGAS = (500, 250, 100, 76, 50, 30, 21, 10)


@dataclass(frozen=True)
class SweepConfig:
    """What to sweep and how to solve each case."""

    omegas: Tuple[int, ...] = DEFAULT_OMEGAS
    variants: Tuple[Variant, ...] = (Variant.SURPLUS,)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(time_limit_s=3600.0))
    with_p2: bool = True
    slack_limit: int = 1
    grid_cap_kw: float = 10_000.0
    discount_rate: float = 0.0
    repetitions: int = 1
    parallel: bool = False
    out_csv: Optional[Path] = None

    def __post_init__(self):
        if not self.omegas:
            raise EmptyInput("omega list is empty", context="bench.SweepConfig")
        if any(w < 1 for w in self.omegas):
            raise EmptyInput(f"omegas must be >= 1, got {self.omegas}",
                             context="bench.SweepConfig")
        if len(set(self.omegas)) != len(self.omegas):
            raise EmptyInput(f"omegas must be distinct, got {self.omegas}",
                             context="bench.SweepConfig")
        if self.repetitions < 1:
            raise EmptyInput(f"repetitions must be >= 1, got {self.repetitions}",
                             context="bench.SweepConfig")


@dataclass
class SweepRow:
    """One (omega, variant) case. Times are solver wall seconds."""

    omega: int
    K: int
    variant: str
    status: str                      # "ok" or "error: ..."
    j1: Optional[float] = None
    p3_status: str = ""
    j4: Optional[float] = None
    slack_used: int = 0
    j2: Optional[float] = None
    j2_status: str = ""              # Optimal / TimeLimit / ""
    gap: Optional[float] = None
    gap_kind: str = ""               # gap21 | gap41
    t_p1: Optional[float] = None
    t_p3: Optional[float] = None
    t_p4: Optional[float] = None
    t_p2: Optional[float] = None
    build_p1: Optional[float] = None
    build_p3: Optional[float] = None
    build_p4: Optional[float] = None
    build_p2: Optional[float] = None
    speedup: Optional[float] = None

    @property
    def key(self) -> Tuple[int, str]:
        return (self.omega, self.variant)


CSV_COLUMNS = [f.name for f in dataclasses.fields(SweepRow)]

_FLOATS = {"j1", "j4", "j2", "gap", "t_p1", "t_p3", "t_p4", "t_p2",
           "build_p1", "build_p3", "build_p4", "build_p2", "speedup"}
_INTS = {"omega", "K", "slack_used"}


def row_to_csv(row: SweepRow) -> Dict[str, str]:
    out = {}
    for name in CSV_COLUMNS:
        val = getattr(row, name)
        out[name] = "" if val is None else repr(val) if name in _FLOATS else str(val)
    return out


def row_from_csv(rec: Dict[str, str]) -> SweepRow:
    kwargs = {}
    for name in CSV_COLUMNS:
        raw = rec[name]
        if name in _FLOATS:
            kwargs[name] = float(raw) if raw else None
        elif name in _INTS:
            kwargs[name] = int(raw)
        else:
            kwargs[name] = raw
    return SweepRow(**kwargs)


def write_rows(path: Path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row_to_csv(row))


def read_rows(path: Path) -> List[SweepRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [row_from_csv(rec) for rec in csv.DictReader(fh)]


def _median(xs: List[Optional[float]]) -> Optional[float]:
    vals = [x for x in xs if x is not None]
    return statistics.median(vals) if vals else None


def _row_from_report(omega: int, rep: PipelineReport) -> SweepRow:
    p2 = rep.stages.get("p2")
    p2_solved = p2 is not None and p2.proven
    if rep.gap21 is not None and p2_solved:
        gap, kind = rep.gap21, "gap21"
    elif rep.gap41 is not None:
        gap, kind = rep.gap41, "gap41"
    else:
        gap, kind = None, ""
    j2_status = "" if p2 is None else (
        "TimeLimit" if p2.status == SolveStatus.TIMEOUT.value else p2.status)
    speedup = None
    if p2_solved and rep.stage_time("p1") is not None and rep.stage_time("p4") is not None:
        denom = rep.stage_time("p1") + rep.stage_time("p4")
        if denom > 0:
            speedup = p2.solve_time_s / denom

    def build_time(key: str) -> Optional[float]:
        st = rep.stages.get(key)
        return None if st is None else st.build_time_s

    return SweepRow(
        omega=omega, K=rep.K, variant=rep.variant, status="ok",
        j1=rep.j1, p3_status="" if rep.p3_feasible is None else
        ("Feasible" if rep.p3_feasible else "Infeasible"),
        j4=rep.j4, slack_used=rep.slack_used,
        j2=rep.j2, j2_status=j2_status, gap=gap, gap_kind=kind,
        t_p1=rep.stage_time("p1"), t_p3=rep.stage_time("p3"),
        t_p4=rep.stage_time("p4"), t_p2=rep.stage_time("p2"),
        build_p1=build_time("p1"), build_p3=build_time("p3"),
        build_p4=build_time("p4"), build_p2=build_time("p2"),
        speedup=speedup)


def _merge_repetitions(rows: List[SweepRow]) -> SweepRow:
    """First row's values with median times across repetitions."""
    base = dataclasses.replace(rows[0])
    for name in ("t_p1", "t_p3", "t_p4", "t_p2",
                 "build_p1", "build_p3", "build_p4", "build_p2"):
        setattr(base, name, _median([getattr(r, name) for r in rows]))
    if base.speedup is not None and base.t_p2 is not None \
            and base.t_p1 is not None and base.t_p4 is not None \
            and base.t_p1 + base.t_p4 > 0:
        base.speedup = base.t_p2 / (base.t_p1 + base.t_p4)
    return base


def _run_case(grid: TimeGrid, blocks: Sequence[Block], omega: int,
              variant: Variant, cfg: SweepConfig) -> SweepRow:
    sub = subsample(blocks, omega)
    try:
        inst = assemble_instance(grid, sub, variant,
                                 grid_cap_kw=cfg.grid_cap_kw,
                                 discount_rate=cfg.discount_rate)
        reps = []
        for _ in range(cfg.repetitions):
            report = run_cluster_disaggregate(
                inst, cfg.solver, slack_limit=cfg.slack_limit,
                with_p2=cfg.with_p2)
            reps.append(_row_from_report(omega, report))
        row = _merge_repetitions(reps)
    except FleetError as exc:
        row = SweepRow(omega=omega, K=len(sub), variant=variant.value,
                       status=f"error: {exc}")
    if cfg.parallel:
        row.speedup = None  # interleaved solves make wall-time ratios meaningless
    return row


def run_sweep(grid: TimeGrid, blocks: Sequence[Block],
              cfg: SweepConfig) -> List[SweepRow]:
    """One row per (omega, variant); resumes from cfg.out_csv when present."""
    if not blocks:
        raise EmptyInput("no blocks to sweep over", context="bench.run_sweep")

    done: Dict[Tuple[int, str], SweepRow] = {}
    if cfg.out_csv is not None and Path(cfg.out_csv).exists():
        for row in read_rows(Path(cfg.out_csv)):
            done[row.key] = row

    cases = [(omega, variant) for omega in cfg.omegas for variant in cfg.variants]
    todo = [c for c in cases if (c[0], c[1].value) not in done]

    fresh: Dict[Tuple[int, str], SweepRow] = {}
    if cfg.parallel and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(todo))) as pool:
            for row in pool.map(
                    lambda c: _run_case(grid, blocks, c[0], c[1], cfg), todo):
                fresh[row.key] = row
        if cfg.out_csv is not None:
            existing = list(done.values()) + [fresh[(o, v.value)] for o, v in todo]
            write_rows(Path(cfg.out_csv), existing)
    else:
        writer = None
        fh = None
        if cfg.out_csv is not None:
            new_file = not Path(cfg.out_csv).exists()
            fh = open(cfg.out_csv, "a", newline="", encoding="utf-8")
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            if new_file:
                writer.writeheader()
        try:
            for omega, variant in todo:
                row = _run_case(grid, blocks, omega, variant, cfg)
                fresh[row.key] = row
                if writer is not None:
                    writer.writerow(row_to_csv(row))
                    fh.flush()
        finally:
            if fh is not None:
                fh.close()

    out = []
    for omega, variant in cases:
        key = (omega, variant.value)
        out.append(done.get(key) or fresh[key])
    return out


@dataclass
class SummaryStats:
    n_rows: int
    max_gap: Optional[float]
    median_gap: Optional[float]
    max_speedup: Optional[float]
    p3_feasible_count: int
    p2_timeout_count: int
    error_count: int

    def to_text(self) -> str:
        def pct(x):
            return "n/a" if x is None else f"{100 * x:.4f}%"
        return (f"{self.n_rows} rows: max gap {pct(self.max_gap)}, "
                f"median gap {pct(self.median_gap)}, "
                f"max speedup {'n/a' if self.max_speedup is None else f'{self.max_speedup:.1f}x'}, "
                f"{self.p3_feasible_count} exact-recovery feasible, "
                f"{self.p2_timeout_count} benchmark timeouts, "
                f"{self.error_count} errors")


def summarize(rows: Sequence[SweepRow]) -> SummaryStats:
    if not rows:
        raise EmptyInput("no rows to summarize", context="bench.summarize")
    gaps = [r.gap for r in rows if r.gap is not None]
    speedups = [r.speedup for r in rows if r.speedup is not None]
    return SummaryStats(
        n_rows=len(rows),
        max_gap=max(gaps) if gaps else None,
        median_gap=statistics.median(gaps) if gaps else None,
        max_speedup=max(speedups) if speedups else None,
        p3_feasible_count=sum(1 for r in rows if r.p3_status == "Feasible"),
        p2_timeout_count=sum(1 for r in rows if r.j2_status == "TimeLimit"),
        error_count=sum(1 for r in rows if r.status != "ok"))


def emit_plot_series(rows: Sequence[SweepRow], out_dir: Path) -> List[Path]:
    """(K, gap) and (K, time) series files any plotting tool can read."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gap_path = out_dir / "gap_vs_k.csv"
    time_path = out_dir / "time_vs_k.csv"
    with open(gap_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "variant", "gap", "gap_kind"])
        for r in sorted(rows, key=lambda r: (r.K, r.variant)):
            if r.gap is not None:
                w.writerow([r.K, r.variant, repr(r.gap), r.gap_kind])
    with open(time_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "variant", "t_p1", "t_p3", "t_p4", "t_p2", "speedup"])
        for r in sorted(rows, key=lambda r: (r.K, r.variant)):
            w.writerow([r.K, r.variant] + [
                "" if x is None else repr(x)
                for x in (r.t_p1, r.t_p3, r.t_p4, r.t_p2, r.speedup)])
    return [gap_path, time_path]
