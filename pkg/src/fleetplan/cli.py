"""Command-line entry point.

One subcommand per workflow step: ingest schedule data, generate synthetic
instances, validate, emit solver files, run the cluster -> disaggregate
pipeline, verify the bound chain, sweep subsample sizes, or cross-check an
instance against the exhaustive oracle.

Exit codes: 0 success, 1 domain error (validation failure, infeasibility
where success was required, failed bound check), 2 usage error (bad flags,
missing files), 3 solver or environment error. Human-readable summaries go
to standard output; machine-readable artifacts are written only to paths
given via flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

from .domain import Variant
from .errors import FleetError, SolverError
from .solver import SolverConfig

_VARIANTS = {"surplus": Variant.SURPLUS, "exact": Variant.EXACT}


def _solver_config(args) -> SolverConfig:
    cfg = SolverConfig(solver=args.solver)
    if getattr(args, "time_limit", None) is not None:
        cfg = cfg.with_limit(args.time_limit)
    if getattr(args, "mip_gap", None) is not None:
        cfg = cfg.with_gap(args.mip_gap)
    return cfg


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", default="auto",
                   help="auto | scipy | self | cbc | highs | command")
    p.add_argument("--time-limit", type=float, default=None, metavar="SECONDS")
    p.add_argument("--mip-gap", type=float, default=None,
                   help="relative MIP gap target")


def _add_instance_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, metavar="FILE",
                   help="instance JSON file")
    p.add_argument("--variant", choices=sorted(_VARIANTS),
                   help="override the variant stored in the instance")


def _load_instance(args):
    from .instance_io import load_instance

    path = Path(args.instance)
    if not path.is_file():
        raise _Usage(f"instance file not found: {path}")
    inst = load_instance(path)
    if getattr(args, "variant", None):
        inst = dataclasses.replace(inst, variant=_VARIANTS[args.variant])
    return inst


class _Usage(Exception):
    pass


# ------------------------------------------------------------ subcommands --

def _cmd_ingest(args) -> int:
    from .gtfs import SelectedDay, ServiceDaySelection, build_instance, parse_gtfs
    from .instance_io import save_instance

    gtfs_path = Path(args.gtfs)
    if not gtfs_path.exists():
        raise _Usage(f"GTFS path not found: {gtfs_path}")
    dates: List[str] = args.date
    weights: List[int] = args.weight or []
    seasons: List[str] = args.season or []
    if not weights:
        weights = [365] if len(dates) == 1 else []
    if len(weights) != len(dates):
        raise _Usage(f"{len(dates)} dates need {len(dates)} weights "
                     f"(got {len(weights)}); pass --weight per date")
    if seasons and len(seasons) != len(dates):
        raise _Usage("pass --season once per date or not at all")
    days = tuple(
        SelectedDay(label=f"d{n}_{date}", weight=w, date=date,
                    season=(seasons[n - 1] if seasons else None))
        for n, (date, w) in enumerate(zip(dates, weights), start=1))
    selection = ServiceDaySelection(days=days, delta_t=args.delta_t,
                                    overnight=args.overnight)
    feed = parse_gtfs(gtfs_path)
    inst, report = build_instance(
        feed, selection, variant=_VARIANTS[args.variant or "surplus"],
        grid_cap_kw=args.grid_cap, discount_rate=args.discount_rate)
    save_instance(inst, Path(args.out))
    print(report.summary())
    print(f"instance with K={inst.K} blocks written to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    from .instance_io import save_instance
    from .synthetic import SyntheticConfig, generate_synthetic

    cfg = SyntheticConfig(K=args.k, seed=args.seed, S=args.days,
                          variant=_VARIANTS[args.variant or "surplus"],
                          n_vehicle_types=args.vehicle_types,
                          n_charger_types=args.charger_types)
    if args.grid_cap is not None:
        cfg = dataclasses.replace(cfg, grid_cap_kw=args.grid_cap)
    inst = generate_synthetic(cfg)
    save_instance(inst, Path(args.out))
    print(f"synthetic instance K={inst.K} I={inst.I} J={inst.J} "
          f"T={inst.grid.T} seed={args.seed} written to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    from .domain import validate_instance

    inst = _load_instance(args)
    report = validate_instance(inst)
    print(report.summary())
    return 0 if report.ok else 1


def _cmd_emit_model(args) -> int:
    from .builders import DEFAULT_OPTIONS, build_p1, build_p2, build_p3, build_p4
    from .modelio import write_mps
    from .pipeline import _polish_agg
    from .solver import solve

    inst = _load_instance(args)
    out = Path(args.out)
    written: List[Path] = []
    if args.problem in ("p1", "p2"):
        model = build_p1(inst) if args.problem == "p1" else build_p2(inst)
        out.write_text(write_mps(model), encoding="utf-8")
        written.append(out)
        print(model.stats())
    else:
        cfg = _solver_config(args)
        p1 = build_p1(inst)
        res = solve(p1, cfg)
        if not res.ok or res.values is None:
            print(f"cannot emit {args.problem}: fleet-level solve returned "
                  f"{res.status.value}", file=sys.stderr)
            return 1
        agg, _ = _polish_agg(inst, res, cfg, DEFAULT_OPTIONS)
        if args.problem == "p3":
            for sub in build_p3(inst, agg):
                path = out.with_name(f"{out.stem}_type{sub.type_index}{out.suffix}")
                path.write_text(write_mps(sub.model), encoding="utf-8")
                written.append(path)
                print(f"type {sub.type_index}: {sub.model.stats()}")
            if not written:
                print("no vehicle types purchased; nothing to emit")
        else:
            model = build_p4(inst, agg, slack_limit=args.slack_limit)
            out.write_text(write_mps(model), encoding="utf-8")
            written.append(out)
            print(model.stats())
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_run(args) -> int:
    from .pipeline import run_cluster_disaggregate

    inst = _load_instance(args)
    report = run_cluster_disaggregate(
        inst, _solver_config(args), slack_limit=args.slack_limit,
        with_p2=args.with_p2)
    text = report.to_text()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"report written to {args.out}")
    return 0 if report.ok else 1


def _cmd_verify_bounds(args) -> int:
    from .pipeline import verify_bounds

    inst = _load_instance(args)
    check = verify_bounds(inst, _solver_config(args), with_p2=args.with_p2,
                          slack_limit=args.slack_limit, strict=args.strict)
    text = check.summary()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"report written to {args.out}")
    return 0 if not check.failed else 1


def _cmd_sweep(args) -> int:
    from .bench import SweepConfig, emit_plot_series, run_sweep, summarize

    inst = _load_instance(args)
    variants = tuple(_VARIANTS[v] for v in (args.variants or ["surplus"]))
    omegas = tuple(int(w) for w in args.omegas.split(","))
    cfg = SweepConfig(
        omegas=omegas, variants=variants, solver=_solver_config(args),
        with_p2=args.with_p2, slack_limit=args.slack_limit,
        repetitions=args.repetitions, parallel=args.parallel,
        out_csv=Path(args.out) if args.out else None)
    rows = run_sweep(inst.grid, inst.blocks, cfg)
    print(summarize(rows).to_text())
    if args.plot_dir:
        for path in emit_plot_series(rows, Path(args.plot_dir)):
            print(f"wrote {path}")
    if args.out:
        print(f"rows written to {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    from .oracle import brute_force_oracle

    inst = _load_instance(args)
    value = brute_force_oracle(inst)
    print(f"oracle optimum: {value:.6f}")
    return 0


# ----------------------------------------------------------------- parser --

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetplan",
        description="Depot fleet electrification planning toolchain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="GTFS feed -> instance JSON")
    p.add_argument("--gtfs", required=True, help="feed directory or .zip")
    p.add_argument("--date", action="append", required=True,
                   metavar="YYYYMMDD", help="service day (repeatable)")
    p.add_argument("--weight", action="append", type=int,
                   help="days represented by each --date")
    p.add_argument("--season", action="append", choices=["summer", "other"])
    p.add_argument("--delta-t", type=float, default=1.0, metavar="HOURS")
    p.add_argument("--overnight", choices=["error", "drop"], default="error")
    p.add_argument("--variant", choices=sorted(_VARIANTS))
    p.add_argument("--grid-cap", type=float, default=10_000.0, metavar="KW")
    p.add_argument("--discount-rate", type=float, default=0.0)
    p.add_argument("--out", default="instance.json")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("synth", help="seeded synthetic instance -> JSON")
    p.add_argument("--k", type=int, required=True, help="number of blocks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=1, help="representative days")
    p.add_argument("--vehicle-types", type=int, default=2)
    p.add_argument("--charger-types", type=int, default=3)
    p.add_argument("--variant", choices=sorted(_VARIANTS))
    p.add_argument("--grid-cap", type=float, default=None, metavar="KW")
    p.add_argument("--out", default="instance.json")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check an instance file")
    _add_instance_flag(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("emit-model", help="write solver files")
    p.add_argument("problem", choices=["p1", "p2", "p3", "p4"])
    _add_instance_flag(p)
    _add_solver_flags(p)
    p.add_argument("--slack-limit", type=int, default=0)
    p.add_argument("--out", default="model.mps")
    p.set_defaults(func=_cmd_emit_model)

    p = sub.add_parser("run", help="cluster -> disaggregate pipeline")
    _add_instance_flag(p)
    _add_solver_flags(p)
    p.add_argument("--slack-limit", type=int, default=1)
    p.add_argument("--with-p2", action="store_true",
                   help="also solve the per-vehicle benchmark")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify-bounds", help="certify the bound chain")
    _add_instance_flag(p)
    _add_solver_flags(p)
    p.add_argument("--slack-limit", type=int, default=1)
    p.add_argument("--no-p2", dest="with_p2", action="store_false")
    p.add_argument("--strict", action="store_true",
                   help="fail on inconclusive verdicts")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify_bounds)

    p = sub.add_parser("sweep", help="subsample sweep with CSV output")
    _add_instance_flag(p)
    _add_solver_flags(p)
    p.add_argument("--omegas", default="500,250,100,76,50,30,21,10",
                   help="comma-separated subsample windows")
    p.add_argument("--variants", action="append", choices=sorted(_VARIANTS))
    p.add_argument("--no-p2", dest="with_p2", action="store_false")
    p.add_argument("--slack-limit", type=int, default=1)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--plot-dir", default=None)
    p.add_argument("--out", default=None, help="CSV path (enables resume)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle", help="exhaustive optimum for tiny instances")
    _add_instance_flag(p)
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return 2 if code not in (0, None) else 0
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except FleetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
