"""Bundled command-line model runner: MPS file in, solution file out.

    python -m fleetplan.solve_file MODEL.mps OUT.sol [--time-limit S]
           [--mip-rel-gap G]

Writes OUT.sol in the CBC-style layout (status header, then one
"<index> <name> <value> <reduced cost>" line per variable) and a JSON
sidecar OUT.sol.meta.json carrying status, objective, dual bound, gap and
wall time. Exit codes: 0 a result was produced (including infeasible),
2 usage or file errors, 3 solver crash.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .errors import FormatError
from .modelio import parse_mps
from .solver import SolveStatus, SolverConfig, solve_matrices


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="fleetplan.solve_file",
        description="solve an MPS model and write a CBC-style solution file")
    ap.add_argument("model", help="input model (free-format MPS)")
    ap.add_argument("solution", help="output solution file")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--mip-rel-gap", type=float, default=1e-6)
    args = ap.parse_args(argv)

    model_path = Path(args.model)
    sol_path = Path(args.solution)
    try:
        text = model_path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {model_path}: {exc}", file=sys.stderr)
        return 2
    try:
        pm = parse_mps(text)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    cfg = SolverConfig(solver="scipy", time_limit_s=args.time_limit,
                       mip_rel_gap=args.mip_rel_gap)
    t0 = time.perf_counter()
    try:
        result = solve_matrices(pm.to_matrices(), cfg, pm.var_names)
    except Exception as exc:  # noqa: BLE001 - report, don't traceback
        print(f"error: solve failed: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0

    if result.status is SolveStatus.OPTIMAL:
        header = f"Optimal - objective value {result.objective:.12f}"
    elif result.status is SolveStatus.FEASIBLE:
        header = f"Stopped on time limit - objective value {result.objective:.12f}"
    elif result.status is SolveStatus.INFEASIBLE:
        header = "Infeasible - objective value 0.00000000"
    elif result.status is SolveStatus.UNBOUNDED:
        header = "Unbounded"
    elif result.status is SolveStatus.TIMEOUT:
        header = "Stopped on time limit - no feasible solution"
    else:
        header = f"Error - {result.message}"

    lines = [header]
    if result.values is not None:
        for idx, name in enumerate(pm.var_names):
            lines.append(f"{idx:7d} {name} {result.values[name]:.17g} 0")
    try:
        sol_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        meta = {
            "status": result.status.value,
            "objective": result.objective,
            "bound": result.bound,
            "gap": result.gap,
            "wall_time_s": wall,
            "solver": "self",
        }
        Path(str(sol_path) + ".meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write {sol_path}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
