"""Solve layer: one interface, several interchangeable backends.

In-process backend
    "scipy"    HiGHS via scipy.optimize.milp. Deterministic and
               single-threaded; `threads`/`seed` are ignored.

File-based backends (model file in, solution file out, isolated work dir)
    "self"     bundled runner `python -m fleetplan.solve_file`; always
               available, solution format below.
    "cbc"      external CBC binary (FLEETPLAN_CBC or PATH).
    "highs"    external HiGHS binary (FLEETPLAN_HIGHS or PATH).
    "command"  arbitrary template with {mps} {sol} {time_limit}
               placeholders (FLEETPLAN_SOLVER_CMD or config.command);
               must emit a CBC-style solution file.

"auto" picks config.command if set, else FLEETPLAN_SOLVER_CMD, else an
external cbc/highs binary if discoverable, else the in-process backend.

Solution-file conventions (written by "self", accepted from all):
    line 1: "Optimal - objective value <J>" | "Infeasible ..." |
            "Stopped on time limit - objective value <J>" | "Unbounded ..."
    rest:   "<index> <name> <value> [reduced cost]" per nonzero variable.
A JSON sidecar "<sol>.meta.json" (status/objective/bound/wall time), when
present, overrides the parsed header.
"""

from __future__ import annotations

import json
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import SolverCrashed, SolverNotFound
from .model import MatrixForm, MilpModel
from .modelio import write_mps

ENV_CBC = "FLEETPLAN_CBC"
ENV_HIGHS = "FLEETPLAN_HIGHS"
ENV_COMMAND = "FLEETPLAN_SOLVER_CMD"


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"        # incumbent found, limit hit before proof
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIMEOUT = "Timeout"          # limit hit, no incumbent
    ERROR = "Error"


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "auto"
    time_limit_s: Optional[float] = None
    mip_rel_gap: float = 1e-6
    threads: int = 1
    seed: int = 0
    command: Optional[str] = None
    work_dir: Optional[str] = None
    keep_files: bool = False

    def with_limit(self, time_limit_s: Optional[float]) -> "SolverConfig":
        return SolverConfig(solver=self.solver, time_limit_s=time_limit_s,
                            mip_rel_gap=self.mip_rel_gap, threads=self.threads,
                            seed=self.seed, command=self.command,
                            work_dir=self.work_dir, keep_files=self.keep_files)

    def with_gap(self, mip_rel_gap: float) -> "SolverConfig":
        return SolverConfig(solver=self.solver, time_limit_s=self.time_limit_s,
                            mip_rel_gap=mip_rel_gap, threads=self.threads,
                            seed=self.seed, command=self.command,
                            work_dir=self.work_dir, keep_files=self.keep_files)


@dataclass
class SolveResult:
    status: SolveStatus
    objective: Optional[float]
    bound: Optional[float]
    values: Optional[Dict[str, float]]
    wall_time_s: float
    solver: str
    message: str = ""
    gap: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE)

    @property
    def proven_infeasible(self) -> bool:
        return self.status is SolveStatus.INFEASIBLE


# --------------------------------------------------------------------------
# in-process backend
# --------------------------------------------------------------------------

def _solve_matrices_scipy(mf: MatrixForm, config: SolverConfig
                          ) -> Tuple[SolveStatus, Optional[float],
                                     Optional[float], Optional[np.ndarray],
                                     str, Optional[float]]:
    n = mf.c.shape[0]
    if n == 0:
        feas = bool(np.all(mf.row_lb <= 1e-9) and np.all(mf.row_ub >= -1e-9))
        status = SolveStatus.OPTIMAL if feas else SolveStatus.INFEASIBLE
        return status, (0.0 if feas else None), (0.0 if feas else None), \
            np.zeros(0), "empty model", (0.0 if feas else None)

    options = {"presolve": True, "mip_rel_gap": config.mip_rel_gap}
    if config.time_limit_s is not None:
        options["time_limit"] = float(config.time_limit_s)
    constraints = []
    if mf.A.shape[0]:
        constraints = optimize.LinearConstraint(mf.A, mf.row_lb, mf.row_ub)
    res = optimize.milp(c=mf.c, constraints=constraints,
                        integrality=mf.integrality,
                        bounds=optimize.Bounds(mf.lb, mf.ub),
                        options=options)
    x = getattr(res, "x", None)
    fun = getattr(res, "fun", None)
    bound = getattr(res, "mip_dual_bound", None)
    gap = getattr(res, "mip_gap", None)
    if bound is None and res.status == 0 and fun is not None:
        bound = fun
    if res.status == 0:
        return SolveStatus.OPTIMAL, fun, bound, x, res.message, gap
    if res.status == 1:
        if x is not None:
            return SolveStatus.FEASIBLE, fun, bound, x, res.message, gap
        return SolveStatus.TIMEOUT, None, bound, None, res.message, None
    if res.status == 2:
        return SolveStatus.INFEASIBLE, None, None, None, res.message, None
    if res.status == 3:
        return SolveStatus.UNBOUNDED, None, None, None, res.message, None
    return SolveStatus.ERROR, None, None, None, res.message, None


def solve_matrices(mf: MatrixForm, config: SolverConfig,
                   var_names: Optional[List[str]] = None) -> SolveResult:
    """In-process solve of a raw matrix form."""
    t0 = time.perf_counter()
    status, fun, bound, x, msg, gap = _solve_matrices_scipy(mf, config)
    wall = time.perf_counter() - t0
    values = None
    if x is not None and var_names is not None:
        values = {name: float(x[j]) for j, name in enumerate(var_names)}
    elif x is not None:
        values = {str(j): float(x[j]) for j in range(len(x))}
    return SolveResult(status=status, objective=fun, bound=bound,
                       values=values, wall_time_s=wall, solver="scipy",
                       message=msg, gap=gap)


# --------------------------------------------------------------------------
# file-based backends
# --------------------------------------------------------------------------

def _discover(binary: str, env_var: str,
              config_command: Optional[str]) -> Optional[str]:
    if config_command:
        return config_command
    env = os.environ.get(env_var)
    if env:
        return env
    return shutil.which(binary)


def parse_solution_file(path: Path, model: MilpModel) -> SolveResult:
    """CBC-style solution file (+ optional JSON sidecar) -> SolveResult."""
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SolverCrashed(f"solver wrote no solution file at {path}: {exc}",
                            context="solver.parse_solution_file") from exc
    if not lines:
        raise SolverCrashed(f"solution file {path} is empty",
                            context="solver.parse_solution_file")
    header = lines[0].strip()
    low = header.lower()
    status = SolveStatus.ERROR
    objective: Optional[float] = None
    if low.startswith("optimal"):
        status = SolveStatus.OPTIMAL
    elif low.startswith("infeasible") or "infeasible" in low:
        status = SolveStatus.INFEASIBLE
    elif low.startswith("unbounded"):
        status = SolveStatus.UNBOUNDED
    elif low.startswith("stopped"):
        status = SolveStatus.FEASIBLE
    if "objective value" in low:
        try:
            objective = float(header.rsplit(None, 1)[1])
        except (ValueError, IndexError):
            objective = None

    values: Dict[str, float] = {v.name: 0.0 for v in model.vars}
    known = set(values)
    for line in lines[1:]:
        tok = line.split()
        if len(tok) < 3:
            continue
        # "<idx> <name> <value> [reduced cost]"; tolerate a missing index
        name, val = (tok[1], tok[2]) if tok[0].lstrip("-").isdigit() else \
            (tok[0], tok[1])
        if name in known:
            try:
                values[name] = float(val)
            except ValueError:
                continue
    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED,
                  SolveStatus.TIMEOUT, SolveStatus.ERROR):
        vals: Optional[Dict[str, float]] = None
    else:
        vals = values

    result = SolveResult(status=status, objective=objective, bound=None,
                         values=vals, wall_time_s=0.0, solver="file",
                         message=header)
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            meta = {}
        if "status" in meta:
            try:
                result.status = SolveStatus(meta["status"])
            except ValueError:
                pass
        for attr in ("objective", "bound", "gap", "wall_time_s"):
            if meta.get(attr) is not None:
                setattr(result, attr, float(meta[attr]))
        if result.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED,
                             SolveStatus.TIMEOUT, SolveStatus.ERROR):
            result.values = None
    return result


def _run_command(argv: List[str], model: MilpModel, config: SolverConfig,
                 mps_path: Path, sol_path: Path, label: str) -> SolveResult:
    t0 = time.perf_counter()
    budget = None
    if config.time_limit_s is not None:
        budget = config.time_limit_s * 1.5 + 60.0
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=budget, cwd=str(mps_path.parent))
    except subprocess.TimeoutExpired:
        return SolveResult(status=SolveStatus.TIMEOUT, objective=None,
                           bound=None, values=None,
                           wall_time_s=time.perf_counter() - t0, solver=label,
                           message="child process exceeded the wall budget")
    except OSError as exc:
        raise SolverCrashed(f"cannot launch {argv[0]!r}: {exc}",
                            context="solver.solve") from exc
    wall = time.perf_counter() - t0
    if not sol_path.exists():
        raise SolverCrashed(
            f"{label} exited with code {proc.returncode} and no solution "
            f"file; stderr: {proc.stderr[-500:]}", context="solver.solve")
    result = parse_solution_file(sol_path, model)
    result.solver = label
    if not result.wall_time_s:
        result.wall_time_s = wall
    return result


def _solve_subprocess(model: MilpModel, config: SolverConfig,
                      flavor: str) -> SolveResult:
    work = Path(tempfile.mkdtemp(prefix=f"fleetplan_{flavor}_",
                                 dir=config.work_dir))
    mps_path = work / "model.mps"
    sol_path = work / "model.sol"
    mps_path.write_text(write_mps(model), encoding="utf-8")
    tl = config.time_limit_s
    try:
        if flavor == "self":
            argv = [sys.executable, "-m", "fleetplan.solve_file",
                    str(mps_path), str(sol_path),
                    "--mip-rel-gap", repr(config.mip_rel_gap)]
            if tl is not None:
                argv += ["--time-limit", repr(float(tl))]
            return _run_command(argv, model, config, mps_path, sol_path, "self")
        if flavor == "cbc":
            binary = _discover("cbc", ENV_CBC, config.command)
            if not binary:
                raise SolverNotFound(
                    f"no cbc binary (set {ENV_CBC} or put cbc on PATH)",
                    context="solver.solve")
            argv = [binary, str(mps_path)]
            if tl is not None:
                argv += ["-seconds", repr(float(tl))]
            argv += ["-ratio", repr(config.mip_rel_gap),
                     "-threads", str(config.threads),
                     "-randomSeed", str(config.seed),
                     "-printingOptions", "all",
                     "solve", "-solution", str(sol_path)]
            return _run_command(argv, model, config, mps_path, sol_path, "cbc")
        if flavor == "highs":
            binary = _discover("highs", ENV_HIGHS, config.command)
            if not binary:
                raise SolverNotFound(
                    f"no highs binary (set {ENV_HIGHS} or put highs on PATH)",
                    context="solver.solve")
            argv = [binary, str(mps_path), "--solution_file", str(sol_path),
                    "--random_seed", str(config.seed)]
            if tl is not None:
                argv += ["--time_limit", repr(float(tl))]
            return _run_command(argv, model, config, mps_path, sol_path, "highs")
        if flavor == "command":
            template = config.command or os.environ.get(ENV_COMMAND)
            if not template:
                raise SolverNotFound(
                    f"no solver command (set {ENV_COMMAND} or config.command)",
                    context="solver.solve")
            argv = [a.format(mps=str(mps_path), sol=str(sol_path),
                             time_limit=tl if tl is not None else 1e9)
                    for a in shlex.split(template)]
            return _run_command(argv, model, config, mps_path, sol_path,
                                "command")
        raise SolverNotFound(f"unknown solver {flavor!r}", context="solver.solve")
    finally:
        if not config.keep_files:
            shutil.rmtree(work, ignore_errors=True)


# --------------------------------------------------------------------------
# public interface
# --------------------------------------------------------------------------

def resolve_backend(config: SolverConfig) -> str:
    """Name of the backend "auto" would use right now."""
    if config.solver != "auto":
        return config.solver
    if config.command or os.environ.get(ENV_COMMAND):
        return "command"
    if _discover("cbc", ENV_CBC, None):
        return "cbc"
    if _discover("highs", ENV_HIGHS, None):
        return "highs"
    return "scipy"


def solve(model: MilpModel, config: Optional[SolverConfig] = None) -> SolveResult:
    """Solve a model with the configured backend.

    Returns a SolveResult; raises SolverNotFound / SolverCrashed for
    environment problems (unusable backend), never for model outcomes
    (infeasible/unbounded are statuses, not exceptions).
    """
    config = config or SolverConfig()
    flavor = resolve_backend(config)
    if flavor == "scipy":
        result = solve_matrices(model.to_matrices(), config,
                                [v.name for v in model.vars])
    else:
        result = _solve_subprocess(model, config, flavor)
    if result.status is SolveStatus.ERROR:
        raise SolverCrashed(
            f"backend {result.solver} failed: {result.message}",
            context="solver.solve")
    return result


def solve_feasibility(model: MilpModel,
                      config: Optional[SolverConfig] = None) -> SolveResult:
    """Solve ignoring the objective; OPTIMAL means feasible."""
    return solve(model, config)
