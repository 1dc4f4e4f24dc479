"""Cluster -> disaggregate workflow and bound-chain verification.

The workflow solves the fleet-level sizing problem, freezes its investment
and assignment decisions, then tries to recover per-vehicle schedules two
ways: exactly (a pure feasibility question) and by re-optimizing operations
under the frozen decisions. The optimal values obey

    J_fleet <= J_vehicle <= J_recovered        (within each variant)
    J_surplus <= J_exact                       (for each problem)

and collapse to equality whenever the exact recovery is feasible.
``verify_bounds`` turns those statements into per-inequality verdicts.

Between the fleet solve and the recovery stages sits a polish step. The
fleet model keeps per-interval charger-use counts continuous (their
integrality is implied at optimal vertices but not returned reliably), while
the recovery models match binary per-vehicle connections against those
counts, so fractional counts would poison an otherwise feasible recovery.
Polish re-solves the fleet model with investments frozen and counts declared
integer, which costs little and restores exactness; if that ever fails it
falls back to the raw trajectory and lets the recovery stage report honestly.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .builders import BuildOptions, DEFAULT_OPTIONS, build_p1, build_p2, build_p3, build_p4
from .checking import check_solution, eval_objective, objective_tolerance, relative_gap
from .domain import Instance, Variant, validate_instance
from .errors import InconclusiveDueToTimeLimit, P1Infeasible, SolverCrashed
from .model import MilpModel, VarKind
from .solution import AggSolution
from .solver import SolveResult, SolveStatus, SolverConfig, solve

_CTX = "pipeline.run_cluster_disaggregate"

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class StageResult:
    """Outcome of one solve stage."""

    problem: str
    status: str
    objective: Optional[float]
    bound: Optional[float]
    proven: bool
    solve_time_s: float
    build_time_s: float
    note: str = ""


@dataclass
class InequalityVerdict:
    """One certified (or not) bound-chain statement."""

    name: str
    verdict: str
    lhs: Optional[float]
    rhs: Optional[float]
    tol: float
    note: str = ""

    @property
    def slack(self) -> Optional[float]:
        if self.lhs is None or self.rhs is None:
            return None
        return self.rhs - self.lhs

    def line(self) -> str:
        def fmt(x):
            return "n/a" if x is None else f"{x:.6f}"
        return (f"{self.verdict:12s} {self.name}: lhs={fmt(self.lhs)} "
                f"rhs={fmt(self.rhs)} tol={self.tol:.2e}"
                + (f"  ({self.note})" if self.note else ""))


@dataclass
class PipelineReport:
    """Everything one cluster->disaggregate run produced."""

    variant: str
    K: int
    I: int
    J: int
    T: int
    instance_digest: str
    solver: str
    stages: Dict[str, StageResult] = field(default_factory=dict)
    j1: Optional[float] = None
    j2: Optional[float] = None
    j4: Optional[float] = None
    p3_feasible: Optional[bool] = None
    slack_used: int = 0
    gap41: Optional[float] = None
    gap21: Optional[float] = None
    verdicts: List[InequalityVerdict] = field(default_factory=list)
    omega: Optional[int] = None

    @property
    def ok(self) -> bool:
        return all(v.verdict == PASS for v in self.verdicts)

    def stage_time(self, problem: str) -> Optional[float]:
        st = self.stages.get(problem)
        return None if st is None else st.solve_time_s

    def to_text(self) -> str:
        lines = [f"instance {self.instance_digest[:12]}  variant={self.variant}  "
                 f"K={self.K} I={self.I} J={self.J} T={self.T}  solver={self.solver}"]
        for key in ("p1", "polish", "p3", "p4", "p2"):
            st = self.stages.get(key)
            if st is None:
                continue
            obj = "n/a" if st.objective is None else f"{st.objective:.2f}"
            lines.append(
                f"  {st.problem:7s} {st.status:12s} J={obj:>14s} "
                f"build={st.build_time_s:7.3f}s solve={st.solve_time_s:8.3f}s "
                f"{'proven' if st.proven else 'incumbent'}"
                + (f"  {st.note}" if st.note else ""))
        if self.p3_feasible is not None:
            lines.append(f"  exact recovery: "
                         f"{'Feasible' if self.p3_feasible else 'Infeasible'}")
        if self.slack_used:
            lines.append(f"  charger slack used: {self.slack_used}")
        if self.gap41 is not None:
            lines.append(f"  gap (recovered vs fleet): {100 * self.gap41:.4f}%")
        if self.gap21 is not None:
            lines.append(f"  gap (vehicle vs fleet):   {100 * self.gap21:.4f}%")
        for v in self.verdicts:
            lines.append("  " + v.line())
        return "\n".join(lines)


@dataclass
class BoundsCheck:
    """Both-variant verification: per-variant reports plus all verdicts."""

    reports: Dict[str, PipelineReport]
    verdicts: List[InequalityVerdict]

    @property
    def ok(self) -> bool:
        return all(v.verdict == PASS for v in self.verdicts)

    @property
    def failed(self) -> List[InequalityVerdict]:
        return [v for v in self.verdicts if v.verdict == FAIL]

    @property
    def inconclusive(self) -> List[InequalityVerdict]:
        return [v for v in self.verdicts if v.verdict == INCONCLUSIVE]

    def summary(self) -> str:
        lines = []
        for variant, rep in self.reports.items():
            lines.append(rep.to_text())
        lines.append("bound chain:")
        for v in self.verdicts:
            lines.append("  " + v.line())
        counts = (f"{sum(1 for v in self.verdicts if v.verdict == PASS)} pass, "
                  f"{len(self.failed)} fail, {len(self.inconclusive)} inconclusive")
        lines.append(counts)
        return "\n".join(lines)


# --------------------------------------------------------------------------
# stage plumbing
# --------------------------------------------------------------------------

def _verify_incumbent(model: MilpModel, res: SolveResult, inst: Instance,
                      recompute_cost: bool, ctx: str) -> None:
    """Reject any incumbent that fails row/bound/integrality verification."""
    rep = check_solution(model, res.values, tol=1e-6)
    if not rep.ok:
        raise SolverCrashed(
            f"solver incumbent for {model.name} violates the model: "
            f"{rep.first_violation}", context=ctx)
    if recompute_cost and res.objective is not None:
        recomputed = eval_objective(inst, res.values)
        if relative_gap(recomputed, res.objective) > 1e-6:
            raise SolverCrashed(
                f"solver objective {res.objective!r} disagrees with recomputed "
                f"cost {recomputed!r} for {model.name}", context=ctx)


def _stage(problem: str, status: str, res: Optional[SolveResult],
           build_s: float, note: str = "") -> StageResult:
    return StageResult(
        problem=problem, status=status,
        objective=None if res is None else res.objective,
        bound=None if res is None else res.bound,
        proven=res is not None and res.status is SolveStatus.OPTIMAL,
        solve_time_s=0.0 if res is None else res.wall_time_s,
        build_time_s=build_s, note=note)


def _snap_counts(values: Dict[str, float], tol: float) -> Optional[Dict[str, float]]:
    """Round charger-use counts to integers; None if any drifts further than tol."""
    out = dict(values)
    for name, val in values.items():
        if name.startswith("m["):
            snapped = round(val)
            if abs(val - snapped) > tol:
                return None
            out[name] = float(snapped)
    return out


def _polish_agg(inst: Instance, p1_res: SolveResult, cfg: SolverConfig,
                options: BuildOptions) -> Tuple[AggSolution, StageResult]:
    """Integer-trajectory fleet solution matching the optimal cost.

    Fast path: counts already integral. Otherwise re-solve with investments
    frozen and counts integer; accept only at unchanged cost. Last resort is
    the raw (possibly fractional) trajectory.
    """
    j1 = p1_res.objective
    snapped = _snap_counts(p1_res.values, 1e-9)
    if snapped is not None:
        agg = AggSolution.from_values(inst, snapped, j1)
        return agg, _stage("polish", "Skipped", None, 0.0, "counts already integral")

    rough = AggSolution.from_values(inst, p1_res.values, j1)
    t0 = time.perf_counter()
    model = build_p1(inst, options)
    for var in model.vars:
        name = var.name
        if name.startswith(("N_v[", "N_c[", "b[")):
            fam, key = name.split("[", 1)
            if fam == "N_v":
                val = float(rough.N_v(int(key[2:-1])))
            elif fam == "N_c":
                val = float(rough.N_c(int(key[2:-1])))
            else:
                k_part, i_part = key[:-1].split(",")
                val = float(rough.b(int(k_part[2:]), int(i_part[2:])))
            var.lb = var.ub = val
        elif name.startswith("m["):
            var.kind = VarKind.INTEGER
    build_s = time.perf_counter() - t0
    res = solve(model, cfg)
    if (res.status is SolveStatus.OPTIMAL and res.objective is not None
            and res.objective <= j1 + objective_tolerance(j1)):
        snapped = _snap_counts(res.values, 1e-6)
        if snapped is not None:
            agg = AggSolution.from_values(inst, snapped, j1)
            return agg, _stage("polish", "Integerized", res, build_s)

    # keep the fractional trajectory; the recovery stage will say what breaks
    agg = AggSolution.from_values(inst, p1_res.values, j1)
    note = f"count integerization failed ({res.status.value}); using raw trajectory"
    return agg, _stage("polish", "Fallback", res, build_s, note)


def _gap(j_hi: Optional[float], j_lo: Optional[float]) -> Optional[float]:
    if j_hi is None or j_lo is None:
        return None
    if j_lo == 0.0:
        return 0.0 if j_hi == 0.0 else math.inf
    return j_hi / j_lo - 1.0


# --------------------------------------------------------------------------
# the workflow
# --------------------------------------------------------------------------

def run_cluster_disaggregate(inst: Instance, cfg: Optional[SolverConfig] = None,
                             slack_limit: int = 1, with_p2: bool = False,
                             with_p3: bool = True,
                             options: BuildOptions = DEFAULT_OPTIONS,
                             ) -> PipelineReport:
    """Fleet sizing, then per-vehicle recovery; optionally the benchmark too.

    Stage order: fleet solve -> polish -> exact recovery (per-type
    feasibility) -> re-optimizing recovery with charger slack escalating from
    0 to slack_limit only on proven infeasibility. Every incumbent accepted
    from a solver is re-verified against its own model before use.

    with_p3=False skips the exact-recovery feasibility stage (its submodels
    can dominate runtime at a few hundred blocks, and a timeout there aborts
    the run because feasibility would be undecided). The report then carries
    p3_feasible=None and no equality verdicts; the recovered objective and
    its gap are unaffected.
    """
    validate_instance(inst).raise_if_failed()
    cfg = cfg or SolverConfig()

    report = PipelineReport(
        variant=inst.variant.value, K=inst.K, I=inst.I, J=inst.J,
        T=inst.grid.T, instance_digest="", solver=cfg.solver)

    t0 = time.perf_counter()
    p1 = build_p1(inst, options)
    build_s = time.perf_counter() - t0
    report.instance_digest = p1.metadata.get("instance_digest", "")
    res1 = solve(p1, cfg)
    if res1.proven_infeasible:
        raise P1Infeasible(
            "fleet-level sizing is infeasible; the instance cannot be served",
            context=_CTX)
    if not res1.ok or res1.values is None:
        raise InconclusiveDueToTimeLimit(
            f"fleet-level solve returned {res1.status.value} with no incumbent",
            context=_CTX)
    _verify_incumbent(p1, res1, inst, True, _CTX)
    report.stages["p1"] = _stage("p1", res1.status.value, res1, build_s)
    report.j1 = res1.objective

    agg, polish_stage = _polish_agg(inst, res1, cfg, options)
    report.stages["polish"] = polish_stage

    t0 = time.perf_counter()
    submodels = build_p3(inst, agg, options)
    build_s = time.perf_counter() - t0
    feasible = True
    solve_s = 0.0
    bad_types: List[int] = []
    for sub in submodels:
        res = solve(sub.model, cfg)
        solve_s += res.wall_time_s
        if res.ok and res.values is not None:
            _verify_incumbent(sub.model, res, inst, False, "pipeline.p3")
        elif res.proven_infeasible:
            feasible = False
            bad_types.append(sub.type_index)
        else:
            raise InconclusiveDueToTimeLimit(
                f"exact-recovery submodel for type {sub.type_index} returned "
                f"{res.status.value}", context="pipeline.p3")
    report.p3_feasible = feasible
    note = "" if feasible else f"no exact recovery for type(s) {bad_types}"
    report.stages["p3"] = StageResult(
        problem="p3", status="Feasible" if feasible else "Infeasible",
        objective=None, bound=None, proven=True,
        solve_time_s=solve_s, build_time_s=build_s, note=note)

    res4: Optional[SolveResult] = None
    build4_s = 0.0
    status4 = "Infeasible"
    slack_used = 0
    for slack in range(slack_limit + 1):
        t0 = time.perf_counter()
        p4 = build_p4(inst, agg, slack_limit=slack, options=options)
        build4_s += time.perf_counter() - t0
        attempt = solve(p4, cfg)
        if attempt.ok and attempt.values is not None:
            _verify_incumbent(p4, attempt, inst, True, "pipeline.p4")
            res4 = attempt
            status4 = attempt.status.value
            slack_used = round(sum(v for name, v in attempt.values.items()
                                   if name.startswith("slack_Nc[")))
            break
        res4 = attempt
        status4 = attempt.status.value
        if not attempt.proven_infeasible:
            break  # timeout without incumbent: escalating would prove nothing
    if res4 is not None and res4.ok:
        report.j4 = res4.objective
        report.slack_used = slack_used
    report.stages["p4"] = _stage("p4", status4, res4, build4_s)

    if with_p2:
        t0 = time.perf_counter()
        p2 = build_p2(inst, options)
        build2_s = time.perf_counter() - t0
        res2 = solve(p2, cfg)
        if res2.ok and res2.values is not None:
            _verify_incumbent(p2, res2, inst, True, "pipeline.p2")
            report.j2 = res2.objective
        report.stages["p2"] = _stage("p2", res2.status.value, res2, build2_s)

    report.gap41 = _gap(report.j4, report.j1)
    report.gap21 = _gap(report.j2, report.j1)
    report.verdicts = _chain_verdicts(report)
    return report


# --------------------------------------------------------------------------
# bound-chain verdicts
# --------------------------------------------------------------------------

def _upper(st: Optional[StageResult]) -> Optional[float]:
    """A certified upper bound on the stage's true optimum, if any."""
    if st is None or st.objective is None:
        return None
    return st.objective


def _lower(st: Optional[StageResult]) -> Optional[float]:
    """A certified lower bound on the stage's true optimum, if any."""
    if st is None:
        return None
    if st.status == SolveStatus.INFEASIBLE.value:
        return math.inf
    if st.proven:
        return st.objective
    return st.bound


def _compare(name: str, lo_stage: Optional[StageResult],
             hi_stage: Optional[StageResult], note: str = "") -> InequalityVerdict:
    """Verdict for 'optimum(lo_stage) <= optimum(hi_stage)'."""
    u = _upper(lo_stage)   # upper bound on the smaller side
    l = _lower(hi_stage)   # lower bound on the larger side
    tol = objective_tolerance(max(abs(x) for x in (u, l, 1.0) if x is not None))
    if u is not None and l is not None and u <= l + tol:
        return InequalityVerdict(name, PASS, u, l, tol, note)
    both_proven = (lo_stage is not None and lo_stage.proven
                   and hi_stage is not None and hi_stage.proven)
    if both_proven and u is not None and l is not None:
        return InequalityVerdict(name, FAIL, u, l, tol, note)
    return InequalityVerdict(name, INCONCLUSIVE, u, l, tol,
                             note or "a side is unproven or missing")


def _equality(name: str, a: Optional[StageResult], b: Optional[StageResult],
              note: str = "") -> InequalityVerdict:
    if (a is None or b is None or not a.proven or not b.proven
            or a.objective is None or b.objective is None):
        return InequalityVerdict(name, INCONCLUSIVE, None, None, 0.0,
                                 note or "equality needs both optima proven")
    tol = objective_tolerance(max(abs(a.objective), abs(b.objective)))
    ok = abs(a.objective - b.objective) <= tol
    return InequalityVerdict(name, PASS if ok else FAIL,
                             a.objective, b.objective, tol, note)


def _chain_verdicts(rep: PipelineReport) -> List[InequalityVerdict]:
    v = rep.variant
    p1, p2, p4 = rep.stages.get("p1"), rep.stages.get("p2"), rep.stages.get("p4")
    out = [_compare(f"J1 <= J4 [{v}]", p1, p4)]
    if p2 is not None:
        out.append(_compare(f"J1 <= J2 [{v}]", p1, p2))
        out.append(_compare(f"J2 <= J4 [{v}]", p2, p4))
    if rep.p3_feasible:
        out.append(_equality(f"exact recovery => J1 == J4 [{v}]", p1, p4))
        if p2 is not None:
            out.append(_equality(f"exact recovery => J1 == J2 [{v}]", p1, p2))
    return out


def verify_bounds(inst: Instance, cfg: Optional[SolverConfig] = None,
                  with_p2: bool = True, slack_limit: int = 1,
                  strict: bool = False,
                  options: BuildOptions = DEFAULT_OPTIONS) -> BoundsCheck:
    """Run both variants and certify the full bound chain.

    Cross-variant statements compare a certified upper bound of the
    surplus-allowed side against a certified lower bound of the exact-energy
    side, so a timed-out stage yields INCONCLUSIVE rather than a false FAIL.
    With strict=True any INCONCLUSIVE verdict raises.
    """
    cfg = cfg or SolverConfig()
    reports: Dict[str, PipelineReport] = {}
    for variant in (Variant.SURPLUS, Variant.EXACT):
        inst_v = dataclasses.replace(inst, variant=variant)
        reports[variant.value] = run_cluster_disaggregate(
            inst_v, cfg, slack_limit=slack_limit, with_p2=with_p2,
            options=options)

    lo = reports[Variant.SURPLUS.value]
    hi = reports[Variant.EXACT.value]
    verdicts: List[InequalityVerdict] = []
    verdicts.extend(lo.verdicts)
    verdicts.extend(hi.verdicts)
    pairs = [("J1", "p1"), ("J4", "p4")] + ([("J2", "p2")] if with_p2 else [])
    for label, key in pairs:
        verdicts.append(_compare(
            f"{label} surplus <= {label} exact",
            lo.stages.get(key), hi.stages.get(key)))

    check = BoundsCheck(reports=reports, verdicts=verdicts)
    if strict and check.inconclusive:
        names = ", ".join(v.name for v in check.inconclusive)
        raise InconclusiveDueToTimeLimit(
            f"cannot certify: {names}", context="pipeline.verify_bounds")
    return check
