"""Cluster->disaggregate workflow and bound-chain certification."""

import dataclasses
import math

import pytest

from fleetplan.errors import InconclusiveDueToTimeLimit, P1Infeasible
from fleetplan.pipeline import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    BoundsCheck,
    PipelineReport,
    StageResult,
    _chain_verdicts,
    _compare,
    _equality,
    _gap,
    _lower,
    _upper,
    run_cluster_disaggregate,
    verify_bounds,
)
from fleetplan.solver import SolverConfig

from .conftest import build_overload, build_witness, make_tiny


def _proven(problem, obj, status="Optimal"):
    return StageResult(problem=problem, status=status, objective=obj,
                       bound=obj, proven=True, solve_time_s=0.0,
                       build_time_s=0.0)


def _timed_out(problem, incumbent, bound):
    return StageResult(problem=problem, status="TimeLimit",
                       objective=incumbent, bound=bound, proven=False,
                       solve_time_s=0.0, build_time_s=0.0)


def _infeasible(problem):
    return StageResult(problem=problem, status="Infeasible", objective=None,
                       bound=None, proven=True, solve_time_s=0.0,
                       build_time_s=0.0)


@pytest.fixture(scope="module")
def report():
    cfg = SolverConfig(solver="scipy", mip_rel_gap=1e-9, time_limit_s=600.0)
    return run_cluster_disaggregate(build_witness(), cfg, with_p2=True)


class TestWitnessRun:
    """Constructed instance where aggregation is optimistic: the fleet-level
    optimum cannot be recovered exactly (no per-type split exists), and the
    re-optimized recovery lands strictly above it.
    """

    def test_stage_roster(self, report):
        assert set(report.stages) == {"p1", "polish", "p3", "p4", "p2"}
        assert report.stages["polish"].status == "Skipped"

    def test_fleet_optimum(self, report):
        assert report.j1 == pytest.approx(138191.34, abs=0.01)

    def test_exact_recovery_infeasible(self, report):
        assert report.p3_feasible is False
        assert report.stages["p3"].status == "Infeasible"
        assert "type(s)" in report.stages["p3"].note

    def test_reoptimized_recovery_cost(self, report):
        assert report.j4 == pytest.approx(140308.34, abs=0.01)
        assert report.slack_used <= 1
        # the premium is exactly the cheap-window energy the pooled model
        # pretended to bank: 20 kWh repriced from 0.01 to 0.30, daily
        assert report.j4 - report.j1 == pytest.approx(
            20.0 * 0.29 * 365, abs=0.5)

    def test_benchmark_matches_recovery(self, report):
        assert report.j2 == pytest.approx(report.j4, abs=0.01)

    def test_gaps(self, report):
        assert report.gap41 == pytest.approx(0.015319, abs=1e-4)
        assert report.gap21 == pytest.approx(report.gap41, abs=1e-9)

    def test_no_equality_verdicts_without_exact_recovery(self, report):
        names = [v.name for v in report.verdicts]
        assert not any("==" in n for n in names)
        assert report.ok, [v.line() for v in report.verdicts]

    def test_to_text_reads_well(self, report):
        text = report.to_text()
        assert "exact recovery: Infeasible" in text
        assert "p1" in text and "PASS" in text


class TestEqualityChain:
    def test_single_block_recovers_exactly(self, cfg):
        rep = run_cluster_disaggregate(make_tiny(seed=0, K=1), cfg,
                                       with_p2=True)
        assert rep.p3_feasible is True
        assert rep.j1 == pytest.approx(rep.j2, rel=1e-9)
        assert rep.j1 == pytest.approx(rep.j4, rel=1e-9)
        names = [v.name for v in rep.verdicts]
        assert sum("==" in n for n in names) == 2
        assert rep.ok


class TestExceptionalPaths:
    def test_unserviceable_instance_raises(self, cfg):
        with pytest.raises(P1Infeasible):
            run_cluster_disaggregate(build_overload(), cfg)

    def test_starved_time_limit_is_inconclusive_not_wrong(self):
        starved = SolverConfig(solver="scipy", time_limit_s=1e-4)
        with pytest.raises(InconclusiveDueToTimeLimit):
            run_cluster_disaggregate(make_tiny(seed=3, K=4), starved)


class TestPolish:
    def test_fractional_counts_are_integerized(self, cfg):
        # relaxing the grid cap keeps this instance feasible only through
        # pooled storage, and the fleet optimum uses fractional
        # charger-connection counts that the polish step must repair
        ov = build_overload()
        ov15 = dataclasses.replace(
            ov, tariff=dataclasses.replace(ov.tariff, grid_cap_kw=15.0))
        rep = run_cluster_disaggregate(ov15, cfg, with_p2=False)
        assert rep.stages["polish"].status == "Integerized"
        assert rep.p3_feasible is False


class TestVerdictLogic:
    def test_bounds_of_stages(self):
        assert _upper(None) is None
        assert _upper(_proven("p1", 5.0)) == 5.0
        assert _lower(_infeasible("p4")) == math.inf
        assert _lower(_proven("p1", 5.0)) == 5.0
        assert _lower(_timed_out("p2", 7.0, 3.0)) == 3.0

    def test_pass_needs_certified_sides(self):
        v = _compare("a <= b", _proven("p1", 10.0), _proven("p4", 12.0))
        assert v.verdict == PASS

    def test_fail_requires_both_proven(self):
        v = _compare("a <= b", _proven("p1", 12.0), _proven("p4", 10.0))
        assert v.verdict == FAIL

    def test_timeout_never_fails(self):
        # incumbent above the other side, but unproven: could still improve
        v = _compare("a <= b", _timed_out("p2", 12.0, 1.0),
                     _proven("p4", 10.0))
        assert v.verdict == INCONCLUSIVE
        assert "unproven" in v.note

    def test_infeasible_upper_side_passes(self):
        v = _compare("a <= b", _proven("p1", 10.0), _infeasible("p4"))
        assert v.verdict == PASS
        assert v.rhs == math.inf

    def test_within_tolerance_passes(self):
        v = _compare("a <= b", _proven("p1", 10.0 + 5e-4),
                     _proven("p4", 10.0))
        assert v.verdict == PASS

    def test_equality_needs_proofs(self):
        v = _equality("a == b", _proven("p1", 10.0), _timed_out("p4", 10.0, 9.0))
        assert v.verdict == INCONCLUSIVE
        ok = _equality("a == b", _proven("p1", 10.0), _proven("p4", 10.0))
        assert ok.verdict == PASS
        bad = _equality("a == b", _proven("p1", 10.0), _proven("p4", 11.0))
        assert bad.verdict == FAIL

    def test_chain_shape(self):
        rep = PipelineReport(variant="SurplusAllowed", K=1, I=1, J=1, T=24,
                             instance_digest="x", solver="scipy")
        rep.stages = {"p1": _proven("p1", 1.0), "p4": _proven("p4", 1.0),
                      "p2": _proven("p2", 1.0)}
        rep.p3_feasible = True
        names = [v.name for v in _chain_verdicts(rep)]
        assert names == [
            "J1 <= J4 [SurplusAllowed]",
            "J1 <= J2 [SurplusAllowed]",
            "J2 <= J4 [SurplusAllowed]",
            "exact recovery => J1 == J4 [SurplusAllowed]",
            "exact recovery => J1 == J2 [SurplusAllowed]",
        ]

    def test_gap_helper(self):
        assert _gap(None, 1.0) is None
        assert _gap(1.0, None) is None
        assert _gap(0.0, 0.0) == 0.0
        assert _gap(1.0, 0.0) == math.inf
        assert _gap(102.0, 100.0) == pytest.approx(0.02)


class TestVerifyBounds:
    def test_tiny_instance_certifies(self, cfg):
        check = verify_bounds(make_tiny(seed=1, K=2), cfg, with_p2=True)
        assert check.ok, check.summary()
        assert not check.failed and not check.inconclusive
        # per-variant chains plus three cross-variant comparisons
        assert sum(1 for v in check.verdicts if "surplus <=" in v.name) == 3
        assert "bound chain:" in check.summary()

    def test_without_benchmark_skips_its_verdicts(self, cfg):
        check = verify_bounds(make_tiny(seed=1, K=2), cfg, with_p2=False)
        assert check.ok
        assert not any("J2" in v.name for v in check.verdicts)

    def test_strict_raises_on_inconclusive(self, monkeypatch, cfg):
        import fleetplan.pipeline as pipeline

        rep = PipelineReport(variant="SurplusAllowed", K=1, I=1, J=1, T=24,
                             instance_digest="x", solver="scipy")
        rep.stages = {"p1": _proven("p1", 1.0),
                      "p4": _timed_out("p4", 2.0, 0.5)}
        rep.verdicts = _chain_verdicts(rep)
        monkeypatch.setattr(pipeline, "run_cluster_disaggregate",
                            lambda inst, cfg, **kw: rep)
        check = verify_bounds(build_witness(), cfg, strict=False)
        assert check.inconclusive
        with pytest.raises(InconclusiveDueToTimeLimit):
            verify_bounds(build_witness(), cfg, strict=True)

    def test_boundscheck_properties(self):
        from fleetplan.pipeline import InequalityVerdict

        good = InequalityVerdict("a", PASS, 1.0, 2.0, 1e-3)
        bad = InequalityVerdict("b", FAIL, 2.0, 1.0, 1e-3)
        unk = InequalityVerdict("c", INCONCLUSIVE, None, None, 0.0)
        check = BoundsCheck(reports={}, verdicts=[good, bad, unk])
        assert not check.ok
        assert check.failed == [bad]
        assert check.inconclusive == [unk]
