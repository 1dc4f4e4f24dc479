"""Model container and the four problem builders."""


import numpy as np
import pytest

from fleetplan.builders import (
    BuildOptions,
    build_p1,
    build_p2,
    build_p3,
    build_p4,
)
from fleetplan.domain import Variant
from fleetplan.errors import ModelError, ModelTooLarge, PreconditionViolated
from fleetplan.model import MilpModel, VarKind
from fleetplan.modelio import write_mps
from fleetplan.solution import AggSolution
from fleetplan.solver import solve

from .conftest import build_witness, make_tiny


def _solved_agg(inst, cfg):
    res = solve(build_p1(inst), cfg)
    assert res.status.value == "Optimal"
    return AggSolution.from_values(inst, res.values, res.objective)


class TestMilpModel:
    def _tiny_model(self):
        m = MilpModel(name="toy", problem="p1", variant="SurplusAllowed")
        x = m.add_var("x", VarKind.CONTINUOUS, lb=0.0, ub=4.0, obj=1.0)
        y = m.add_var("y", VarKind.INTEGER, lb=0.0, ub=3.0, obj=2.0)
        z = m.add_var("z", VarKind.BINARY, obj=-1.0)
        m.add_row("r1", [(x, 1.0), (y, 2.0)], "<=", 6.0)
        m.add_row("r2", [(y, 1.0), (z, -1.0)], ">=", 0.0)
        m.add_row("r3", [(x, 1.0), (z, 1.0)], "==", 2.0)
        return m

    def test_duplicate_names_rejected(self):
        m = self._tiny_model()
        with pytest.raises(ModelError):
            m.add_var("x")
        with pytest.raises(ModelError):
            m.add_row("r1", [(0, 1.0)], "<=", 1.0)

    def test_bad_bounds_and_sense_rejected(self):
        m = self._tiny_model()
        with pytest.raises(ModelError):
            m.add_var("w", lb=2.0, ub=1.0)
        with pytest.raises(ModelError):
            m.add_row("r4", [(0, 1.0)], "=<", 1.0)

    def test_binary_bounds_clamped(self):
        m = MilpModel(name="t", problem="p1", variant="SurplusAllowed")
        m.add_var("q", VarKind.BINARY, lb=-3.0, ub=9.0)
        assert m.vars[0].lb == 0.0 and m.vars[0].ub == 1.0

    def test_zero_coefficients_dropped_and_merged(self):
        m = MilpModel(name="t", problem="p1", variant="SurplusAllowed")
        x = m.add_var("x")
        y = m.add_var("y")
        m.add_row("r", [(x, 1.0), (x, 2.0), (y, 0.0)], "<=", 1.0)
        assert m.rows[0].coeffs == {x: 3.0}

    def test_to_matrices(self):
        m = self._tiny_model()
        mf = m.to_matrices()
        A = mf.A.toarray()
        assert A.shape == (3, 3)
        assert A[0].tolist() == [1.0, 2.0, 0.0]
        # senses map to one-sided or pinned row bounds
        assert mf.row_ub[0] == 6.0 and mf.row_lb[0] == -np.inf
        assert mf.row_lb[1] == 0.0 and mf.row_ub[1] == np.inf
        assert mf.row_lb[2] == mf.row_ub[2] == 2.0
        assert mf.c.tolist() == [1.0, 2.0, -1.0]
        assert mf.integrality.tolist() == [0, 1, 1]
        assert mf.lb.tolist() == [0.0, 0.0, 0.0]
        assert mf.ub.tolist() == [4.0, 3.0, 1.0]

    def test_var_index_lookup(self):
        m = self._tiny_model()
        assert m.var_index("y") == 1
        assert m.has_var("z") and not m.has_var("w")
        with pytest.raises(ModelError):
            m.var_index("w")
        assert m.num_vars == 3 and m.num_rows == 3 and m.num_integer == 2


class TestBuilders:
    def test_p1_deterministic(self):
        a = write_mps(build_p1(make_tiny(seed=4, K=4)))
        b = write_mps(build_p1(make_tiny(seed=4, K=4)))
        assert a == b

    def test_p1_smoke_counts(self, witness):
        m = build_p1(witness)
        assert m.problem == "p1"
        # one vehicle count, one charger count, two assignment binaries
        assert m.has_var("N_v[i=1]") and m.has_var("N_c[j=1]")
        assert m.has_var("b[k=1,i=1]") and m.has_var("b[k=2,i=1]")
        kinds = {v.name: v.kind for v in m.vars}
        assert kinds["N_v[i=1]"] is VarKind.INTEGER
        assert kinds["b[k=1,i=1]"] is VarKind.BINARY
        assert kinds["m[i=1,j=1,t=5]"] is VarKind.CONTINUOUS

    def test_variant_changes_rows_not_vars(self, witness):
        import dataclasses

        m_sur = build_p1(witness)
        m_ex = build_p1(dataclasses.replace(witness, variant=Variant.EXACT))
        assert {v.name for v in m_sur.vars} == {v.name for v in m_ex.vars}
        sur_rows = {r.name for r in m_sur.rows}
        ex_rows = {r.name for r in m_ex.rows}
        assert any(n.startswith("eq13") for n in sur_rows)
        assert any(n.startswith("eq14") for n in ex_rows)
        assert not any(n.startswith("eq14_d_eq") for n in sur_rows)

    def test_k0_builds_and_solves_to_zero(self, cfg):
        import dataclasses

        inst = dataclasses.replace(build_witness(), blocks=())
        res = solve(build_p1(inst), cfg)
        assert res.objective == pytest.approx(0.0, abs=1e-9)

    def test_size_guard(self, witness):
        with pytest.raises(ModelTooLarge):
            build_p1(witness, BuildOptions(max_variables=10))
        with pytest.raises(ModelTooLarge):
            build_p2(witness, BuildOptions(max_variables=10))

    def test_p2_has_individual_layer(self, witness):
        m = build_p2(witness)
        assert m.has_var("y[i=1,v=1]")
        assert m.has_var("bb[i=1,k=1,v=2]")
        assert m.has_var("x[i=1,v=1,j=1,t=3]")
        row_names = {r.name for r in m.rows}
        assert "eq16_fleet[i=1]" in row_names
        assert any(n.startswith("eq26_assign") for n in row_names)

    def test_p2_symmetry_breaking_toggle(self, witness):
        with_sb = build_p2(witness, BuildOptions(symmetry_breaking=True))
        without = build_p2(witness, BuildOptions(symmetry_breaking=False))
        sb_rows = {r.name for r in with_sb.rows} - {r.name for r in without.rows}
        assert any(n.startswith("sb_") for n in sb_rows)
        assert not any(n.startswith("sb_")
                       for n in (r.name for r in without.rows))

    def test_p3_per_type_submodels(self, cfg):
        inst = make_tiny(seed=2, K=3, n_vehicle_types=2)
        agg = _solved_agg(inst, cfg)
        subs = build_p3(inst, agg)
        assert all(s.model.problem == "p3" for s in subs)
        emitted = {s.type_index for s in subs}
        bought = {i for i in (1, 2) if agg.N_v(i) > 0}
        assert emitted == bought
        for s in subs:
            assert s.n_slots == agg.N_v(s.type_index)
            # matching rows are constants here, no fleet-level vars
            assert not s.model.has_var(f"N_v[i={s.type_index}]")

    def test_p3_rejects_garbage_aggregate(self, witness, cfg):
        agg = _solved_agg(witness, cfg)
        bad_values = dict(agg.values)
        bad_values["N_v[i=1]"] = 0.0  # contradicts the assignment rows
        bad = AggSolution(values=bad_values, objective=agg.objective)
        with pytest.raises(PreconditionViolated):
            build_p3(witness, bad)

    def test_p4_freezes_investments(self, witness, cfg):
        agg = _solved_agg(witness, cfg)
        m = build_p4(witness, agg, slack_limit=0)
        by_name = {v.name: v for v in m.vars}
        nv = by_name["N_v[i=1]"]
        assert nv.lb == nv.ub == agg.N_v(1)
        nc = by_name["N_c[j=1]"]
        assert nc.lb == nc.ub == agg.N_c(1)
        bvar = by_name["b[k=1,i=1]"]
        assert bvar.lb == bvar.ub == agg.b(1, 1)
        # slack vars exist at every level but are pinned shut at limit 0
        slack = by_name["slack_Nc[j=1]"]
        assert slack.lb == slack.ub == 0.0

    def test_p4_slack_vars_present_when_allowed(self, witness, cfg):
        agg = _solved_agg(witness, cfg)
        m = build_p4(witness, agg, slack_limit=2)
        slack = [v for v in m.vars if v.name.startswith("slack_Nc")]
        assert len(slack) == witness.J
        assert all(v.kind is VarKind.INTEGER and v.ub == 2.0 for v in slack)
        # slack chargers are paid for at capital cost
        assert slack[0].obj == witness.chargers[0].capital_cost

    def test_p4_rejects_negative_slack(self, witness, cfg):
        agg = _solved_agg(witness, cfg)
        with pytest.raises(ModelError):
            build_p4(witness, agg, slack_limit=-1)

    def test_builders_deterministic_across_problems(self, cfg):
        inst = make_tiny(seed=9, K=3)
        agg = _solved_agg(inst, cfg)
        assert write_mps(build_p4(inst, agg, 1)) == write_mps(build_p4(inst, agg, 1))
        subs_a = build_p3(inst, agg)
        subs_b = build_p3(inst, agg)
        for sa, sb in zip(subs_a, subs_b):
            assert write_mps(sa.model) == write_mps(sb.model)

    def test_metadata_carries_identity(self, witness):
        from fleetplan.instance_io import instance_digest

        m = build_p1(witness)
        md = m.metadata
        assert md["block_ids"] == ["A", "B"]
        assert md["vehicle_ids"] == ["bus"] and md["charger_ids"] == ["plug50"]
        assert md["variant"] == "SurplusAllowed" and md["problem"] == "p1"
        assert md["instance_digest"] == instance_digest(witness)
