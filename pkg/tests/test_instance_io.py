"""Instance JSON round-trips and content digests."""

import json

import pytest

from fleetplan.domain import Variant
from fleetplan.errors import SchemaError
from fleetplan.instance_io import (
    SCHEMA_ID,
    dumps_instance,
    instance_digest,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
)

from .conftest import build_witness, make_tiny


class TestRoundTrip:
    def test_witness_round_trips_exactly(self, tmp_path):
        inst = build_witness()
        path = tmp_path / "witness.json"
        save_instance(inst, path)
        back = load_instance(path)
        assert back == inst

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("variant", list(Variant))
    def test_synthetic_round_trips(self, tmp_path, seed, variant):
        inst = make_tiny(seed=seed, K=4, variant=variant, S=2)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        assert load_instance(path) == inst

    def test_dict_round_trip(self):
        inst = make_tiny(seed=7, K=3)
        assert instance_from_dict(instance_to_dict(inst)) == inst

    def test_serialization_is_canonical(self):
        a = dumps_instance(build_witness())
        b = dumps_instance(build_witness())
        assert a == b
        assert json.loads(a)["schema"] == SCHEMA_ID


class TestDigest:
    def test_stable_across_round_trip(self, tmp_path):
        inst = make_tiny(seed=3, K=5)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        assert instance_digest(load_instance(path)) == instance_digest(inst)

    def test_sensitive_to_content(self):
        import dataclasses

        a = build_witness()
        b = dataclasses.replace(a, variant=Variant.EXACT)
        assert instance_digest(a) != instance_digest(b)

    def test_hex_shape(self):
        d = instance_digest(build_witness())
        assert len(d) == 64
        int(d, 16)  # parses as hex


class TestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            load_instance(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_instance(p)

    def test_wrong_schema_id(self):
        doc = instance_to_dict(build_witness())
        doc["schema"] = "something-else/9"
        with pytest.raises(SchemaError):
            instance_from_dict(doc)

    def test_missing_field(self):
        doc = instance_to_dict(build_witness())
        del doc["tariff"]
        with pytest.raises(SchemaError):
            instance_from_dict(doc)

    def test_malformed_field_type(self):
        doc = instance_to_dict(build_witness())
        doc["time_grid"]["T_d"] = "twenty-four"
        with pytest.raises(SchemaError):
            instance_from_dict(doc)
