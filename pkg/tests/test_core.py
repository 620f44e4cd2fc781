import dataclasses
import json
import logging
from importlib import resources

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evcs_planner import DataError, ModelParams, Plan, classify_congestion, validate_params
from evcs_planner.core import (
    CostBreakdown,
    dump_params_json,
    dump_roads_csv,
    parse_params_json,
    parse_roads_csv,
)

HEADER = "id,daily_flow,congestion_level,length_km,x_km,y_km,neighbors\n"


def _bundled_text(name):
    return resources.files("evcs_planner").joinpath(f"data/{name}").read_text(encoding="utf-8")


class TestClassifyCongestion:
    @pytest.mark.parametrize("flow, level", [
        (127, 1), (100, 0), (487, 4), (30, 0), (100.5, 1), (200, 1), (300, 2),
        (400, 3), (400.01, 4), (520, 4),
    ])
    def test_bands(self, flow, level):
        assert classify_congestion(flow) == level

    def test_negative_flow_is_an_input_error(self):
        with pytest.raises(DataError):
            classify_congestion(-1)

    def test_out_of_range_clamps_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert classify_congestion(10) == 0
            assert classify_congestion(900) == 4
        assert "clamping" in caplog.text

    @given(st.floats(0, 1000), st.floats(0, 1000))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert classify_congestion(lo) <= classify_congestion(hi)


class TestValidateParams:
    def test_case_study_values_are_valid(self, table_params):
        report = validate_params(table_params)
        assert report.ok
        assert report.messages() == []

    def test_low_initial_soc(self):
        report = validate_params(ModelParams(soc_0=0.15))
        assert "soc_0: soc_0 ≥ 0.2" in report.messages()

    def test_zero_margin(self):
        report = validate_params(ModelParams(c_s=0.8, c_p=0.8))
        assert "c_s: c_s > c_p" in report.messages()

    def test_collects_every_violation(self):
        report = validate_params(ModelParams(soc_0=0.1, c_s=0.5, n_fast_min=40, b_min=2000))
        names = {name for name, _ in report}
        assert {"soc_0", "c_s", "n_fast_min", "b_min"} <= names

    def test_profile_must_sum_to_one(self):
        report = validate_params(ModelParams(arrival_profile=(0.05,) * 24))
        assert [n for n, _ in report] == ["arrival_profile"]

    def test_session_energy(self, table_params):
        assert table_params.session_kwh == pytest.approx(48.0)


class TestParamsJson:
    def test_bundled_round_trip_is_byte_stable(self):
        text = _bundled_text("params.json")
        assert dump_params_json(parse_params_json(text)) == text

    def test_missing_key_is_named(self):
        data = json.loads(_bundled_text("params.json"))
        del data["k_time"]
        with pytest.raises(DataError, match="k_time"):
            parse_params_json(json.dumps(data))

    def test_unknown_key_is_named(self):
        data = json.loads(_bundled_text("params.json"))
        data["speed_of_light"] = 1
        with pytest.raises(DataError, match="speed_of_light"):
            parse_params_json(json.dumps(data))

    def test_syntax_error_has_line(self):
        with pytest.raises(DataError, match=r"params.json:2:"):
            parse_params_json('{\n  "D": ,\n}')

    def test_every_field_present(self):
        data = json.loads(_bundled_text("params.json"))
        assert set(data) == {f.name for f in dataclasses.fields(ModelParams)}


class TestRoadsCsv:
    def test_bundled_round_trip_is_byte_stable(self):
        text = _bundled_text("roads.csv")
        net = parse_roads_csv(text)
        assert len(net) == 234
        assert dump_roads_csv(net) == text

    def test_bundled_levels_match_bands(self, roads):
        assert roads.inconsistent_levels() == []

    def test_negative_flow_names_line(self):
        text = HEADER + "1,127,1,1,0,0,2\n2,-5,0,1,1,0,1\n"
        with pytest.raises(DataError, match=r":3: road 2 has non-positive daily_flow -5"):
            parse_roads_csv(text)

    def test_bad_number_names_line(self):
        text = HEADER + "1,abc,1,1,0,0,\n"
        with pytest.raises(DataError, match=r":2:"):
            parse_roads_csv(text)

    def test_wrong_field_count(self):
        with pytest.raises(DataError, match=r":2: expected 7 fields"):
            parse_roads_csv(HEADER + "1,127,1\n")

    def test_bad_header(self):
        with pytest.raises(DataError, match=":1:"):
            parse_roads_csv("id,flow\n1,2\n")

    def test_ids_must_be_in_order(self):
        text = HEADER + "2,127,1,1,0,0,\n"
        with pytest.raises(DataError, match="position 1 has id 2"):
            parse_roads_csv(text)

    def test_unknown_neighbor(self):
        text = HEADER + "1,127,1,1,0,0,7\n"
        with pytest.raises(DataError, match="invalid neighbor"):
            parse_roads_csv(text)

    def test_decimal_values_round_trip(self):
        text = HEADER + "1,127.5,1,0.85,0.5882352941176471,0,2\n2,50,0,0.85,1,0,1\n"
        assert dump_roads_csv(parse_roads_csv(text)) == text


class TestPlan:
    def test_from_stations_and_invariants(self, table_params):
        plan = Plan.from_stations(5, {2: (13, 21), 5: (22, 10)})
        assert plan.n_stations == 2
        assert plan.stations.tolist() == [1, 4]
        assert plan.check_invariants(table_params) == []

    def test_closed_site_with_piles(self, table_params):
        plan = Plan(np.array([0, 1]), np.array([3, 12]), np.array([0, 12]))
        assert "closed site with piles" in plan.check_invariants(table_params)

    def test_pile_bounds(self, table_params):
        plan = Plan.from_stations(2, {1: (40, 12)})
        assert plan.check_invariants(table_params) == ["fast pile count out of bounds"]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Plan(np.zeros(3), np.zeros(2), np.zeros(3))

    def test_key_distinguishes_piles(self):
        a = Plan.from_stations(3, {1: (10, 10)})
        b = Plan.from_stations(3, {1: (10, 11)})
        assert a.key() != b.key()
        assert a.key() == Plan.from_stations(3, {1: (10, 10)}).key()


class TestCostBreakdown:
    def test_report_row_layout(self):
        b = CostBreakdown(income=10.0, annual_cost=4.0, pile_cost_total=5.0, om_cost_total=1.0,
                          travel_time_cost=2.0, queue_time_cost=0.5, energy_cost=0.25,
                          f1=-6.0, f2=2.75, site_cost_annual=2.0, pile_cost_annual=1.0)
        row = b.report_row()
        assert tuple(row) == CostBreakdown.REPORT_COLUMNS
        assert row["annual_profit"] == 6.0
        assert row["total_time_cost"] == 2.5
        assert row["total_additional_cost"] == 2.75
