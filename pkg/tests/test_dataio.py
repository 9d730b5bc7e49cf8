import json

import numpy as np
import pytest

from zehsizer.dataio import (
    DataFormatError,
    generate_synthetic,
    load_csv,
    write_csv,
    write_report,
)
from zehsizer.model import HouseholdSeries


class TestSyntheticGenerator:
    def test_deterministic_in_seed(self):
        a, _ = generate_synthetic(7, 5, 3)
        b, _ = generate_synthetic(7, 5, 3)
        for ha, hb in zip(a, b):
            assert ha.household_id == hb.household_id
            np.testing.assert_array_equal(ha.consumption, hb.consumption)
            np.testing.assert_array_equal(ha.pv_yield, hb.pv_yield)

    def test_different_seeds_differ(self):
        a, _ = generate_synthetic(1, 1, 1)
        b, _ = generate_synthetic(2, 1, 1)
        assert not np.array_equal(a[0].consumption, b[0].consumption)

    def test_night_yield_is_zero(self):
        households, manifest = generate_synthetic(3, 4, 2)
        steps_per_day = int(round(24 / manifest.step_hours))
        hours = (np.arange(manifest.num_steps) % steps_per_day + 0.5) * manifest.step_hours
        night = (hours <= 6.0) | (hours >= 18.0)
        for hh in households:
            assert np.all(hh.pv_yield[night] == 0.0)
            assert hh.pv_yield.max() > 0.0

    def test_daily_consumption_mean_in_band(self):
        # Regression band measured on the generator itself: every household's
        # daily mean must stay within 5..25 kWh.
        households, manifest = generate_synthetic(1, 20, 31)
        days = 31
        for hh in households:
            daily = hh.consumption.reshape(days, -1).sum(axis=1)
            assert 5.0 <= daily.mean() <= 25.0

    def test_invariants_hold(self):
        households, manifest = generate_synthetic(11, 3, 2)
        assert manifest.households == 3
        assert manifest.num_steps == 96
        for hh in households:
            assert hh.num_steps == manifest.num_steps
            assert np.all(hh.consumption >= 0)
            assert np.all(hh.pv_yield >= 0)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 0, 1)
        with pytest.raises(ValueError):
            generate_synthetic(1, 1, 1, step_hours=0.7)


class TestCsvRoundTrip:
    def test_write_then_load_is_identity(self, tmp_path):
        households, _ = generate_synthetic(5, 3, 2)
        path = tmp_path / "data.csv"
        write_csv(households, path)
        loaded, manifest = load_csv(path)
        assert manifest.source == "CsvFile"
        assert manifest.households == 3
        assert manifest.num_steps == 96
        assert manifest.step_hours == 0.5
        for orig, back in zip(households, loaded):
            assert orig.household_id == back.household_id
            np.testing.assert_array_equal(orig.consumption, back.consumption)
            np.testing.assert_array_equal(orig.pv_yield, back.pv_yield)

    def test_unsorted_rows_are_sorted(self, tmp_path):
        path = tmp_path / "messy.csv"
        path.write_text(
            "timestamp,household_id,consumption_kwh,pv_yield_kwh_per_m2\n"
            "2021-04-01T00:30:00,a,2.0,0.0\n"
            "2021-04-01T00:00:00,a,1.0,0.5\n"
        )
        loaded, _ = load_csv(path)
        np.testing.assert_array_equal(loaded[0].consumption, [1.0, 2.0])
        np.testing.assert_array_equal(loaded[0].pv_yield, [0.5, 0.0])


class TestCsvValidation:
    HEADER = "timestamp,household_id,consumption_kwh,pv_yield_kwh_per_m2\n"

    def test_negative_value_names_row(self, tmp_path):
        rows = [self.HEADER]
        for i in range(20):
            value = -0.4 if i == 15 else 0.5  # lands on file row 17
            rows.append(f"2021-04-01T{i // 2:02d}:{30 * (i % 2):02d}:00,a,{value},0.0\n")
        path = tmp_path / "neg.csv"
        path.write_text("".join(rows))
        with pytest.raises(DataFormatError, match="row 17"):
            load_csv(path)

    def test_ragged_grid_detected(self, tmp_path):
        rows = [self.HEADER]
        for i in range(4):
            rows.append(f"2021-04-01T0{i}:00:00,a,1.0,0.0\n")
        for i in range(3):
            rows.append(f"2021-04-01T0{i}:00:00,b,1.0,0.0\n")
        path = tmp_path / "ragged.csv"
        path.write_text("".join(rows))
        with pytest.raises(DataFormatError, match="ragged"):
            load_csv(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("timestamp,household_id,consumption_kwh\n")
        with pytest.raises(DataFormatError, match="pv_yield_kwh_per_m2"):
            load_csv(path)

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text(self.HEADER + "2021-04-01T00:00:00,a,abc,0.0\n")
        with pytest.raises(DataFormatError, match="row 2"):
            load_csv(path)

    def test_bad_timestamp(self, tmp_path):
        path = tmp_path / "ts.csv"
        path.write_text(self.HEADER + "yesterday,a,1.0,0.0\n")
        with pytest.raises(DataFormatError, match="timestamp"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError, match="empty"):
            load_csv(path)


def minimal_results():
    cells = []
    for cell, mode, zeh in (
        ("individual", "individual", False),
        ("individual_zeh", "individual", True),
        ("community", "community", False),
        ("community_zeh", "community", True),
    ):
        cells.append(
            {
                "cell": cell,
                "mode": mode,
                "zeh_constrained": zeh,
                "av_pv_m2": 10.0,
                "av_battery_kwh": 5.0,
                "zeh_pct": 50.0,
                "savings_aggregate_pct": 12.5,
                "savings_mean_of_users_pct": 11.0,
                "infeasible_households": 0,
                "objective_total": 123.0,
                "avg_spill_per_user_step": 0.01,
                "avg_deficit_per_user_step": 0.2,
                "households": [
                    {
                        "household_id": "h001",
                        "pv_area_m2": 10.0,
                        "capacity_kwh": 5.0,
                        "savings_pct": 12.5,
                        "zeh_attained": True,
                        "status": "optimal",
                    }
                ],
            }
        )
    return {"dataset": {"source": "Synthetic"}, "cells": cells}


class TestWriteReport:
    def test_four_cells_yield_four_summary_rows(self, tmp_path):
        files = write_report(minimal_results(), tmp_path)
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert len(summary) == 5  # header + 4 cells
        assert {f.name for f in files} == {
            "summary.csv", "per_household.csv", "phi_stats.csv", "report.json",
        }

    def test_json_round_trip(self, tmp_path):
        results = minimal_results()
        write_report(results, tmp_path)
        loaded = json.loads((tmp_path / "report.json").read_text())
        assert loaded == results

    def test_empty_results_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_report({"cells": []}, tmp_path)
