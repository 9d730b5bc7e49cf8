"""Dataset ingestion, synthetic neighborhood generation, and report writing.

The CSV schema is long format with an explicit timestamp per row:

    timestamp,household_id,consumption_kwh,pv_yield_kwh_per_m2

Timestamps are ISO-8601; rows may arrive unsorted.  Every household must
cover exactly the same timestamp grid.

The synthetic generator stands in for metered data: consumption has morning
and evening peaks over a base load, PV yield is a truncated half-sinusoid
over the daylight window, scaled by a per-day weather factor and a fixed
per-household orientation factor.  Poorly oriented households may be unable
to reach a net-zero balance even at the panel-area cap, which keeps the
infeasible branch of the constrained problem exercised.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .model import HouseholdSeries, TimeGrid

__all__ = [
    "DatasetManifest",
    "DataFormatError",
    "load_csv",
    "write_csv",
    "generate_synthetic",
    "write_report",
]

CSV_COLUMNS = ("timestamp", "household_id", "consumption_kwh", "pv_yield_kwh_per_m2")


class DataFormatError(ValueError):
    """Malformed dataset file; message carries the offending row when known."""


@dataclass(frozen=True)
class DatasetManifest:
    source: str  # "CsvFile" or "Synthetic"
    households: int
    num_steps: int
    step_hours: float
    seed: int | None = None


def load_csv(path) -> tuple[list[HouseholdSeries], DatasetManifest]:
    """Read a long-format dataset; households come back sorted by id."""
    path = Path(path)
    per_house: dict[str, list[tuple[datetime, float, float]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_COLUMNS:
            missing = set(CSV_COLUMNS) - {h.strip() for h in header}
            raise DataFormatError(
                f"{path}: bad header {header!r}, missing columns {sorted(missing)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise DataFormatError(f"{path}: row {row_no}: expected 4 fields, got {len(row)}")
            ts_text, hid, cons_text, pv_text = row
            try:
                ts = datetime.fromisoformat(ts_text.strip())
            except ValueError:
                raise DataFormatError(f"{path}: row {row_no}: bad timestamp {ts_text!r}") from None
            values = []
            for label, text in (("consumption_kwh", cons_text), ("pv_yield_kwh_per_m2", pv_text)):
                try:
                    v = float(text)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {row_no}: non-numeric {label} {text!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataFormatError(f"{path}: row {row_no}: non-finite {label}")
                if v < 0:
                    raise DataFormatError(f"{path}: row {row_no}: negative {label} ({v})")
                values.append(v)
            per_house.setdefault(hid.strip(), []).append((ts, values[0], values[1]))

    if not per_house:
        raise DataFormatError(f"{path}: no data rows")

    households = []
    reference_grid: list[datetime] | None = None
    reference_id = ""
    for hid in sorted(per_house):
        rows = sorted(per_house[hid], key=lambda t: t[0])
        stamps = [t[0] for t in rows]
        if len(set(stamps)) != len(stamps):
            raise DataFormatError(f"{path}: household {hid!r} has duplicate timestamps")
        if reference_grid is None:
            reference_grid = stamps
            reference_id = hid
        elif stamps != reference_grid:
            raise DataFormatError(
                f"{path}: ragged grid: household {hid!r} covers different timestamps "
                f"than {reference_id!r} ({len(stamps)} vs {len(reference_grid)} rows)"
            )
        households.append(
            HouseholdSeries(
                household_id=hid,
                consumption=np.array([t[1] for t in rows]),
                pv_yield=np.array([t[2] for t in rows]),
            )
        )

    if len(reference_grid) > 1:
        step_hours = (reference_grid[1] - reference_grid[0]).total_seconds() / 3600.0
    else:
        step_hours = 0.5
    manifest = DatasetManifest(
        source="CsvFile",
        households=len(households),
        num_steps=len(reference_grid),
        step_hours=step_hours,
    )
    return households, manifest


def write_csv(households, path, step_hours: float = 0.5, start: datetime | None = None) -> None:
    """Write households in the long-format schema (inverse of load_csv)."""
    if start is None:
        start = datetime(2021, 4, 1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    delta = timedelta(hours=step_hours)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for hh in households:
            ts = start
            for x, y in zip(hh.consumption, hh.pv_yield):
                writer.writerow([ts.isoformat(), hh.household_id, repr(float(x)), repr(float(y))])
                ts = ts + delta


def generate_synthetic(
    seed: int,
    n_households: int,
    days: int,
    step_hours: float = 0.5,
) -> tuple[list[HouseholdSeries], DatasetManifest]:
    """Deterministically generate a neighborhood of load/PV profiles.

    Same seed, same output, bit for bit.  PV yield is zero outside the
    daylight window (6:00 to 18:00).
    """
    if n_households < 1 or days < 1:
        raise ValueError("need at least one household and one day")
    rng = np.random.default_rng(seed)
    steps_per_day = int(round(24.0 / step_hours))
    if abs(steps_per_day * step_hours - 24.0) > 1e-9:
        raise ValueError("step_hours must divide 24")
    k = steps_per_day * days
    hours = (np.arange(steps_per_day) + 0.5) * step_hours  # step midpoints

    sunrise, sunset = 6.0, 18.0
    day_frac = np.clip((hours - sunrise) / (sunset - sunrise), 0.0, 1.0)
    sun_shape = np.where(
        (hours > sunrise) & (hours < sunset), np.sin(np.pi * day_frac), 0.0
    )
    # Peak panel output around 0.18 kW/m2, converted to kWh per step.
    pv_peak = 0.18 * step_hours

    morning = np.exp(-0.5 * ((hours - 7.5) / 1.2) ** 2)
    evening = np.exp(-0.5 * ((hours - 20.0) / 2.0) ** 2)
    base_shape = 0.25 + 1.1 * morning + 1.6 * evening  # kW
    # Normalize so a scale of 1.0 means 12 kWh per day.
    base_kwh = base_shape * step_hours
    base_kwh *= 12.0 / base_kwh.sum()

    households = []
    for i in range(n_households):
        orientation = rng.uniform(0.2, 1.0)
        scale = rng.uniform(0.55, 1.7)
        # Bimodal weather: a run of overcast days keeps full self-supply from
        # being a free lunch, mirroring what metered yield data looks like.
        overcast = rng.random(days) < 0.3
        weather = np.where(
            overcast,
            rng.uniform(0.05, 0.25, size=days),
            rng.uniform(0.55, 1.0, size=days),
        )
        pv = (sun_shape[None, :] * weather[:, None]) * (pv_peak * orientation)
        noise = rng.normal(0.0, 0.08, size=(days, steps_per_day))
        cons = np.maximum(base_kwh[None, :] * scale * (1.0 + noise), 0.0)
        households.append(
            HouseholdSeries(
                household_id=f"h{i + 1:03d}",
                consumption=cons.ravel(),
                pv_yield=pv.ravel(),
            )
        )
    manifest = DatasetManifest(
        source="Synthetic",
        households=n_households,
        num_steps=k,
        step_hours=step_hours,
        seed=seed,
    )
    return households, manifest


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(results: dict, out_dir) -> list[Path]:
    """Emit the study tables: summary, per-household detail, overflow stats, JSON.

    `results` is the dictionary produced by study.run_study; the JSON file is
    a faithful dump so that a reload compares equal.
    """
    if not results or not results.get("cells"):
        raise ValueError("results are empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    summary_path = out / "summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "cell",
                "mode",
                "zeh_constrained",
                "av_pv_m2",
                "av_battery_kwh",
                "zeh_pct",
                "savings_aggregate_pct",
                "savings_mean_of_users_pct",
                "infeasible_households",
            ]
        )
        for cell in results["cells"]:
            writer.writerow(
                [
                    cell["cell"],
                    cell["mode"],
                    cell["zeh_constrained"],
                    _fmt(cell["av_pv_m2"]),
                    _fmt(cell["av_battery_kwh"]),
                    _fmt(cell["zeh_pct"]),
                    _fmt(cell["savings_aggregate_pct"]),
                    _fmt(cell["savings_mean_of_users_pct"]),
                    cell["infeasible_households"],
                ]
            )
    written.append(summary_path)

    per_hh_path = out / "per_household.csv"
    with per_hh_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cell", "household_id", "pv_area_m2", "capacity_kwh", "savings_pct", "zeh_attained", "status"]
        )
        for cell in results["cells"]:
            for row in cell["households"]:
                writer.writerow(
                    [
                        cell["cell"],
                        row["household_id"],
                        _fmt(row["pv_area_m2"]),
                        _fmt(row["capacity_kwh"]),
                        _fmt(row["savings_pct"]),
                        row["zeh_attained"],
                        row["status"],
                    ]
                )
    written.append(per_hh_path)

    phi_path = out / "phi_stats.csv"
    with phi_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "avg_spill_per_user_step", "avg_deficit_per_user_step"])
        for cell in results["cells"]:
            writer.writerow(
                [
                    cell["cell"],
                    _fmt(cell["avg_spill_per_user_step"]),
                    _fmt(cell["avg_deficit_per_user_step"]),
                ]
            )
    written.append(phi_path)

    json_path = out / "report.json"
    with json_path.open("w", encoding="utf-8") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(json_path)
    return written
