"""Command-line front end.

Subcommands:

  study      run the four-cell sizing study and write report files
  verify     run the equivalence checks; nonzero exit on any failure
  bench      LP-vs-grid-oracle timing sweep over horizons
  synth      generate a synthetic dataset CSV
  export-lp  write one instance as an LP text file

Options can come from a flat `key = value` config file (--config) with
command-line flags taking precedence.  Exit codes: 0 success, 1 usage or
configuration error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .dataio import DataFormatError, generate_synthetic, write_csv, write_report
from .formulation import build_lp
from .lptext import export_lp_text
from .model import (
    BatteryParams,
    Mode,
    NonconvexPriceError,
    PriceSchedule,
    SizingProblemSpec,
    TimeGrid,
    validate_prices,
)
from .oracle import GridSpec, timing_benchmark
from .simplex import SolverConfig
from .study import (
    ALL_CELLS,
    ScenarioConfig,
    effective_prices,
    load_households,
    run_phi_stats,
    run_study,
    run_verify,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

_CONFIG_KEYS = {
    "data": str,
    "seed": int,
    "households": int,
    "days": int,
    "step_hours": float,
    "pi_pv": float,
    "pi_b": float,
    "pi_r": float,
    "pi_g": float,
    "amortize_days": float,
    "a_max": float,
    "alpha_hi": float,
    "alpha_lo": float,
    "gamma": float,
    "rate": float,
    "beta": float,
    "zeh": bool,
    "mode": str,
    "out": str,
    "jobs": int,
}


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict:
    values = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, text = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        kind = _CONFIG_KEYS[key]
        try:
            values[key] = _parse_bool(text) if kind is bool else kind(text)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: bad value for {key}: {text!r}") from None
    return values


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--data", help="dataset CSV path (overrides synthetic generation)")
    p.add_argument("--seed", type=int, help="synthetic dataset seed")
    p.add_argument("--households", type=int, help="synthetic household count")
    p.add_argument("--days", type=int, help="synthetic horizon in days")
    p.add_argument("--step-hours", type=float, dest="step_hours", help="hours per step")
    p.add_argument("--pi-pv", type=float, dest="pi_pv", help="panel price per m2")
    p.add_argument("--pi-b", type=float, dest="pi_b", help="battery price per kWh")
    p.add_argument("--pi-r", type=float, dest="pi_r", help="reverse-power price per kWh")
    p.add_argument("--pi-g", type=float, dest="pi_g", help="backup generation price per kWh")
    p.add_argument("--amortize-days", type=float, dest="amortize_days",
                   help="horizon the investment prices are quoted for (0 disables scaling)")
    p.add_argument("--a-max", type=float, dest="a_max", help="panel area cap per household, m2")
    p.add_argument("--alpha-hi", type=float, dest="alpha_hi")
    p.add_argument("--alpha-lo", type=float, dest="alpha_lo")
    p.add_argument("--gamma", type=float, help="per-step retention factor")
    p.add_argument("--rate", type=float, help="rate limit as a capacity fraction")
    p.add_argument("--beta", type=float, help="initial charge as a capacity fraction")
    p.add_argument("--zeh", action="store_true", default=None,
                   help="restrict the study to net-zero-constrained cells")
    p.add_argument("--mode", choices=["individual", "community", "all"],
                   help="which investment modes to run")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="parallel LP solves for per-household cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zehsizer",
        description="PV-panel and battery sizing via an LP relaxation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_study = sub.add_parser("study", help="run the sizing study and write reports")
    _add_common_flags(p_study)

    p_verify = sub.add_parser("verify", help="run the equivalence checks")
    _add_common_flags(p_verify)
    p_verify.add_argument("--verify-steps", type=int, default=96,
                          help="horizon (steps) for the verification instances")
    p_verify.add_argument("--instances", type=int, default=3,
                          help="number of seeded instances per check")
    p_verify.add_argument("--grid-points", type=int, default=41,
                          help="oracle grid resolution per axis")
    p_verify.add_argument("--no-oracle", action="store_true",
                          help="skip the grid-oracle legs")

    p_bench = sub.add_parser("bench", help="LP vs grid-oracle timing sweep")
    _add_common_flags(p_bench)
    p_bench.add_argument("--horizons", default="48,96,240,480",
                         help="comma-separated step counts")
    p_bench.add_argument("--grid-points", type=int, default=81)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset CSV")
    _add_common_flags(p_synth)

    p_export = sub.add_parser("export-lp", help="write one instance as LP text")
    _add_common_flags(p_export)
    p_export.add_argument("--lp-out", help="output file (default <out>/problem.lp)")
    p_export.add_argument("--household-index", type=int, default=0,
                          help="household for individual-mode export")
    return parser


def scenario_from_args(args) -> ScenarioConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    battery = BatteryParams(
        alpha_hi=values.get("alpha_hi", 0.95),
        alpha_lo=values.get("alpha_lo", 0.05),
        retention=values.get("gamma", 0.999),
        rate_frac=values.get("rate", 0.5),
        init_frac=values.get("beta"),
    )
    prices = PriceSchedule(
        pi_pv=values.get("pi_pv", 1000.0),
        pi_b=values.get("pi_b", 4500.0),
        pi_r=values.get("pi_r", 10.0),
        pi_g=values.get("pi_g", 30.0),
    )
    mode = values.get("mode", "all")
    zeh_only = bool(values.get("zeh", False))
    if mode == "all":
        cells = ALL_CELLS
    elif mode == "individual":
        cells = ("individual", "individual_zeh")
    else:
        cells = ("community", "community_zeh")
    if zeh_only:
        cells = tuple(c for c in cells if c.endswith("_zeh"))

    return ScenarioConfig(
        data_path=values.get("data"),
        seed=values.get("seed", 1),
        households=values.get("households", 20),
        days=values.get("days", 31),
        step_hours=values.get("step_hours", 0.5),
        battery=battery,
        prices=prices,
        amortize_days=values.get("amortize_days", 334.0),
        a_max=values.get("a_max", 100.0),
        cells=cells,
        out_dir=values.get("out", "out"),
        jobs=values.get("jobs", 1),
    )


def _cmd_study(args) -> int:
    config = scenario_from_args(args)
    check = validate_prices(config.prices)
    if not check.ok:
        print(f"error: {check.message}", file=sys.stderr)
        return EXIT_USAGE
    study = run_study(config)
    written = write_report(study.report, config.out_dir)
    phi = run_phi_stats(study)
    series_path = Path(config.out_dir) / "phi_series.csv"
    with series_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "step", "total_spill_kwh", "total_deficit_kwh"])
        for cell in sorted(phi["cells"]):
            series = phi["cells"][cell]
            for i, (s, d) in enumerate(zip(series["spill_series"], series["deficit_series"])):
                writer.writerow([cell, i, repr(float(s)), repr(float(d))])
    written.append(series_path)
    for cell in study.report["cells"]:
        print(
            f"{cell['cell']:16s} av_pv={_num(cell['av_pv_m2']):>8s} "
            f"av_batt={_num(cell['av_battery_kwh']):>8s} zeh%={_num(cell['zeh_pct']):>6s} "
            f"savings%={_num(cell['savings_aggregate_pct']):>8s} "
            f"infeasible={cell['infeasible_households']}"
        )
    print("wrote:", ", ".join(str(p) for p in written))
    return EXIT_OK


def _num(v) -> str:
    if v is None:
        return "-"
    return f"{v:.2f}"


def _cmd_verify(args) -> int:
    config = scenario_from_args(args)
    grid = GridSpec(a_points=args.grid_points, c_points=args.grid_points)
    report = run_verify(
        config,
        num_instances=args.instances,
        verify_steps=args.verify_steps,
        grid=grid,
        enable_oracle=not args.no_oracle,
    )
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_bench(args) -> int:
    config = scenario_from_args(args)
    horizons = [int(h) for h in str(args.horizons).split(",") if h.strip()]
    households, manifest = load_households(config)
    if horizons[-1] > manifest.num_steps:
        print(
            f"error: largest horizon {horizons[-1]} exceeds dataset length "
            f"{manifest.num_steps}; increase --days",
            file=sys.stderr,
        )
        return EXIT_USAGE
    prices = effective_prices(config, manifest.num_steps)
    spec = SizingProblemSpec(
        Mode.INDIVIDUAL,
        (households[0],),
        config.battery,
        prices,
        config.a_max,
        False,
        TimeGrid(num_steps=manifest.num_steps, step_hours=manifest.step_hours),
    )
    grid = GridSpec(a_points=args.grid_points, c_points=args.grid_points)
    rows = timing_benchmark(spec, horizons, grid)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench_path = out / "bench.csv"
    with bench_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["K", "lp_seconds", "oracle_seconds"])
        for k, lp_s, oracle_s in rows:
            writer.writerow([k, f"{lp_s:.6f}", f"{oracle_s:.6f}"])
            print(f"K={k:6d}  lp={lp_s:8.3f}s  oracle={oracle_s:8.3f}s")
    print("wrote:", bench_path)
    return EXIT_OK


def _cmd_synth(args) -> int:
    config = scenario_from_args(args)
    households, manifest = generate_synthetic(
        config.seed, config.households, config.days, config.step_hours
    )
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.csv"
    write_csv(households, path, step_hours=config.step_hours)
    print(
        f"wrote {path} ({manifest.households} households x {manifest.num_steps} steps)"
    )
    return EXIT_OK


def _cmd_export_lp(args) -> int:
    config = scenario_from_args(args)
    households, manifest = load_households(config)
    prices = effective_prices(config, manifest.num_steps)
    grid = TimeGrid(num_steps=manifest.num_steps, step_hours=manifest.step_hours)
    zeh = all(c.endswith("_zeh") for c in config.cells)
    if config.cells[0].startswith("community"):
        spec = SizingProblemSpec(
            Mode.COMMUNITY, tuple(households), config.battery, prices,
            config.a_max, zeh, grid,
        )
    else:
        idx = args.household_index
        if not 0 <= idx < len(households):
            print(f"error: household index {idx} out of range", file=sys.stderr)
            return EXIT_USAGE
        spec = SizingProblemSpec(
            Mode.INDIVIDUAL, (households[idx],), config.battery, prices,
            config.a_max, zeh, grid,
        )
    lp, vmap = build_lp(spec)
    target = Path(args.lp_out) if args.lp_out else Path(config.out_dir) / "problem.lp"
    export_lp_text(lp, vmap, target)
    print(f"wrote {target} ({lp.n_vars} variables, "
          f"{lp.a_eq.shape[0]} equality rows, {lp.a_ub.shape[0]} inequality rows)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "study": _cmd_study,
        "verify": _cmd_verify,
        "bench": _cmd_bench,
        "synth": _cmd_synth,
        "export-lp": _cmd_export_lp,
    }
    try:
        return handlers[args.command](args)
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, NonconvexPriceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
