"""Command-line interface.

Three subcommands: ``test`` runs the battery of hypothesis tests on a
returns panel, ``ci`` inverts them into one-sided confidence bounds, and
``simulate`` drives the Monte Carlo lab. Exit codes: 0 success, 2 usage
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError
from .montecarlo import (
    ReturnsLaw,
    SimConfig,
    SnrConfig,
    run_ks_sweep,
    run_null_calibration,
    run_power_study,
    run_rho_sweep,
)
from .panels import PanelFile, load_panel
from .report import (
    CLI_METHODS,
    evaluate_panel,
    ks_csv_rows,
    report_to_json,
    summary_csv_rows,
    sweep_csv_rows,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

SEED_ENV_VAR = "MAXSHARPE_SEED"


class UsageError(Exception):
    """Bad flag combination or config value; maps to exit code 2."""


def _add_panel_arguments(parser):
    parser.add_argument("panel", help="wide CSV of returns, one column per asset")
    parser.add_argument("--date-column", default=None,
                        help="name of the date column (auto-detected when the "
                             "first header cell is empty or date-like)")
    parser.add_argument("--rfr", default="0",
                        help="risk-free rate: a per-period constant or the "
                             "name of a column to subtract")
    parser.add_argument("--methods", default="conditional",
                        help="comma-separated subset of: " + ",".join(CLI_METHODS))
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--flavor", choices=["gaussian", "elliptical"],
                        default="gaussian",
                        help="covariance flavor for the conditional and naive "
                             "methods")
    parser.add_argument("--rho", type=float, default=None,
                        help="override the common-correlation estimate used by "
                             "the rho-based methods")
    parser.add_argument("--rho-source",
                        choices=["median_pairwise", "mean_selected_vs_rest"],
                        default="median_pairwise")
    parser.add_argument("--format", choices=["json", "table"], default="json")
    parser.add_argument("--annualize", action="store_true",
                        help="display Sharpe quantities in per-sqrt(year) "
                             "units (display only)")
    parser.add_argument("--periods-per-year", type=float, default=12.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxsr",
        description="Inference on the asset with the maximum sample Sharpe ratio.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="hypothesis tests on the selected asset")
    _add_panel_arguments(p_test)
    p_test.add_argument("--null-value", type=float, default=0.0,
                        help="null signal-to-noise ratio, per sqrt(period)")

    p_ci = sub.add_parser("ci", help="one-sided lower confidence bounds")
    _add_panel_arguments(p_ci)
    p_ci.add_argument("--level", type=float, default=0.95,
                      help="confidence level of the one-sided interval")

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p_sim.add_argument("--config", default=None,
                       help="key=value config file; flags override it")
    p_sim.add_argument("--experiment",
                       choices=["null", "power", "rho_sweep", "ks_sweep"],
                       default=None)
    p_sim.add_argument("--k", type=int, default=None)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--rho", type=float, default=None)
    p_sim.add_argument("--snr", default=None,
                       help="zero | all_equal:Z | one_good:Z | half_good:Z | "
                            "uniform:LO:HI")
    p_sim.add_argument("--law", choices=["gaussian", "student_t"], default=None)
    p_sim.add_argument("--df", type=float, default=None)
    p_sim.add_argument("--replications", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--methods", default=None)
    p_sim.add_argument("--alpha", type=float, default=None)
    p_sim.add_argument("--covariance-mode",
                       choices=["infeasible", "feasible_gaussian",
                                "feasible_elliptical"],
                       default=None)
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--rhos", default=None,
                       help="comma-separated correlation grid (rho_sweep)")
    p_sim.add_argument("--grid-n", default=None,
                       help="comma-separated n grid (ks_sweep)")
    p_sim.add_argument("--grid-k", default=None,
                       help="comma-separated k grid (ks_sweep)")
    p_sim.add_argument("--grid-rho", default=None,
                       help="comma-separated rho grid (ks_sweep)")
    p_sim.add_argument("--keep-pvalues", action="store_true",
                       help="also write the retained p-values per method")
    p_sim.add_argument("--out", required=True, help="output directory")
    return parser


def _parse_methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    if not methods:
        raise UsageError("no methods requested")
    for m in methods:
        if m not in CLI_METHODS:
            raise UsageError(
                f"unknown method {m!r}; choose from {', '.join(CLI_METHODS)}"
            )
    return methods


def _parse_rfr(text: str):
    """The --rfr flag is either a constant or a column name."""
    try:
        return float(text), None
    except ValueError:
        return 0.0, text


def _scale_label(args) -> tuple[float, str]:
    if args.annualize:
        if args.periods_per_year <= 0:
            raise UsageError("--periods-per-year must be positive")
        return float(np.sqrt(args.periods_per_year)), "yr^-1/2"
    return 1.0, "period^-1/2"


def _print_table(report, scale: float, unit: str, stream) -> None:
    print(f"selected asset: {report.selected_label}", file=stream)
    print(f"\nSharpe ratios ({unit}):", file=stream)
    for label, value in report.sharpe_by_label:
        print(f"  {label:<16s} {value * scale:8.3f}", file=stream)
    print("\noutcomes:", file=stream)
    header = f"  {'method':<20s} {'statistic':>10s} {'p-value':>10s} " \
             f"{'reject':>7s} {'lower bound':>12s}"
    print(header, file=stream)
    for out in report.outcomes:
        bound = f"{out.lower_bound * scale:12.4f}" if out.lower_bound is not None \
            else f"{'-':>12s}"
        print(f"  {out.method:<20s} {out.statistic:10.4f} {out.p_value:10.4g} "
              f"{str(out.reject):>7s} {bound}", file=stream)


def _cmd_panel(args, compute_bounds: bool) -> int:
    methods = _parse_methods(args.methods)
    if args.rho is not None and any(m in ("conditional", "naive")
                                    for m in methods):
        raise UsageError(
            "--rho cannot be combined with the conditional or naive methods; "
            "they use the full estimated covariance rather than a common rho"
        )
    rfr_constant, rfr_column = _parse_rfr(args.rfr)
    panel = load_panel(
        PanelFile(path=args.panel, date_column=args.date_column,
                  rfr_column=rfr_column),
        periods_per_year=args.periods_per_year,
    )
    alpha = 1.0 - args.level if compute_bounds else args.alpha
    if not 0.0 < alpha < 1.0:
        raise UsageError("confidence level must be in (0, 1)")
    report = evaluate_panel(
        panel,
        methods,
        alpha=alpha,
        null_value=getattr(args, "null_value", 0.0),
        rfr=rfr_constant,
        flavor=args.flavor,
        rho_override=args.rho,
        rho_source=args.rho_source,
        compute_bounds=compute_bounds,
        command="ci" if compute_bounds else "test",
        source_path=args.panel,
    )
    scale, unit = _scale_label(args)
    if args.format == "json":
        print(report_to_json(report))
    else:
        _print_table(report, scale, unit, sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_CONFIG_KEYS = (
    "experiment", "k", "n", "rho", "snr", "law", "df", "replications", "seed",
    "methods", "alpha", "covariance_mode", "workers", "rhos", "grid_n",
    "grid_k", "grid_rho", "keep_pvalues",
)

_SIM_DEFAULTS = {
    "experiment": "null",
    "k": 20,
    "n": 504,
    "rho": 0.0,
    "snr": "zero",
    "law": "gaussian",
    "df": 5.0,
    "replications": 2000,
    "seed": 20180113,
    "methods": "conditional",
    "alpha": 0.05,
    "covariance_mode": "infeasible",
    "workers": 1,
    "rhos": "0,0.3,0.6,0.8",
    "grid_n": "252,1008",
    "grid_k": "20,50",
    "grid_rho": "0,0.7",
    "keep_pvalues": False,
}


def _read_config_file(path: str) -> dict:
    settings = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        settings[key] = value.strip()
    return settings


def _parse_snr(text: str) -> SnrConfig:
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "zero" and len(parts) == 1:
            return SnrConfig.zero()
        if kind in ("all_equal", "one_good", "half_good") and len(parts) == 2:
            return SnrConfig(kind=kind, value=float(parts[1]))
        if kind == "uniform" and len(parts) == 3:
            return SnrConfig.uniform_range(float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise UsageError(f"bad snr specification {text!r}: {exc}") from None
    raise UsageError(f"bad snr specification {text!r}")


def _coerce(key: str, value):
    if isinstance(value, str):
        if key in ("k", "n", "replications", "seed", "workers"):
            return int(value)
        if key in ("rho", "df", "alpha"):
            return float(value)
        if key == "keep_pvalues":
            return value.lower() in ("1", "true", "yes")
    return value


def _sim_settings(args) -> dict:
    settings = dict(_SIM_DEFAULTS)
    if args.config:
        settings.update(_read_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            settings[key] = flag
    settings = {k: _coerce(k, v) for k, v in settings.items()}
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            settings["seed"] = int(env_seed)
        except ValueError:
            raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}")
    return settings


def _build_sim_config(settings: dict) -> SimConfig:
    law = ReturnsLaw(kind=settings["law"], df=float(settings["df"]))
    return SimConfig(
        k=settings["k"],
        n=settings["n"],
        rho=float(settings["rho"]),
        snr=_parse_snr(str(settings["snr"])),
        replications=settings["replications"],
        seed=settings["seed"],
        methods=tuple(_parse_methods(str(settings["methods"]))),
        alpha=float(settings["alpha"]),
        returns_law=law,
        covariance_mode=settings["covariance_mode"],
        workers=settings["workers"],
        retain_pvalues=True,
    )


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(rows)


def _print_delta_table(summary) -> None:
    print("method,q,delta,half_width")
    for m in summary.methods:
        for point in m.delta_curve:
            print(f"{m.method},{point.q:g},{point.delta:.6f},"
                  f"{point.half_width:.6f}")


def _parse_grid(text: str, cast):
    try:
        values = [cast(v) for v in str(text).split(",") if str(v).strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    if not values:
        raise UsageError(f"empty grid {text!r}")
    return values


def _cmd_simulate(args) -> int:
    settings = _sim_settings(args)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc}")

    experiment = settings["experiment"]
    if experiment not in ("null", "power", "rho_sweep", "ks_sweep"):
        raise UsageError(f"unknown experiment {experiment!r}")

    if experiment in ("null", "power"):
        config = _build_sim_config(settings)
        summary = run_null_calibration(config) if experiment == "null" \
            else run_power_study(config)
        _write_csv(out_dir / "summary.csv", summary_csv_rows(summary))
        if settings["keep_pvalues"]:
            for m in summary.methods:
                rows = [["p_value"]] + [[f"{p:.17g}"] for p in m.p_values]
                _write_csv(out_dir / f"pvalues_{m.method}.csv", rows)
        _print_delta_table(summary)
    elif experiment == "rho_sweep":
        config = _build_sim_config(settings)
        rhos = _parse_grid(settings["rhos"], float)
        cells = run_rho_sweep(config, rhos)
        _write_csv(out_dir / "rho_sweep.csv", sweep_csv_rows(cells))
        for cell in cells:
            print(f"{cell.rho:g},{cell.method},{cell.rejection_rate:.6f}")
    else:
        base = _build_sim_config(settings)
        grid = [
            SimConfig(
                k=k, n=n, rho=rho, snr=base.snr,
                replications=base.replications, seed=base.seed,
                methods=base.methods, alpha=base.alpha,
                returns_law=base.returns_law,
                covariance_mode=base.covariance_mode, workers=base.workers,
            )
            for n in _parse_grid(settings["grid_n"], int)
            for k in _parse_grid(settings["grid_k"], int)
            for rho in _parse_grid(settings["grid_rho"], float)
        ]
        cells = run_ks_sweep(grid)
        _write_csv(out_dir / "ks_sweep.csv", ks_csv_rows(cells))
        for cell in cells:
            print(f"{cell.n},{cell.k},{cell.rho:g},{cell.ks_statistic:.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "test":
            return _cmd_panel(args, compute_bounds=False)
        if args.command == "ci":
            return _cmd_panel(args, compute_bounds=True)
        return _cmd_simulate(args)
    except UsageError as exc:
        print(f"maxsr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"maxsr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"maxsr: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
