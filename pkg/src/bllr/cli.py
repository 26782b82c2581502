"""Command-line front end: theory tables, simulation sweeps, pandemic monitor.

Subcommands
-----------
theory     closed-form (and optionally Fredholm) performance rows over a
           range grid
simulate   Monte Carlo operational-characteristic sweep for one method
oc         simulate with both methods (bllr and lms)
covid      growth-rate monitor over a daily-positives CSV

Every output file embeds the exact resolved configuration (as ``#``
header comments in CSV, as a ``config`` object in JSON), and simulation
outputs ship with a manifest carrying the seed and a content hash, so any
table is regenerable from the file alone. Seeds are mandatory for
simulation: there is no wall-clock default.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import covid as covid_mod
from . import montecarlo, theory
from .detectors import BllrConfig, DetectorConfig, LmsConfig
from .models import (
    ExponentialPairModel,
    GammaPairModel,
    GaussianShiftModel,
    Model,
)

__all__ = ["main", "parse_model", "resolve_threshold"]


def parse_model(spec: str) -> Model:
    """Parse ``family:key=value,...`` into a model instance."""
    family, _, params_text = spec.partition(":")
    params: dict[str, float] = {}
    if params_text:
        for item in params_text.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"malformed model parameter {item!r} in {spec!r}")
            params[key.strip()] = float(value)
    family = family.strip().lower()
    try:
        if family == "gaussian":
            return GaussianShiftModel(
                mean_shift=params.pop("m", 0.5), sigma=params.pop("sigma", 1.0), **params
            )
        if family == "gamma":
            return GammaPairModel(
                kappa=params.pop("kappa", 10.0),
                theta=params.pop("theta", 1.0),
                rho=params.pop("rho", 1.0),
                **params,
            )
        if family == "exponential":
            return ExponentialPairModel(
                eta0=params.pop("eta0", 1.0), eta1=params.pop("eta1", 1.5), **params
            )
    except TypeError as exc:
        raise ValueError(f"bad parameters for model {spec!r}: {exc}") from None
    raise ValueError(f"unknown model family {family!r} (gaussian, gamma, exponential)")


def resolve_threshold(rule: str, lower: float, upper: float) -> float:
    """Resolve `zero`, `midpoint` or an explicit value against the interval
    [lower, upper] of the statistic's typical values."""
    if rule == "zero":
        return 0.0
    if rule == "midpoint":
        mid = 0.5 * (upper + lower)
        return mid if math.isfinite(mid) else 0.0
    return float(rule)


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"malformed numeric list {text!r}") from None
    if not values:
        raise ValueError(f"empty numeric list {text!r}")
    return values


def _config_hash(payload: dict, extra_files: Sequence[Path] = ()) -> str:
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
    for path in extra_files:
        digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_table(
    out: Path,
    fmt: str,
    header: list[str],
    rows: list[dict],
    config: dict,
) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        out.write_text(json.dumps({"config": config, "rows": rows}, indent=2) + "\n")
        return
    with out.open("w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        writer = csv.DictWriter(handle, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in header})


def _write_manifest(out: Path, config: dict, failures: list, extra_files=()) -> None:
    manifest = {
        "config": config,
        "content_hash": _config_hash(config, extra_files),
        "failures": failures,
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _cmd_theory(args: argparse.Namespace) -> int:
    model = parse_model(args.model)
    kl = model.kl_divergences()
    d_eff = 2.0 * kl.d10 * kl.d01 / (kl.d10 + kl.d01)
    rows: list[dict] = []
    failures: list[dict] = []
    for r in args.range_grid:
        if r <= 0:
            raise ValueError(f"range values must be > 0, got {r!r}")
        exact = theory.bllr_midpoint_performance(r, d_eff)
        rows.append(
            {
                "method": "bllr",
                "parameter": r,
                "rate": exact.rate,
                "delay": exact.delay,
                "provenance": exact.provenance,
                "status": "ok",
            }
        )
        rows.append(
            {
                "method": "bllr",
                "parameter": r,
                "rate": theory.oc_large_r(d_eff, r / d_eff),
                "delay": r / d_eff,
                "provenance": "theory-large-R",
                "status": "ok",
            }
        )
        if args.fredholm:
            mu = (kl.d10 + kl.d01) / r
            try:
                lms = theory.lms_performance(model, mu, seed=args.seed)
                rows.append(
                    {
                        "method": "lms",
                        "parameter": mu,
                        "rate": lms.rate,
                        "delay": lms.delay,
                        "provenance": lms.provenance,
                        "status": "ok",
                    }
                )
            except (theory.FredholmDivergenceError, theory.DomainTruncationError) as exc:
                status = f"{type(exc).__name__}: {exc}"
                rows.append(
                    {
                        "method": "lms",
                        "parameter": mu,
                        "rate": "",
                        "delay": "",
                        "provenance": "numerical-fredholm",
                        "status": status,
                    }
                )
                failures.append({"parameter": mu, "error": status})
    config = {
        "subcommand": "theory",
        "model": args.model,
        "range_grid": list(args.range_grid),
        "fredholm": args.fredholm,
        "seed": args.seed,
        "format": args.format,
    }
    _write_table(
        Path(args.out),
        args.format,
        ["method", "parameter", "rate", "delay", "provenance", "status"],
        rows,
        config,
    )
    return 0 if not failures else 3


def _sweep_methods(args: argparse.Namespace) -> list[str]:
    if args.command == "oc":
        return ["bllr", "lms"]
    return [args.method]


def _cmd_simulate(args: argparse.Namespace) -> int:
    model = parse_model(args.model)
    kl = model.kl_divergences()
    spec = montecarlo.SweepSpec(
        grid=args.mu, runs=args.runs, seed=args.seed, step_cap=args.cap
    )
    barriers = args.barriers
    exit_code = 0
    out = Path(args.out)
    for method in _sweep_methods(args):
        config_builder: Callable[[float], DetectorConfig] | None = None
        if method == "bllr" and barriers is not None:
            a, b = barriers

            def config_builder(mu: float, a=a, b=b) -> DetectorConfig:
                return BllrConfig(a, b, resolve_threshold(args.threshold, -a, b))

        elif args.threshold != "midpoint":
            if method == "lms":

                def config_builder(mu: float) -> DetectorConfig:
                    return LmsConfig(mu, resolve_threshold(args.threshold, -kl.d01, kl.d10))

            else:

                def config_builder(mu: float) -> DetectorConfig:
                    if math.isclose(kl.d10, kl.d01, rel_tol=1e-12):
                        a = b = kl.d10 / mu
                    else:
                        a, b = kl.d01 / mu, kl.d10 / mu
                    return BllrConfig(a, b, resolve_threshold(args.threshold, -a, b))

        curve = montecarlo.oc_sweep(
            spec, method, model, threads=args.threads, config_builder=config_builder
        )
        config = {
            "subcommand": args.command,
            "method": method,
            "model": args.model,
            "mu": list(args.mu),
            "barriers": list(barriers) if barriers else None,
            "threshold": args.threshold,
            "runs": args.runs,
            "seed": args.seed,
            "cap": args.cap,
            "format": args.format,
        }
        target = out if len(_sweep_methods(args)) == 1 else out.with_name(
            f"{out.stem}_{method}{out.suffix}"
        )
        _write_table(
            target,
            args.format,
            ["parameter", "delta", "rate", "provenance", "censored_fraction"],
            curve.to_rows(),
            config,
        )
        _write_manifest(target, config, [list(f) for f in curve.failures])
        if curve.failures:
            for parameter, reason in curve.failures:
                print(f"point {parameter} failed: {reason}", file=sys.stderr)
            exit_code = 3
    return exit_code


def _cmd_covid(args: argparse.Namespace) -> int:
    input_path = Path(args.input) if args.input else covid_mod.italy_fixture_path()
    series = covid_mod.load_daily_positives(input_path, forward_fill=args.forward_fill)
    smoothed = covid_mod.moving_mean(series)
    rates = covid_mod.growth_rates(smoothed)
    if args.estimate_sigma:
        sigma = covid_mod.estimate_sigma(rates)
    elif args.sigma is not None:
        sigma = args.sigma
    else:
        raise ValueError("provide --sigma VALUE or --estimate-sigma")
    a, b = args.barriers if args.barriers else (5.0, 5.0)
    threshold = resolve_threshold(args.threshold, -a, b)
    report = covid_mod.run_pandemic_monitor(
        rates,
        sigma,
        BllrConfig(a, b, threshold),
        LmsConfig(args.mu_single, threshold),
    )
    config = {
        "subcommand": "covid",
        "input": str(input_path),
        "sigma": sigma,
        "estimated": bool(args.estimate_sigma),
        "lower_barrier": a,
        "upper_barrier": b,
        "step_size": args.mu_single,
        "threshold": threshold,
    }
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    daily = Path(f"{prefix}_daily.csv")
    cross = Path(f"{prefix}_crossings.csv")
    report_path = Path(f"{prefix}_report.json")
    _write_table(
        daily,
        "csv",
        ["date", "bllr", "lms", "bllr_decision", "lms_decision"],
        report.daily_rows(),
        config,
    )
    _write_table(cross, "csv", ["date", "direction", "method"], report.crossing_rows(), config)
    report_path.write_text(
        json.dumps({"config": config, **report.to_dict()}, indent=2) + "\n"
    )
    _write_manifest(report_path, config, [], extra_files=[input_path])
    print(f"sigma={sigma:.4f} a={a} b={b} mu={args.mu_single} threshold={threshold}")
    for row in report.crossing_rows():
        print(f"{row['method']}: {row['direction']} on {row['date']}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with defaults for any flag")
    parser.add_argument("--out", help="output path (or path prefix for covid)")
    parser.add_argument(
        "--format", choices=["csv", "json"], default=None, help="table format (default csv)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bllr",
        description="Sequential decision algorithms (BLLR, LMS, Page) and their performance",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_theory = sub.add_parser("theory", help="closed-form performance rows")
    _add_common(p_theory)
    p_theory.add_argument("--model", default=None)
    p_theory.add_argument("--range", dest="range_grid", default=None, help="comma list of R")
    p_theory.add_argument(
        "--fredholm", action="store_true", help="add numerical-fredholm LMS rows"
    )
    p_theory.add_argument("--seed", type=int, default=0, help="seed for the Fredholm pilot")

    for name, help_text in (
        ("simulate", "Monte Carlo sweep for one method"),
        ("oc", "Monte Carlo sweep for both methods"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--model", default=None)
        p.add_argument("--method", choices=["bllr", "lms"], default=None)
        p.add_argument("--mu", default=None, help="comma list of step sizes")
        p.add_argument("--barriers", default=None, help="a,b (fixed barriers for bllr)")
        p.add_argument("--threshold", default=None, help="zero | midpoint | value")
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="mandatory; no wall-clock default")
        p.add_argument("--cap", type=int, default=None, help="step cap per run")
        p.add_argument("--threads", type=int, default=None)

    p_covid = sub.add_parser("covid", help="pandemic growth-rate monitor")
    _add_common(p_covid)
    p_covid.add_argument("--input", default=None, help="daily positives CSV (default: fixture)")
    p_covid.add_argument("--sigma", type=float, default=None)
    p_covid.add_argument("--estimate-sigma", action="store_true", dest="estimate_sigma")
    p_covid.add_argument("--barriers", default=None, help="a,b (default 5,5)")
    p_covid.add_argument("--mu", dest="mu_single", type=float, default=None)
    p_covid.add_argument("--threshold", default=None, help="zero | midpoint | value")
    p_covid.add_argument("--forward-fill", action="store_true", dest="forward_fill")
    return parser


_DEFAULTS = {
    "model": "gaussian:m=0.5,sigma=1",
    "format": "csv",
    "method": "bllr",
    "threshold": "midpoint",
    "runs": 1000,
    "cap": montecarlo.DEFAULT_STEP_CAP,
    "mu_single": 0.05,
    "range_grid": "5,10",
}


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from --config file values, then from defaults; flags win."""
    file_values: dict = {}
    if getattr(args, "config", None):
        file_values = json.loads(Path(args.config).read_text())
        if not isinstance(file_values, dict):
            raise ValueError(f"{args.config}: config file must hold a JSON object")
    for key, value in vars(args).items():
        if value in (None, False) and key in file_values:
            setattr(args, key, file_values[key])
    # covid threshold defaults to zero (sign of the statistic)
    if args.command == "covid" and getattr(args, "threshold", None) is None:
        args.threshold = "zero"
    for key, value in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)
    return args


def _postprocess(args: argparse.Namespace) -> argparse.Namespace:
    if hasattr(args, "range_grid") and isinstance(args.range_grid, str):
        args.range_grid = _parse_grid(args.range_grid)
    if hasattr(args, "mu") and isinstance(args.mu, str):
        args.mu = _parse_grid(args.mu)
    if getattr(args, "barriers", None) is not None and isinstance(args.barriers, str):
        pair = _parse_grid(args.barriers)
        if len(pair) != 2:
            raise ValueError(f"--barriers needs exactly two values, got {args.barriers!r}")
        args.barriers = pair
    if hasattr(args, "threads") and args.threads is None:
        args.threads = os.cpu_count() or 1
    return args


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _postprocess(_merge_config(args))
        if args.command in ("simulate", "oc"):
            if args.seed is None:
                parser.error("--seed is required for simulation subcommands")
            if args.mu is None:
                parser.error("--mu grid is required for simulation subcommands")
            if args.out is None:
                parser.error("--out is required")
            return _cmd_simulate(args)
        if args.command == "theory":
            if args.out is None:
                parser.error("--out is required")
            return _cmd_theory(args)
        if args.command == "covid":
            if args.out is None:
                parser.error("--out is required")
            return _cmd_covid(args)
        parser.error(f"unknown command {args.command!r}")
    except (ValueError, OSError, covid_mod.SeriesSchemaError, covid_mod.SeriesDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
