"""Command-line entry point.

    holosim <experiment> --config <file.json> [--out <path>] [--seed <u64>]
            [--samples <N>]

Experiments: berry-qubit | curvature-map | usb-holonomy | adiabatic-sweep
| noise-study | pancharatnam. Each run writes a CSV table and a JSON
metadata file (resolved config, tool version, elapsed ms, hard checks)
next to it; the exit code is 0 iff every hard check passed, and failed
checks are listed on standard error. Flag overrides win over the config
file and are recorded in the echoed config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .experiments import EXPERIMENTS, apply_samples, resolve_config, run_experiment
from .report import ConfigError

_SAMPLES_TARGET = {
    # which config knob --samples overrides, per experiment
    "berry-qubit": "ladder (replaced by the single value)",
    "curvature-map": "grid.cells (both axes)",
    "usb-holonomy": "ladder (replaced by the single value)",
    "adiabatic-sweep": "reference_samples",
    "noise-study": "samples",
    "pancharatnam": "(no effect)",
}

_COLUMNS = {
    "berry-qubit": "samples, phase, oracle_phase, abs_error",
    "curvature-map": "theta, phi, curvature, area_normalized, plaquette_edge, flagged",
    "usb-holonomy": (
        "samples, eta_dtheta_form, eta_line_form, distance_to_closed_form, "
        "unitarity_defect, eta_from_matrix"
    ),
    "adiabatic-sweep": "ramp_time, steps, distance_to_wilson, leakage",
    "noise-study": (
        "amplitude, mean_projected_shift, std_projected_shift, mean_raw_shift, "
        "std_raw_shift, discarded"
    ),
    "pancharatnam": "states, phase, solid_angle, half_area_cross_check, abs_diff",
}


def build_parser() -> argparse.ArgumentParser:
    schema_lines = "\n".join(f"  {k}: {v}" for k, v in _COLUMNS.items())
    parser = argparse.ArgumentParser(
        prog="holosim",
        description=(
            "Geometric-phase and holonomy experiments with oracle cross-checks. "
            "Reports are CSV tables (schema fixed per experiment, see "
            "docs/formats.md) plus JSON metadata."
        ),
        epilog="CSV columns per experiment:\n" + schema_lines,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"holosim {__version__}")
    parser.add_argument(
        "experiment",
        choices=EXPERIMENTS,
        help="which experiment to run",
    )
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON config file; missing fields fall back to built-in defaults",
    )
    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help="output CSV path (metadata goes to the same stem with .json); "
        "default <experiment>.csv in the working directory",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="override the noise seed (noise-study; recorded in the config echo)",
    )
    parser.add_argument(
        "--samples",
        type=int,
        default=None,
        help="override the experiment's main resolution knob: "
        + "; ".join(f"{k}: {v}" for k, v in _SAMPLES_TARGET.items()),
    )
    return parser


def _apply_overrides(experiment: str, config: dict, args) -> dict:
    overrides = {}
    if args.seed is not None:
        if experiment != "noise-study":
            raise ConfigError("--seed only applies to the noise-study experiment")
        config.setdefault("noise", {})
        config["noise"]["seed"] = int(args.seed)
        overrides["seed"] = int(args.seed)
    if args.samples is not None:
        n = int(args.samples)
        apply_samples(experiment, config, n)
        overrides["samples"] = n
    if overrides:
        config["flag_overrides"] = overrides
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    user_config: dict = {}
    if args.config is not None:
        try:
            user_config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            print(f"error: config file not found: {args.config}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
            return 2
        if not isinstance(user_config, dict):
            print("error: config root must be a JSON object", file=sys.stderr)
            return 2
    declared = user_config.get("experiment")
    if declared is not None and declared != args.experiment:
        print(
            f"error: config.experiment '{declared}' does not match the requested "
            f"experiment '{args.experiment}'",
            file=sys.stderr,
        )
        return 2

    flag_overrides = user_config.pop("flag_overrides", None)
    if flag_overrides is not None:
        print("error: config.flag_overrides is reserved for the flag echo", file=sys.stderr)
        return 2

    try:
        config = resolve_config(args.experiment, user_config)
        config = _apply_overrides(args.experiment, config, args)
        report = run_experiment(args.experiment, _strip_meta(config))
        if "flag_overrides" in config:
            report.config["flag_overrides"] = config["flag_overrides"]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = args.out if args.out is not None else Path(f"{args.experiment}.csv")
    if out.suffix != ".csv":
        out = out.with_suffix(".csv")
    csv_path, meta_path = report.write(out)
    print(f"wrote {csv_path} and {meta_path}")

    failed = report.failed_checks()
    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        print(f"  [{status}] {check.name}: value={check.value!r} bound {check.bound}")
    if failed:
        print(
            f"{len(failed)} hard check(s) failed: "
            + ", ".join(c.name for c in failed),
            file=sys.stderr,
        )
        return 1
    return 0


def _strip_meta(config: dict) -> dict:
    cfg = dict(config)
    cfg.pop("flag_overrides", None)
    return cfg


if __name__ == "__main__":
    raise SystemExit(main())
