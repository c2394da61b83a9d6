"""Command-line front end.

Subcommands: shift, scan, fit, sensitivity, align-report, selftest.
Units on every flag follow the lab conventions: frequencies in Hz, angles
in degrees, lengths in um, powers in mW, delays in us.

Exit codes: 0 success, 1 selftest failure, 2 input/config error, 3 engine
resonance error, 4 fit non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config_file
from .engine import TWO_PI, differential_shift, shift_components
from .errors import ConfigError, FitError, ResonanceError
from .fitting import (
    FitResult,
    alignment_report,
    fit_beam_profile,
    fit_frequency,
    fit_hwp_scan,
    fit_power_law,
    sensitivity_analysis,
)
from .selftest import run_selftest
from .simulate import (
    ScanDataset,
    simulate_hwp_scan,
    simulate_position_scan,
    simulate_power_scan,
    simulate_rabi_scan,
    simulate_ramsey,
)

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_INPUT = 2
EXIT_ENGINE = 3
EXIT_FIT = 4

SEED_ENV_VAR = "IONPROBE_SEED"


def _resolve_seed(flag_value):
    """Seed precedence: --seed flag, then IONPROBE_SEED, then the config."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return None


def _load_config_with_overrides(args) -> ExperimentConfig:
    config = load_config_file(args.config)
    overrides = {}
    for key in ("hwp_deg", "qwp_deg", "alpha_deg", "beta_deg", "power_mw"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "residual_hz_per_mw", None) is not None:
        overrides["residual_two_photon_hz_per_mw"] = args.residual_hz_per_mw
    return config.replace(**overrides) if overrides else config


def _add_config_overrides(parser, power=True):
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--hwp-deg", type=float, help="override HWP angle")
    parser.add_argument("--qwp-deg", type=float, help="override QWP angle")
    parser.add_argument("--alpha-deg", type=float, help="override field polar angle")
    parser.add_argument("--beta-deg", type=float, help="override field azimuthal angle")
    if power:
        parser.add_argument("--power-mw", type=float, help="override beam power (all beams)")
    parser.add_argument(
        "--residual-hz-per-mw", type=float, dest="residual_hz_per_mw",
        help="override the residual two-photon coefficient",
    )


def _plot_path(requested, out_path, default_stem: str):
    if requested is None:
        return None
    if isinstance(requested, str):
        return Path(requested)
    if out_path is not None:
        return Path(out_path).with_suffix(".png")
    return Path(f"{default_stem}.png")


def cmd_shift(args) -> int:
    config = _load_config_with_overrides(args)
    delta_omega = differential_shift(config, args.beam)
    payload = {
        "delta_omega_rad_s": delta_omega,
        "delta_f_hz": delta_omega / TWO_PI,
        "components": shift_components(config, args.beam),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def _scan_grid(args) -> np.ndarray:
    if args.points < 2:
        raise ConfigError("--points must be at least 2")
    if not args.to > args.start:
        raise ConfigError("--to must be greater than --from")
    return np.linspace(args.start, args.to, args.points)


def cmd_scan(args) -> int:
    config = _load_config_with_overrides(args)
    seed = _resolve_seed(args.seed)
    grid = _scan_grid(args)
    kind = args.kind
    if kind == "ramsey":
        dataset = simulate_ramsey(config, grid * 1e-6, args.beam, seed=seed)
    elif kind == "power":
        dataset = simulate_power_scan(config, grid, args.beam, fast=args.fast, seed=seed)
    elif kind == "hwp":
        dataset = simulate_hwp_scan(config, np.radians(grid), args.beam, fast=args.fast, seed=seed)
    elif kind == "position":
        dataset = simulate_position_scan(config, args.beam, grid, fast=args.fast, seed=seed)
    else:  # rabi
        dataset = simulate_rabi_scan(config, grid, args.peak_rabi_hz)
    out = Path(args.out) if args.out else Path(f"scan_{kind}.csv")
    dataset.to_csv(out)
    print(f"wrote {out} ({len(dataset)} points)")
    plot = _plot_path(args.plot, out, f"scan_{kind}")
    if plot is not None:
        from .plots import save_scan_figure

        save_scan_figure(dataset, plot)
        print(f"wrote {plot}")
    return EXIT_OK


def _parse_fixed(text: str | None) -> dict:
    fixed = {}
    if not text:
        return fixed
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"--fixed entries look like name=value, got {item!r}")
        name, value = item.split("=", 1)
        try:
            fixed[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--fixed value for {name!r} must be a number") from None
    return fixed


def _model_curve(kind: str, dataset: ScanDataset, fit: FitResult, args, n: int = 300):
    x = np.linspace(dataset.x.min(), dataset.x.max(), n)
    p = fit.params
    if kind == "frequency":
        return p["offset"] + 0.5 * p["contrast"] * np.cos(
            TWO_PI * p["freq_hz"] * x + p["phase_rad"]
        )
    if kind == "power":
        return p["a_hz_per_mw2"] * x**2 + p["b_hz_per_mw"] * x
    if kind == "profile":
        projection = math.radians(args.projection_deg) if args.projection_deg else None
        if projection is None:
            from .fitting import _projection_from_metadata

            projection = _projection_from_metadata(dataset)
        w_axis = p["waist_um"] / math.sin(projection)
        return p["peak_hz"] * np.exp(-4.0 * (x - p["center_um"]) ** 2 / w_axis**2)
    # hwp
    from .config import config_from_dict
    from .engine import ShiftKernel

    if "config" not in dataset.metadata:
        raise ConfigError("cannot render the hwp model: CSV metadata lacks a config")
    cfg = config_from_dict(dataset.metadata["config"])
    kernel = ShiftKernel(cfg.ion, cfg.comb, cfg.envelope_truncation)
    shape = kernel.differential_angles(
        math.radians(p["alpha_deg"]),
        math.radians(p["beta_deg"]),
        np.radians(x),
        math.radians(p["phi_deg"]),
        1.0,
    )
    return p["omega0_sq"] * shape / TWO_PI


FIT_KIND_TO_SCAN = {"frequency": "ramsey", "power": "power", "hwp": "hwp", "profile": "position"}


def cmd_fit(args) -> int:
    kind = args.kind
    dataset = ScanDataset.from_csv(args.input, kind=FIT_KIND_TO_SCAN[kind])
    if kind == "frequency":
        fit = fit_frequency(dataset)
    elif kind == "power":
        fit = fit_power_law(dataset)
    elif kind == "profile":
        projection = math.radians(args.projection_deg) if args.projection_deg else None
        fit = fit_beam_profile(dataset, projection_rad=projection)
    else:
        fixed = _parse_fixed(args.fixed)
        config = load_config_file(args.fit_config) if args.fit_config else None
        fit = fit_hwp_scan(dataset, config=config, fixed=fixed)
    text = fit.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    plot = _plot_path(args.plot, args.out, f"fit_{kind}")
    if plot is not None:
        from .plots import save_fit_figure

        save_fit_figure(dataset, fit, np.asarray(_model_curve(kind, dataset, fit, args)), plot)
        print(f"wrote {plot}")
    return EXIT_OK if fit.converged else EXIT_FIT


def cmd_sensitivity(args) -> int:
    if args.waist_um <= 0:
        raise ConfigError("--waist-um must be positive")
    if args.d_max <= 0:
        raise ConfigError("--d-max must be positive")
    grid = np.linspace(0.0, args.d_max, args.points)
    curve = sensitivity_analysis(args.waist_um, math.radians(args.projection_deg), grid)
    out = Path(args.out) if args.out else Path("sensitivity.csv")
    curve.to_csv(out)
    print(f"wrote {out} ({grid.size} points)")
    plot = _plot_path(args.plot, out, "sensitivity")
    if plot is not None:
        from .plots import save_sensitivity_figure

        save_sensitivity_figure(curve, plot)
        print(f"wrote {plot}")
    return EXIT_OK


def cmd_align_report(args) -> int:
    fits = []
    for path in args.fits:
        with open(path, "r", encoding="utf-8") as fh:
            fits.append(FitResult.from_dict(json.load(fh)))
    report = alignment_report(fits, args.ion_position_um)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    ok = run_selftest(corrupt=args.corrupt)
    return EXIT_OK if ok else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionprobe",
        description="Four-photon light-shift modeling, scan simulation, and calibration fits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_shift = sub.add_parser("shift", help="differential shift for the configured geometry")
    _add_config_overrides(p_shift)
    p_shift.add_argument("--beam", type=int, default=0, help="beam index")
    p_shift.set_defaults(func=cmd_shift)

    p_scan = sub.add_parser("scan", help="simulate a calibration scan to CSV")
    p_scan.add_argument("kind", choices=["ramsey", "power", "hwp", "position", "rabi"])
    _add_config_overrides(p_scan)
    p_scan.add_argument("--from", dest="start", type=float, required=True,
                        help="scan start (us / mW / deg / um by kind)")
    p_scan.add_argument("--to", dest="to", type=float, required=True, help="scan end")
    p_scan.add_argument("--points", type=int, default=25)
    p_scan.add_argument("--beam", type=int, default=0)
    p_scan.add_argument("--seed", type=int, help=f"RNG seed (falls back to ${SEED_ENV_VAR})")
    p_scan.add_argument("--fast", action="store_true",
                        help="skip per-point Ramsey sampling; draw equivalent Gaussian noise")
    p_scan.add_argument("--peak-rabi-hz", type=float, default=270e3,
                        help="aligned-beam Rabi frequency for rabi scans")
    p_scan.add_argument("--out", help="output CSV path (default scan_<kind>.csv)")
    p_scan.add_argument("--plot", nargs="?", const=True, metavar="PNG",
                        help="also render a figure (default: CSV path with .png)")
    p_scan.set_defaults(func=cmd_scan)

    p_fit = sub.add_parser("fit", help="fit a scan CSV and emit a JSON report")
    p_fit.add_argument("kind", choices=["frequency", "power", "hwp", "profile"])
    p_fit.add_argument("--input", required=True, help="scan CSV")
    p_fit.add_argument("--out", help="output JSON path (default: stdout)")
    p_fit.add_argument("--fixed", help="pin parameters, e.g. beta_deg=0,phi_deg=0")
    p_fit.add_argument("--config", dest="fit_config",
                       help="config for the hwp model (default: CSV metadata)")
    p_fit.add_argument("--projection-deg", type=float,
                       help="beam-to-axis angle for profile fits (default: CSV metadata)")
    p_fit.add_argument("--plot", nargs="?", const=True, metavar="PNG",
                       help="also render data plus fitted model")
    p_fit.set_defaults(func=cmd_fit)

    p_sens = sub.add_parser("sensitivity", help="misalignment sensitivity comparison to CSV")
    p_sens.add_argument("--waist-um", type=float, required=True)
    p_sens.add_argument("--projection-deg", type=float, default=45.0)
    p_sens.add_argument("--d-max", type=float, required=True, help="largest misalignment (um)")
    p_sens.add_argument("--points", type=int, default=81)
    p_sens.add_argument("--out", help="output CSV path (default sensitivity.csv)")
    p_sens.add_argument("--plot", nargs="?", const=True, metavar="PNG")
    p_sens.set_defaults(func=cmd_sensitivity)

    p_align = sub.add_parser("align-report", help="summarize beam offsets from profile fits")
    p_align.add_argument("--fits", nargs="+", required=True, help="profile-fit JSON files")
    p_align.add_argument("--ion-position-um", type=float, default=0.0)
    p_align.add_argument("--out", help="output JSON path (default: stdout)")
    p_align.set_defaults(func=cmd_align_report)

    p_self = sub.add_parser("selftest", help="run the built-in consistency suite")
    p_self.add_argument("--corrupt", help=argparse.SUPPRESS)
    p_self.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResonanceError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
