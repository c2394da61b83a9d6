"""Least-squares fitters that invert scan datasets to physical parameters.

All nonlinear fits go through damped least squares (Levenberg-Marquardt via
scipy), with parameter convergence at 1e-12 and an evaluation budget
equivalent to 200 iterations.  Quoted uncertainties come from the diagonal
of the inverse curvature at the optimum, scaled by the reduced residual
variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .config import ExperimentConfig, config_from_dict
from .engine import ShiftKernel
from .errors import ConfigError, FitError
from .simulate import ScanDataset

TWO_PI = 2.0 * math.pi

ALIGNMENT_FLAG_THRESHOLD_UM = 1.0


@dataclass
class FitResult:
    """Named parameter estimates with 1-sigma uncertainties."""

    params: dict
    sigmas: dict
    residual_rms: float
    converged: bool
    iterations: int
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "sigmas": dict(self.sigmas),
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
            "warnings": list(self.warnings),
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        try:
            return cls(
                params=dict(doc["params"]),
                sigmas=dict(doc["sigmas"]),
                residual_rms=float(doc["residual_rms"]),
                converged=bool(doc["converged"]),
                iterations=int(doc["iterations"]),
                warnings=list(doc.get("warnings", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed fit report: {exc}") from exc


@dataclass
class SensitivityCurve:
    """Fractional signal loss versus single-beam misalignment d, for the
    geometric-mean Rabi signal and the intensity-squared shift signal."""

    d_um: np.ndarray
    f_rabi: np.ndarray
    f_stark: np.ndarray
    ratio: np.ndarray

    def to_csv_text(self) -> str:
        lines = ["d_um,f_rabi,f_stark,ratio"]
        for row in zip(self.d_um, self.f_rabi, self.f_stark, self.ratio):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text())


def _weights(dataset: ScanDataset) -> np.ndarray:
    if np.all(dataset.sigma_y > 0):
        return 1.0 / dataset.sigma_y
    return np.ones_like(dataset.y)


def _run_lm(residual_fn, p0, x_scale=None):
    p0 = np.asarray(p0, dtype=float)
    result = least_squares(
        residual_fn,
        p0,
        method="lm",
        xtol=1e-12,
        ftol=1e-12,
        gtol=1e-12,
        max_nfev=200 * (p0.size + 1),
        x_scale=x_scale if x_scale is not None else np.maximum(np.abs(p0), 1e-12),
    )
    if result.success and not np.all(np.isfinite(result.x)):
        raise FitError("fit produced non-finite parameters")
    return result


def _param_sigmas(result, n_data: int) -> np.ndarray:
    n_par = result.x.size
    jtj = result.jac.T @ result.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    dof = max(n_data - n_par, 1)
    scale = 2.0 * result.cost / dof
    return np.sqrt(np.maximum(np.diag(cov) * scale, 0.0))


def _raw_rms(y: np.ndarray, model: np.ndarray) -> float:
    return float(np.sqrt(np.mean((y - model) ** 2)))


def _dominant_frequency(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Initial (freq, amplitude, phase) from the discrete spectrum of the
    mean-subtracted data, with parabolic refinement of the peak bin."""
    dt = float(np.median(np.diff(t)))
    centered = y - np.mean(y)
    n_pad = 8 * len(y)
    spectrum = np.fft.rfft(centered, n=n_pad)
    freqs = np.fft.rfftfreq(n_pad, d=dt)
    mags = np.abs(spectrum)
    mags[0] = 0.0
    peak = int(np.argmax(mags))
    if mags[peak] <= 1e-12 * (abs(float(np.mean(y))) + 1.0) * len(y):
        raise FitError("no fringe detected (flat or constant data)")
    if 1 <= peak < len(mags) - 1:
        a, b, c = mags[peak - 1], mags[peak], mags[peak + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        f0 = freqs[peak] + shift * (freqs[1] - freqs[0])
    else:
        f0 = freqs[peak]
    amp0 = 2.0 * mags[peak] / len(y)
    phase0 = float(np.angle(spectrum[peak]))
    return float(f0), float(amp0), phase0


def fit_frequency(dataset: ScanDataset) -> FitResult:
    """Sinusoid fit to a Ramsey fringe: y = offset + (C/2) cos(2 pi f t + phase).

    Needs at least 8 points spanning one fringe.  Returns freq_hz,
    phase_rad, contrast, offset.
    """
    t, y = dataset.x, dataset.y
    if len(y) < 8:
        raise FitError("frequency fit needs at least 8 points")
    span = float(t.max() - t.min())
    if span <= 0:
        raise FitError("frequency fit needs a nonzero time span")
    f0, amp0, phase0 = _dominant_frequency(t, y)
    if f0 * span < 0.5:
        raise FitError("data span less than one fringe of the dominant frequency")
    w = _weights(dataset)

    def residuals(p):
        freq, amp, phase, offset = p
        return w * (offset + amp * np.cos(TWO_PI * freq * t + phase) - y)

    result = _run_lm(
        residuals,
        [f0, amp0, phase0, float(np.mean(y))],
        x_scale=[max(f0, 1.0 / span), max(amp0, 1e-3), 1.0, 1.0],
    )
    if not result.success:
        raise FitError(f"frequency fit did not converge: {result.message}")
    freq, amp, phase, offset = result.x
    sig = _param_sigmas(result, len(y))
    if amp < 0:
        amp, phase = -amp, phase + math.pi
    if freq < 0:
        freq, phase = -freq, -phase
    phase = math.remainder(phase, TWO_PI)
    model = offset + amp * np.cos(TWO_PI * freq * t + phase)
    return FitResult(
        params={
            "freq_hz": float(freq),
            "phase_rad": float(phase),
            "contrast": float(2 * amp),
            "offset": float(offset),
        },
        sigmas={
            "freq_hz": float(sig[0]),
            "phase_rad": float(sig[2]),
            "contrast": float(2 * sig[1]),
            "offset": float(sig[3]),
        },
        residual_rms=_raw_rms(y, model),
        converged=True,
        iterations=int(result.nfev),
    )


def fit_power_law(dataset: ScanDataset) -> FitResult:
    """Exact linear least squares of y = a P^2 + b P on a power scan.

    The linear term absorbs any residual two-photon contribution.
    """
    p, y = dataset.x, dataset.y
    if len(np.unique(p)) < 2:
        raise FitError("power-law fit is rank deficient (fewer than 2 distinct powers)")
    if len(np.unique(p)) < 4:
        raise FitError("power-law fit needs at least 4 distinct powers")
    w = _weights(dataset)
    design = np.column_stack([p**2, p]) * w[:, None]
    target = y * w
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < 2:
        raise FitError("power-law fit is rank deficient (fewer than 2 distinct powers)")
    model = coef[0] * p**2 + coef[1] * p
    dof = max(len(y) - 2, 1)
    chi2 = float(np.sum((w * (y - model)) ** 2))
    cov = np.linalg.inv(design.T @ design) * (chi2 / dof)
    sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(
        params={"a_hz_per_mw2": float(coef[0]), "b_hz_per_mw": float(coef[1])},
        sigmas={"a_hz_per_mw2": float(sig[0]), "b_hz_per_mw": float(sig[1])},
        residual_rms=_raw_rms(y, model),
        converged=True,
        iterations=1,
    )


def fit_beam_profile(dataset: ScanDataset, projection_rad: float | None = None) -> FitResult:
    """Squared-Gaussian fit to a position scan:
    y = peak * exp(-4 (x - c)^2 / w_axis^2).

    Reports the beam-frame waist w0 = w_axis * sin(projection); the
    projection angle comes from the argument, the dataset metadata, or
    defaults to 45 degrees.
    """
    x, y = dataset.x, dataset.y
    if len(y) < 7:
        raise FitError("profile fit needs at least 7 positions")
    if projection_rad is None:
        projection_rad = _projection_from_metadata(dataset)
    yabs = np.abs(y)
    if float(yabs.max()) == 0.0:
        raise FitError("profile fit is degenerate (all-zero signal)")
    i_peak = int(np.argmax(yabs))
    peak0 = float(y[i_peak])
    weight = yabs / yabs.sum()
    c0 = float(np.sum(weight * x))
    var = float(np.sum(weight * (x - c0) ** 2))
    w_axis0 = math.sqrt(8.0 * max(var, 1e-6))
    w = _weights(dataset)

    def residuals(p):
        peak, center, w_axis = p
        return w * (peak * np.exp(-4.0 * (x - center) ** 2 / w_axis**2) - y)

    result = _run_lm(residuals, [peak0, c0, w_axis0])
    if not result.success:
        raise FitError(f"profile fit did not converge: {result.message}")
    peak, center, w_axis = result.x
    w_axis = abs(w_axis)
    sig = _param_sigmas(result, len(y))
    sin_proj = math.sin(projection_rad)
    warnings = []
    if not (x.min() <= center <= x.max()):
        warnings.append("extrapolated: fitted peak lies outside the scanned range")
    model = peak * np.exp(-4.0 * (x - center) ** 2 / w_axis**2)
    return FitResult(
        params={
            "center_um": float(center),
            "waist_um": float(w_axis * sin_proj),
            "peak_hz": float(peak),
        },
        sigmas={
            "center_um": float(sig[1]),
            "waist_um": float(sig[2] * sin_proj),
            "peak_hz": float(sig[0]),
        },
        residual_rms=_raw_rms(y, model),
        converged=True,
        iterations=int(result.nfev),
        warnings=warnings,
    )


def _projection_from_metadata(dataset: ScanDataset) -> float:
    beams = dataset.metadata.get("config", {}).get("beams", [])
    index = dataset.metadata.get("beam_index", 0)
    if isinstance(beams, list) and len(beams) > index:
        return math.radians(beams[index].get("projection_deg", 45.0))
    return math.radians(45.0)


def _config_for_dataset(dataset: ScanDataset, config: ExperimentConfig | None) -> ExperimentConfig:
    if config is not None:
        return config
    doc = dataset.metadata.get("config")
    if not doc:
        raise ConfigError("HWP fit needs a config (none given and none in dataset metadata)")
    return config_from_dict(doc)


HWP_GRID_ALPHA = np.radians(np.linspace(0.0, 20.0, 5))
HWP_GRID_PHI = np.radians(np.linspace(-20.0, 20.0, 5))
HWP_REFINE_STARTS = 5


def fit_hwp_scan(
    dataset: ScanDataset,
    config: ExperimentConfig | None = None,
    fixed: dict | None = None,
) -> FitResult:
    """Fit the full shift model to an HWP-angle scan.

    Free parameters are the field direction (alpha_deg, beta_deg), the QWP
    angle (phi_deg), and an overall amplitude omega0_sq equal to the
    squared effective two-photon rate in (rad/s)^2.  Any of the angles may
    be pinned through `fixed`, e.g. fixed={"beta_deg": 0.0}.

    beta and phi can trade off near alpha = 0, so the fit multi-starts on
    a coarse (alpha, phi) grid and reports the lowest-residual basin.
    """
    if dataset.kind != "hwp":
        raise FitError(f"expected an hwp dataset, got {dataset.kind!r}")
    thetas = np.radians(dataset.x)
    y = dataset.y
    if len(y) < 12:
        raise FitError("HWP fit needs at least 12 angles")
    if dataset.x.max() - dataset.x.min() < 90.0:
        raise FitError("HWP fit needs angles spanning at least 90 degrees")
    if float(np.abs(y).max()) == 0.0:
        raise FitError("HWP fit is degenerate (all-zero signal)")
    fixed = dict(fixed or {})
    unknown = set(fixed) - {"alpha_deg", "beta_deg", "phi_deg"}
    if unknown:
        raise FitError(f"cannot fix unknown parameters: {sorted(unknown)}")

    cfg = _config_for_dataset(dataset, config)
    kernel = ShiftKernel(cfg.ion, cfg.comb, cfg.envelope_truncation)
    w = _weights(dataset)

    def shape_hz(alpha, beta, phi):
        # differential shift in Hz at unit base rate; amplitude scales it
        return kernel.differential_angles(alpha, beta, thetas, phi, 1.0) / TWO_PI

    def profiled_amplitude(shape):
        denom = float(np.sum((w * shape) ** 2))
        if denom == 0.0:
            return 0.0
        return float(np.sum(w * w * shape * y) / denom)

    names = ["alpha_deg", "beta_deg", "phi_deg"]
    free = [n for n in names if n not in fixed]

    def assemble(p):
        angles = {n: math.radians(fixed[n]) for n in fixed}
        for i, n in enumerate(free):
            angles[n] = p[i]
        return angles["alpha_deg"], angles["beta_deg"], angles["phi_deg"], p[len(free)]

    def residuals(p):
        alpha, beta, phi, amp = assemble(p)
        return w * (amp * shape_hz(alpha, beta, phi) - y)

    # Coarse scoring pass over the start grid, then LM from the best few.
    starts = []
    for a0 in HWP_GRID_ALPHA:
        for p0 in HWP_GRID_PHI:
            if "alpha_deg" in fixed:
                a0 = math.radians(fixed["alpha_deg"])
            if "phi_deg" in fixed:
                p0 = math.radians(fixed["phi_deg"])
            b0 = math.radians(fixed.get("beta_deg", 0.0))
            amp0 = profiled_amplitude(shape_hz(a0, b0, p0))
            full = {"alpha_deg": a0, "beta_deg": b0, "phi_deg": p0}
            vector = [full[n] for n in free] + [amp0]
            score = float(np.sum(residuals(np.asarray(vector)) ** 2))
            starts.append((score, vector))
    starts.sort(key=lambda item: item[0])
    seen = set()
    candidates = []
    for score, vec in starts:
        key = tuple(round(v, 6) for v in vec[:-1])
        if key in seen:
            continue
        seen.add(key)
        candidates.append(vec)
        if len(candidates) >= HWP_REFINE_STARTS:
            break

    best = None
    total_nfev = 0
    amp_scale = max(abs(np.asarray([c[-1] for c in candidates])).max(), 1.0)
    for vec in candidates:
        result = _run_lm(residuals, vec, x_scale=[0.2] * len(free) + [amp_scale])
        total_nfev += int(result.nfev)
        if result.success and (best is None or result.cost < best.cost):
            best = result
    if best is None:
        raise FitError("HWP fit did not converge from any start")

    alpha, beta, phi, amp = assemble(best.x)
    sig = _param_sigmas(best, len(y))
    sig_map = dict(zip(free + ["omega0_sq"], sig))
    # Canonical field orientation: alpha in [0, pi), beta in [0, 2 pi).
    if alpha < 0:
        alpha, beta = -alpha, beta + math.pi
    beta = beta % TWO_PI
    phi = math.remainder(phi, math.pi)
    model = amp * shape_hz(alpha, beta, phi)
    params = {
        "alpha_deg": math.degrees(alpha),
        "beta_deg": math.degrees(beta),
        "phi_deg": math.degrees(phi),
        "omega0_sq": float(amp),
    }
    sigmas = {
        "alpha_deg": math.degrees(sig_map.get("alpha_deg", 0.0)),
        "beta_deg": math.degrees(sig_map.get("beta_deg", 0.0)),
        "phi_deg": math.degrees(sig_map.get("phi_deg", 0.0)),
        "omega0_sq": float(sig_map.get("omega0_sq", 0.0)),
    }
    return FitResult(
        params=params,
        sigmas=sigmas,
        residual_rms=_raw_rms(y, model),
        converged=True,
        iterations=total_nfev,
    )


def sensitivity_analysis(waist_um: float, projection_rad: float, d_grid_um) -> SensitivityCurve:
    """Fractional signal change when one beam walks off the ion by d.

    Evaluated at the originally aligned ion position with the axis-projected
    waist w = waist/sin(projection) and u = exp(-d^2/w^2):

        f_rabi  = 1 - u        (geometric-mean Rabi signal)
        f_stark = 1 - u^4      (intensity-squared shift signal)

    so the advantage ratio is 1 + u + u^2 + u^3, exactly 4 at d = 0 and
    monotonically decreasing.
    """
    if waist_um <= 0:
        raise ValueError("waist must be positive")
    d = np.asarray(d_grid_um, dtype=float)
    w_axis = waist_um / math.sin(projection_rad)
    u = np.exp(-(d**2) / w_axis**2)
    return SensitivityCurve(
        d_um=d,
        f_rabi=1.0 - u,
        f_stark=1.0 - u**4,
        ratio=1.0 + u + u**2 + u**3,
    )


def alignment_report(fits: list[FitResult], ion_position_um: float) -> dict:
    """Per-beam alignment offsets from profile fits, flagging beams more
    than 1 um from the ion and recommending the corrective translation."""
    if not fits:
        raise ConfigError("alignment report needs at least one profile fit")
    beams = []
    for i, fit in enumerate(fits):
        if "center_um" not in fit.params:
            raise ConfigError(f"fit {i} is not a beam-profile fit (no center_um)")
        offset = fit.params["center_um"] - ion_position_um
        beams.append(
            {
                "beam": i,
                "center_um": fit.params["center_um"],
                "center_sigma_um": fit.sigmas.get("center_um", 0.0),
                "offset_um": offset,
                "recommended_translation_um": -offset,
                "flagged": bool(abs(offset) > ALIGNMENT_FLAG_THRESHOLD_UM),
            }
        )
    return {
        "ion_position_um": ion_position_um,
        "threshold_um": ALIGNMENT_FLAG_THRESHOLD_UM,
        "beams": beams,
        "any_flagged": any(b["flagged"] for b in beams),
    }


def profile_misalignment(fit_a: FitResult, fit_b: FitResult) -> float:
    """Separation between two fitted beam centers, in um."""
    return abs(fit_a.params["center_um"] - fit_b.params["center_um"])


__all__ = [
    "FitResult",
    "SensitivityCurve",
    "fit_frequency",
    "fit_power_law",
    "fit_beam_profile",
    "fit_hwp_scan",
    "sensitivity_analysis",
    "alignment_report",
    "profile_misalignment",
]
