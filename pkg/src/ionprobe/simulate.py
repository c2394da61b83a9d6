"""Synthetic calibration scans with the experiment's noise budget.

Reproduces the measurement protocols used on the real apparatus: Ramsey
fringes of the light shift, power scans, HWP-angle scans, ion-position
profile scans, and two-beam Rabi profiles.

Randomness is reproducible by construction: every scan point draws from its
own PCG64 stream seeded by (root seed, point index), so identical
(config, seed) pairs give bit-identical datasets and the points could be
evaluated in any order or in parallel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import BeamGeometry, ExperimentConfig, NoiseModel
from .engine import ShiftKernel, differential_shift_parts, effective_base_rate
from .errors import ConfigError
from .polarization import polarization_closed_form

TWO_PI = 2.0 * math.pi

SCAN_KINDS = ("ramsey", "power", "hwp", "position", "rabi")

# Ramsey schedule used when a scan extracts a frequency at each point:
# a fixed number of delays spanning a whole number of expected fringes,
# capped so unresolvably small shifts do not demand unbounded windows.
RAMSEY_POINTS = 32
RAMSEY_FRINGES = 2.0
MAX_RAMSEY_WINDOW_S = 5.0e-3


@dataclass
class ScanDataset:
    """Ordered scan records (x, y, sigma_y) plus a metadata snapshot."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    sigma_y: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCAN_KINDS:
            raise ValueError(f"unknown scan kind {self.kind!r}")
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.sigma_y = np.asarray(self.sigma_y, dtype=float)
        if not (self.x.shape == self.y.shape == self.sigma_y.shape):
            raise ValueError("x, y, sigma_y must have matching shapes")
        if np.any(np.diff(self.x) < 0):
            raise ValueError("records must be sorted by x")

    def __len__(self):
        return self.x.size

    def to_csv_text(self) -> str:
        meta = json.dumps(self.metadata, sort_keys=True, separators=(",", ":"))
        lines = [f"# metadata: {meta}", "x,y,sigma_y"]
        for xi, yi, si in zip(self.x, self.y, self.sigma_y):
            lines.append(f"{float(xi)!r},{float(yi)!r},{float(si)!r}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str, kind: str | None = None) -> "ScanDataset":
        metadata: dict = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                payload = line.lstrip("#").strip()
                if payload.startswith("metadata:"):
                    metadata = json.loads(payload[len("metadata:"):])
                continue
            if line.lower().startswith("x,"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ConfigError(f"malformed CSV row: {line!r}")
            try:
                rows.append(tuple(float(p) for p in parts))
            except ValueError as exc:
                raise ConfigError(f"malformed CSV row: {line!r}") from exc
        if not rows:
            raise ConfigError("CSV contains no data rows")
        data = np.array(rows)
        kind = kind or metadata.get("kind")
        if kind is None:
            raise ConfigError("scan kind not given and absent from CSV metadata")
        return cls(kind=kind, x=data[:, 0], y=data[:, 1], sigma_y=data[:, 2], metadata=metadata)

    @classmethod
    def from_csv(cls, path, kind: str | None = None) -> "ScanDataset":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_csv_text(fh.read(), kind=kind)


def axis_waist_um(beam: BeamGeometry) -> float:
    """1/e^2 intensity radius seen along the trap axis; the beam crosses the
    axis at `projection_rad`, stretching the waist by 1/sin(projection)."""
    return beam.waist_um / math.sin(beam.projection_rad)


def axis_intensity(beam: BeamGeometry, x_um):
    """Intensity along the trap axis in mW/um^2 (Gaussian beam peak
    normalization I0 = 2 P / (pi w0^2))."""
    w_axis = axis_waist_um(beam)
    peak = 2.0 * beam.power_mw / (math.pi * beam.waist_um**2)
    return peak * np.exp(-2.0 * (np.asarray(x_um, dtype=float) - beam.center_um) ** 2 / w_axis**2)


def axis_profile(beam: BeamGeometry, x_um):
    """Axis intensity normalized to 1 at the beam center."""
    w_axis = axis_waist_um(beam)
    return np.exp(-2.0 * (np.asarray(x_um, dtype=float) - beam.center_um) ** 2 / w_axis**2)


def ramsey_probability(delta_omega: float, t: float, contrast: float):
    """P(up) after pi/2 - free evolution - pi/2 with accumulated phase
    delta_omega * t:  P = (1 + contrast cos(delta_omega t)) / 2."""
    if np.any(np.asarray(contrast) < 0) or np.any(np.asarray(contrast) > 1):
        raise ValueError("contrast must lie in [0, 1]")
    return 0.5 * (1.0 + contrast * np.cos(np.asarray(delta_omega) * np.asarray(t)))


def binomial_sigma(p: float, shots: int) -> float:
    """Quoted uncertainty of a binomial fraction; regularized so it stays
    positive at p = 0 or 1."""
    p_tilde = (p * shots + 0.5) / (shots + 1.0)
    return math.sqrt(p_tilde * (1.0 - p_tilde) / shots)


def frequency_sigma(noise: NoiseModel, window_s: float, n_delays: int = RAMSEY_POINTS) -> float:
    """Frequency uncertainty (Hz) of a sinusoid fit to a sampled Ramsey
    fringe: the single-tone Cramer-Rao bound

        sigma_f = (sqrt(3)/pi) * sigma_P / (A sqrt(N) T)

    with per-point readout noise sigma_P = 1/(2 sqrt(shots)) and fringe
    amplitude A = contrast/2."""
    if noise.shots == 0:
        return 0.0
    sigma_p = 0.5 / math.sqrt(noise.shots)
    amplitude = 0.5 * noise.contrast
    return (math.sqrt(3.0) / math.pi) * sigma_p / (amplitude * math.sqrt(n_delays) * window_s)


def _point_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _intensity_factor(noise: NoiseModel, rng: np.random.Generator) -> float:
    if noise.intensity_fraction == 0.0:
        return 1.0
    draw = rng.standard_normal()
    return 1.0 + noise.intensity_fraction * float(np.clip(draw, -5.0, 5.0))


def _ramsey_window(nominal_hz: float) -> float:
    floor_hz = RAMSEY_FRINGES / MAX_RAMSEY_WINDOW_S
    return RAMSEY_FRINGES / max(abs(nominal_hz), floor_hz)


def _sigma_model(noise: NoiseModel, nominal_hz: float) -> float:
    """Frequency noise of one windowed Ramsey extraction.

    Below one visible fringe in the capped window the tone frequency is
    undetermined, so the bound is floored at the window resolution
    1/(2 T_max)."""
    window = _ramsey_window(nominal_hz)
    sigma = frequency_sigma(noise, window)
    if abs(nominal_hz) * window < 1.0:
        sigma = max(sigma, 0.5 / MAX_RAMSEY_WINDOW_S)
    return sigma


def _metadata(config: ExperimentConfig, kind: str, seed: int, **extra) -> dict:
    meta = {"kind": kind, "seed": int(seed), "config": config.to_dict()}
    meta.update(extra)
    return meta


def simulate_ramsey(
    config: ExperimentConfig,
    delays_s,
    beam_index: int = 0,
    seed: int | None = None,
) -> ScanDataset:
    """Ramsey fringe of the single-beam light shift versus delay.

    Each delay draws an intensity factor (the four-photon part scales with
    its square), evaluates the fringe probability, and samples the readout
    binomially unless the noise model is all zero.
    """
    seed = config.noise.seed if seed is None else seed
    noise = config.noise
    delays = np.sort(np.asarray(delays_s, dtype=float))
    four, residual = differential_shift_parts(config, beam_index)

    ys = np.empty_like(delays)
    sigmas = np.empty_like(delays)
    for i, t in enumerate(delays):
        rng = _point_rng(seed, i)
        factor = _intensity_factor(noise, rng)
        shift = four * factor**2 + residual * factor
        p = float(ramsey_probability(shift, t, noise.contrast))
        if noise.shots >= 1:
            counts = rng.binomial(noise.shots, p)
            ys[i] = counts / noise.shots
            sigmas[i] = binomial_sigma(ys[i], noise.shots)
        else:
            ys[i] = p
            sigmas[i] = 0.0
    meta = _metadata(config, "ramsey", seed, beam_index=beam_index, x_unit="s")
    return ScanDataset("ramsey", delays, ys, sigmas, meta)


def _extract_shift_full(
    shift_hz: float,
    nominal_hz: float,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> float:
    """Measured shift from a fully sampled Ramsey fringe at one scan point.

    Fringes too slow for the capped window, or whose fitted contrast falls
    below half the expected contrast (a sinusoid fitted to pure readout
    noise), read back as an unresolved 0.
    """
    from .errors import FitError
    from .fitting import fit_frequency  # local import; fitting layers on top

    window = _ramsey_window(nominal_hz)
    delays = np.linspace(0.0, window, RAMSEY_POINTS)
    probs = ramsey_probability(TWO_PI * shift_hz, delays, noise.contrast)
    ys = np.empty_like(delays)
    sig = np.empty_like(delays)
    for i, p in enumerate(probs):
        counts = rng.binomial(noise.shots, p)
        ys[i] = counts / noise.shots
        sig[i] = binomial_sigma(ys[i], noise.shots)
    fringe = ScanDataset("ramsey", delays, ys, sig, {"kind": "ramsey"})
    try:
        result = fit_frequency(fringe)
    except FitError:
        return 0.0
    if result.params["contrast"] < 0.5 * noise.contrast:
        return 0.0
    return math.copysign(result.params["freq_hz"], nominal_hz if nominal_hz else 1.0)


def _measure_point(
    four_hz: float,
    residual_hz: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    fast: bool,
) -> tuple[float, float]:
    """One simulated shift measurement: returns (value, quoted sigma) in Hz."""
    nominal = four_hz + residual_hz
    if noise.is_zero:
        return nominal, 0.0
    factor = _intensity_factor(noise, rng)
    realized = four_hz * factor**2 + residual_hz * factor
    sigma_f = _sigma_model(noise, nominal)
    sigma_quoted = math.hypot(sigma_f, 2.0 * noise.intensity_fraction * abs(nominal))
    if noise.shots == 0:
        return realized, sigma_quoted
    if fast:
        value = realized + sigma_f * rng.standard_normal()
    else:
        value = _extract_shift_full(realized, nominal, noise, rng)
    return value, sigma_quoted


def simulate_power_scan(
    config: ExperimentConfig,
    powers_mw,
    beam_index: int = 0,
    fast: bool = False,
    seed: int | None = None,
) -> ScanDataset:
    """Measured shift (Hz) versus beam power; quadratic in power with any
    configured residual linear term on top."""
    seed = config.noise.seed if seed is None else seed
    powers = np.sort(np.asarray(powers_mw, dtype=float))
    unit = config.replace(power_mw=1.0)
    four_unit, residual_unit = differential_shift_parts(unit, beam_index)

    ys = np.empty_like(powers)
    sigmas = np.empty_like(powers)
    for i, p_mw in enumerate(powers):
        rng = _point_rng(seed, i)
        four_hz = four_unit / TWO_PI * p_mw**2
        residual_hz = residual_unit / TWO_PI * p_mw
        ys[i], sigmas[i] = _measure_point(four_hz, residual_hz, config.noise, rng, fast)
    meta = _metadata(config, "power", seed, beam_index=beam_index, fast=fast, x_unit="mW")
    return ScanDataset("power", powers, ys, sigmas, meta)


def simulate_hwp_scan(
    config: ExperimentConfig,
    angles_rad,
    beam_index: int = 0,
    fast: bool = False,
    seed: int | None = None,
) -> ScanDataset:
    """Measured shift (Hz) versus HWP angle; the dataset stores the angle
    in degrees (the instrument-facing unit)."""
    seed = config.noise.seed if seed is None else seed
    angles = np.sort(np.asarray(angles_rad, dtype=float))
    kernel = ShiftKernel(config.ion, config.comb, config.envelope_truncation)
    omega0 = effective_base_rate(config, beam_index)
    four_all = (
        kernel.differential(
            polarization_closed_form(
                config.field.alpha, config.field.beta, angles, config.qwp_angle
            ),
            omega0,
        )
        / TWO_PI
    )
    residual_hz = (
        config.residual_two_photon_hz_per_mw * config.beam(beam_index).power_mw
    )

    ys = np.empty_like(angles)
    sigmas = np.empty_like(angles)
    for i in range(angles.size):
        rng = _point_rng(seed, i)
        ys[i], sigmas[i] = _measure_point(
            float(four_all[i]), residual_hz, config.noise, rng, fast
        )
    meta = _metadata(config, "hwp", seed, beam_index=beam_index, fast=fast, x_unit="deg")
    return ScanDataset("hwp", np.degrees(angles), ys, sigmas, meta)


def simulate_position_scan(
    config: ExperimentConfig,
    beam_index: int,
    positions_um,
    fast: bool = False,
    seed: int | None = None,
) -> ScanDataset:
    """Measured shift (Hz) versus ion position along the trap axis.

    The four-photon signal follows the squared beam profile; ion-position
    jitter perturbs the evaluation point but recorded x stays nominal.
    """
    seed = config.noise.seed if seed is None else seed
    positions = np.sort(np.asarray(positions_um, dtype=float))
    beam = config.beam(beam_index)
    four_peak, residual_peak = differential_shift_parts(config, beam_index)
    w_axis = axis_waist_um(beam)

    ys = np.empty_like(positions)
    sigmas = np.empty_like(positions)
    for i, x in enumerate(positions):
        rng = _point_rng(seed, i)
        x_eval = x
        if config.noise.position_sigma_um > 0.0:
            x_eval = x + config.noise.position_sigma_um * rng.standard_normal()
        profile = float(axis_profile(beam, x_eval))
        four_hz = four_peak / TWO_PI * profile**2
        residual_hz = residual_peak / TWO_PI * profile
        ys[i], sigmas[i] = _measure_point(four_hz, residual_hz, config.noise, rng, fast)
        # position jitter propagates into the signal through the profile slope
        profile_nom = float(axis_profile(beam, x))
        slope = (
            abs(2.0 * four_peak * profile_nom + residual_peak)
            / TWO_PI
            * profile_nom
            * 4.0
            * abs(x - beam.center_um)
            / w_axis**2
        )
        sigmas[i] = math.hypot(sigmas[i], slope * config.noise.position_sigma_um)
    meta = _metadata(config, "position", seed, beam_index=beam_index, fast=fast, x_unit="um")
    return ScanDataset("position", positions, ys, sigmas, meta)


def rabi_profile(beam1: BeamGeometry, beam2: BeamGeometry, x_um, peak_rabi_hz: float):
    """Two-beam Rabi frequency versus position: proportional to the
    geometric mean of the two intensities, normalized so a co-centered
    (aligned) pair would reach `peak_rabi_hz`."""
    if beam1.power_mw == 0.0 or beam2.power_mw == 0.0:
        return np.zeros_like(np.asarray(x_um, dtype=float))
    return peak_rabi_hz * np.sqrt(axis_profile(beam1, x_um) * axis_profile(beam2, x_um))


def simulate_rabi_scan(
    config: ExperimentConfig,
    positions_um,
    peak_rabi_hz: float,
    beam_indices: tuple[int, int] = (0, 1),
) -> ScanDataset:
    """Noise-free two-beam Rabi profile dataset (Rabi-fit noise modeling is
    out of scope; the curve is for alignment-sensitivity comparisons)."""
    if len(config.beams) < 2:
        raise ConfigError("rabi scan requires at least two beams in the config")
    positions = np.sort(np.asarray(positions_um, dtype=float))
    b1 = config.beam(beam_indices[0])
    b2 = config.beam(beam_indices[1])
    ys = rabi_profile(b1, b2, positions, peak_rabi_hz)
    meta = _metadata(
        config,
        "rabi",
        config.noise.seed,
        beam_indices=list(beam_indices),
        peak_rabi_hz=peak_rabi_hz,
        x_unit="um",
    )
    return ScanDataset("rabi", positions, ys, np.zeros_like(positions), meta)
