"""Experiment configuration: ion constants, comb parameters, geometry, noise.

All frequencies are stored internally as angular frequencies (rad/s) and all
angles as radians.  Configuration files use ordinary Hz (keys suffixed `_hz`)
and degrees (keys suffixed `_deg`); values are converted once on load so the
rest of the package never worries about 2*pi factors.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

# Section defaults, applied only when the whole section is absent from the
# document.  A section that is present must spell out its required keys.
DEFAULT_COMB = {"rep_rate_hz": 80.0e6, "pulse_duration_s": 15.0e-12}
DEFAULT_ION_SPLITTINGS = {"hyperfine_splitting_hz": 12.642812e9, "zeeman_shift_hz": 5.0e6}
DEFAULT_FIELD = {"alpha_deg": 0.0, "beta_deg": 0.0, "b0_gauss": 0.0}
DEFAULT_WAVEPLATES = {"qwp_deg": 0.0, "hwp_deg": 0.0}
DEFAULT_NOISE = {
    "spam_error": 0.0,
    "intensity_fraction": 0.0,
    "shots": 0,
    "position_sigma_um": 0.0,
}
DEFAULT_ENGINE = {"envelope_truncation": 1000, "residual_two_photon_hz_per_mw": 0.0}
DEFAULT_PROJECTION_DEG = 45.0


@dataclass(frozen=True)
class QubitState:
    """One of the four S1/2 ground-manifold states |F, m_F>."""

    F: int
    m_F: int

    def __post_init__(self):
        if self.F not in (0, 1) or abs(self.m_F) > self.F:
            raise ConfigError(f"invalid qubit state |{self.F},{self.m_F}>")

    def __str__(self):
        m = f"{self.m_F:+d}" if self.m_F else "0"
        return f"|{self.F},{m}>"


DOWN = QubitState(0, 0)
UP = QubitState(1, 0)
ZEEMAN_MINUS = QubitState(1, -1)
ZEEMAN_PLUS = QubitState(1, 1)
ALL_STATES = (DOWN, ZEEMAN_MINUS, UP, ZEEMAN_PLUS)


@dataclass(frozen=True)
class IonSpecies:
    """Level structure and coupling constants, all in rad/s.

    `single_photon_rabi` is referenced to 1 mW of beam power at the beam
    center; the engine scales the derived two-photon rate linearly with
    power (the absolute power-to-Rabi conversion is an input, not a model).
    """

    hyperfine_splitting: float
    zeeman_shift: float
    fine_structure_splitting: float
    raman_detuning: float
    single_photon_rabi: float

    def __post_init__(self):
        for name in (
            "hyperfine_splitting",
            "zeeman_shift",
            "fine_structure_splitting",
            "raman_detuning",
            "single_photon_rabi",
        ):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"ion.{name}: must be strictly positive")
        if not self.raman_detuning < self.fine_structure_splitting:
            raise ConfigError(
                "ion.raman_detuning_hz: must be below fine_structure_splitting_hz"
            )
        if not self.zeeman_shift < self.hyperfine_splitting:
            raise ConfigError("ion.zeeman_shift_hz: must be below hyperfine_splitting_hz")

    def level_energy(self, state: QubitState) -> float:
        """Energy of a ground-manifold state in rad/s, with E(|0,0>) = 0.

        The F=1 sublevels sit at hyperfine_splitting + m_F * zeeman_shift.
        """
        if state.F == 0:
            return 0.0
        return self.hyperfine_splitting + state.m_F * self.zeeman_shift


def level_splitting(ion: IonSpecies, state_from: QubitState, state_to: QubitState) -> float:
    """Signed splitting omega_to - omega_from in rad/s."""
    return ion.level_energy(state_to) - ion.level_energy(state_from)


@dataclass(frozen=True)
class CombSpec:
    """Mode-locked laser comb: repetition rate in Hz, pulse duration in s."""

    rep_rate_hz: float
    pulse_duration_s: float

    def __post_init__(self):
        if not self.rep_rate_hz > 0.0:
            raise ConfigError("comb.rep_rate_hz: must be strictly positive")
        if not self.pulse_duration_s > 0.0:
            raise ConfigError("comb.pulse_duration_s: must be strictly positive")
        if not self.rep_rate_hz * self.pulse_duration_s < 1.0:
            raise ConfigError(
                "comb.pulse_duration_s: pulses must be shorter than the repetition period"
            )


@dataclass(frozen=True)
class FieldGeometry:
    """Magnetic field direction (polar alpha, azimuthal beta) and magnitude.

    The magnitude is carried for reporting only; the shift model depends on
    direction alone.
    """

    alpha: float
    beta: float
    b0_gauss: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= math.pi:
            raise ConfigError("field.alpha_deg: must lie in [0, 180] degrees")
        if not 0.0 <= self.beta < TWO_PI:
            raise ConfigError("field.beta_deg: must lie in [0, 360) degrees")


@dataclass(frozen=True)
class BeamGeometry:
    """Gaussian beam: 1/e^2 intensity waist, power, center along the trap
    axis, and the beam-to-axis projection angle (default 45 degrees)."""

    waist_um: float
    power_mw: float
    center_um: float = 0.0
    projection_rad: float = math.radians(DEFAULT_PROJECTION_DEG)

    def __post_init__(self):
        if not self.waist_um > 0.0:
            raise ConfigError("beams[].waist_um: must be strictly positive")
        if self.power_mw < 0.0:
            raise ConfigError("beams[].power_mw: must be non-negative")
        if not 0.0 < self.projection_rad <= math.pi / 2:
            raise ConfigError("beams[].projection_deg: must lie in (0, 90] degrees")


@dataclass(frozen=True)
class NoiseModel:
    """Measurement noise budget for simulated scans.

    shots = 0 selects expectation-value readout (no shot sampling); any
    positive count enables binomial sampling of the Ramsey probabilities.
    """

    spam_error: float = 0.0
    intensity_fraction: float = 0.0
    shots: int = 0
    position_sigma_um: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.spam_error < 0.5:
            raise ConfigError("noise.spam_error: must lie in [0, 0.5)")
        if self.intensity_fraction < 0.0:
            raise ConfigError("noise.intensity_fraction: must be non-negative")
        if self.shots < 0 or self.shots != int(self.shots):
            raise ConfigError("noise.shots: must be a non-negative integer")
        if self.position_sigma_um < 0.0:
            raise ConfigError("noise.position_sigma_um: must be non-negative")

    @property
    def contrast(self) -> float:
        """Ramsey fringe contrast implied by the SPAM error."""
        return 1.0 - 2.0 * self.spam_error

    @property
    def is_zero(self) -> bool:
        return (
            self.spam_error == 0.0
            and self.intensity_fraction == 0.0
            and self.shots == 0
            and self.position_sigma_um == 0.0
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Single source of truth for one run."""

    ion: IonSpecies
    comb: CombSpec
    field: FieldGeometry
    qwp_angle: float
    hwp_angle: float
    beams: tuple[BeamGeometry, ...]
    noise: NoiseModel
    envelope_truncation: int = 1000
    residual_two_photon_hz_per_mw: float = 0.0
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if len(self.beams) < 1:
            raise ConfigError("beams: at least one beam is required")
        if self.envelope_truncation < 1:
            raise ConfigError("engine.envelope_truncation: must be >= 1")

    def beam(self, index: int) -> BeamGeometry:
        try:
            return self.beams[index]
        except IndexError:
            raise ConfigError(
                f"beam index {index} out of range (config has {len(self.beams)} beams)"
            ) from None

    def to_dict(self) -> dict:
        """Normalized document (defaults applied), round-tripping the loaded
        numeric fields bit-exactly."""
        return copy.deepcopy(self.source)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)

    def replace(self, **overrides) -> "ExperimentConfig":
        """Rebuild with document-level overrides, e.g. hwp_deg=22.5,
        power_mw=2.0 (applied to every beam), alpha_deg=10, seed=7."""
        doc = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("alpha_deg", "beta_deg", "b0_gauss"):
                doc["field"][key] = value
            elif key in ("qwp_deg", "hwp_deg"):
                doc["waveplates"][key] = value
            elif key == "power_mw":
                for beam in doc["beams"]:
                    beam["power_mw"] = value
            elif key in DEFAULT_NOISE or key == "seed":
                doc["noise"][key] = value
            elif key in DEFAULT_ENGINE:
                doc["engine"][key] = value
            else:
                raise ConfigError(f"unknown override {key!r}")
        return config_from_dict(doc)


def _require(section: dict, section_name: str, key: str) -> float:
    if key not in section:
        raise ConfigError(f"{section_name}.{key}: required key missing")
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section_name}.{key}: must be a number")
    return value


def _check_keys(section: dict, section_name: str, allowed: set[str]):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{section_name}.{key}: unknown key")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a configuration document and build an ExperimentConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    _check_keys(doc, "config", {"ion", "comb", "field", "waveplates", "beams", "noise", "engine"})

    normalized: dict = {}

    ion_doc = doc.get("ion")
    if not isinstance(ion_doc, dict):
        raise ConfigError("ion: required section missing")
    ion_doc = {**DEFAULT_ION_SPLITTINGS, **ion_doc}
    _check_keys(
        ion_doc,
        "ion",
        {
            "hyperfine_splitting_hz",
            "zeeman_shift_hz",
            "fine_structure_splitting_hz",
            "raman_detuning_hz",
            "single_photon_rabi_hz",
        },
    )
    ion = IonSpecies(
        hyperfine_splitting=TWO_PI * _require(ion_doc, "ion", "hyperfine_splitting_hz"),
        zeeman_shift=TWO_PI * _require(ion_doc, "ion", "zeeman_shift_hz"),
        fine_structure_splitting=TWO_PI
        * _require(ion_doc, "ion", "fine_structure_splitting_hz"),
        raman_detuning=TWO_PI * _require(ion_doc, "ion", "raman_detuning_hz"),
        single_photon_rabi=TWO_PI * _require(ion_doc, "ion", "single_photon_rabi_hz"),
    )
    normalized["ion"] = dict(ion_doc)

    comb_doc = dict(doc.get("comb", DEFAULT_COMB))
    _check_keys(comb_doc, "comb", set(DEFAULT_COMB))
    comb = CombSpec(
        rep_rate_hz=_require(comb_doc, "comb", "rep_rate_hz"),
        pulse_duration_s=_require(comb_doc, "comb", "pulse_duration_s"),
    )
    normalized["comb"] = comb_doc

    field_doc = {**DEFAULT_FIELD, **doc.get("field", {})}
    _check_keys(field_doc, "field", set(DEFAULT_FIELD))
    geometry = FieldGeometry(
        alpha=math.radians(_require(field_doc, "field", "alpha_deg")),
        beta=math.radians(_require(field_doc, "field", "beta_deg")) % TWO_PI,
        b0_gauss=field_doc["b0_gauss"],
    )
    normalized["field"] = field_doc

    wp_doc = {**DEFAULT_WAVEPLATES, **doc.get("waveplates", {})}
    _check_keys(wp_doc, "waveplates", set(DEFAULT_WAVEPLATES))
    normalized["waveplates"] = wp_doc

    beams_doc = doc.get("beams")
    if not isinstance(beams_doc, list) or not beams_doc:
        raise ConfigError("beams: required section missing (need at least one beam)")
    beams = []
    norm_beams = []
    for i, beam_doc in enumerate(beams_doc):
        if not isinstance(beam_doc, dict):
            raise ConfigError(f"beams[{i}]: must be an object")
        beam_doc = {"center_um": 0.0, "projection_deg": DEFAULT_PROJECTION_DEG, **beam_doc}
        _check_keys(beam_doc, f"beams[{i}]", {"waist_um", "power_mw", "center_um", "projection_deg"})
        beams.append(
            BeamGeometry(
                waist_um=_require(beam_doc, f"beams[{i}]", "waist_um"),
                power_mw=_require(beam_doc, f"beams[{i}]", "power_mw"),
                center_um=beam_doc["center_um"],
                projection_rad=math.radians(beam_doc["projection_deg"]),
            )
        )
        norm_beams.append(beam_doc)
    normalized["beams"] = norm_beams

    noise_doc = {**DEFAULT_NOISE, "seed": 0, **doc.get("noise", {})}
    _check_keys(noise_doc, "noise", set(DEFAULT_NOISE) | {"seed"})
    noise = NoiseModel(
        spam_error=noise_doc["spam_error"],
        intensity_fraction=noise_doc["intensity_fraction"],
        shots=int(noise_doc["shots"]),
        position_sigma_um=noise_doc["position_sigma_um"],
        seed=int(noise_doc["seed"]),
    )
    normalized["noise"] = noise_doc

    engine_doc = {**DEFAULT_ENGINE, **doc.get("engine", {})}
    _check_keys(engine_doc, "engine", set(DEFAULT_ENGINE))
    normalized["engine"] = engine_doc

    return ExperimentConfig(
        ion=ion,
        comb=comb,
        field=geometry,
        qwp_angle=math.radians(wp_doc["qwp_deg"]),
        hwp_angle=math.radians(wp_doc["hwp_deg"]),
        beams=tuple(beams),
        noise=noise,
        envelope_truncation=int(engine_doc["envelope_truncation"]),
        residual_two_photon_hz_per_mw=engine_doc["residual_two_photon_hz_per_mw"],
        source=normalized,
    )


def load_config(text: str) -> ExperimentConfig:
    """Parse a JSON configuration document and validate every constraint."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def load_config_file(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


def example_config() -> dict:
    """A complete document with plausible values for a 355 nm comb-driven
    hyperfine qubit; the coupling constants are illustrative inputs."""
    return {
        "ion": {
            "hyperfine_splitting_hz": 12.642812e9,
            "zeeman_shift_hz": 5.0e6,
            "fine_structure_splitting_hz": 100.0e12,
            "raman_detuning_hz": 33.0e12,
            "single_photon_rabi_hz": 3.65e9,
        },
        "comb": {"rep_rate_hz": 80.0e6, "pulse_duration_s": 15.0e-12},
        "field": {"alpha_deg": 0.0, "beta_deg": 0.0, "b0_gauss": 3.6},
        "waveplates": {"qwp_deg": 0.0, "hwp_deg": 22.5},
        "beams": [
            {"waist_um": 27.0, "power_mw": 3.0, "center_um": 0.0, "projection_deg": 45.0}
        ],
        "noise": {
            "spam_error": 0.04,
            "intensity_fraction": 0.01,
            "shots": 100,
            "position_sigma_um": 1.0,
            "seed": 0,
        },
        "engine": {"envelope_truncation": 1000, "residual_two_photon_hz_per_mw": 0.0},
    }
