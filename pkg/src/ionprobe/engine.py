"""Four-photon light-shift engine for a comb-driven hyperfine qubit.

A single mode-locked Raman beam contains pairs of comb teeth whose beatnotes
sit close to the qubit and Zeeman splittings.  Each near-resonant pair
light-shifts the ground-manifold levels in second order of the two-photon
Rabi frequency; summing tooth pairs introduces a comb-envelope correction
factor.  The observable is the differential shift between the two clock
states, quadratic in beam intensity.

Everything here is pure and deterministic; callers may evaluate shifts for
many configurations in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import (
    ALL_STATES,
    DOWN,
    UP,
    ZEEMAN_MINUS,
    ZEEMAN_PLUS,
    CombSpec,
    ExperimentConfig,
    IonSpecies,
    QubitState,
    level_splitting,
)
from .errors import ResonanceError
from .polarization import SphericalPolarization, polarization_closed_form

TWO_PI = 2.0 * math.pi

# Relative threshold below which an envelope-sum denominator counts as a
# comb-tooth resonance with the splitting.
RESONANCE_GUARD = 1e-9


@dataclass(frozen=True)
class BeatnoteResolution:
    """Nearest comb beatnote to a level splitting: index j and the signed
    residual detuning delta = splitting - 2*pi*j*rep_rate (rad/s)."""

    j: int
    delta: float


@dataclass(frozen=True)
class EnvelopeFactor:
    """Comb-envelope correction factor and the number of summed tooth pairs."""

    value: float
    terms_used: int


@dataclass(frozen=True)
class RabiCouplings:
    """Two-photon Rabi frequencies between ground-manifold states (rad/s).

    Components may be scalars or broadcast arrays.  Couplings between the
    two stretched Zeeman states are not part of the model.
    """

    omega_00_10: complex | np.ndarray
    omega_00_1m1: complex | np.ndarray
    omega_00_1p1: complex | np.ndarray
    omega_10_1m1: complex | np.ndarray
    omega_10_1p1: complex | np.ndarray

    def omega(self, state_n: QubitState, state_a: QubitState):
        """Coupling between two states; reversed pairs return the conjugate."""
        table = {
            (DOWN, UP): self.omega_00_10,
            (DOWN, ZEEMAN_MINUS): self.omega_00_1m1,
            (DOWN, ZEEMAN_PLUS): self.omega_00_1p1,
            (UP, ZEEMAN_MINUS): self.omega_10_1m1,
            (UP, ZEEMAN_PLUS): self.omega_10_1p1,
        }
        if (state_n, state_a) in table:
            return table[(state_n, state_a)]
        if (state_a, state_n) in table:
            return np.conjugate(table[(state_a, state_n)])
        raise ValueError(f"coupling {state_n} <-> {state_a} is not modeled")


def base_rabi_rate(g0: float, raman_detuning: float, fine_structure: float) -> float:
    """Two-photon Rabi rate from the single-photon rate and the detunings
    to the two excited fine-structure levels (all rad/s):

        Omega_0 = (g0^2 / 6) * (1/Delta + 1/(omega_F - Delta))
    """
    if not 0.0 < raman_detuning < fine_structure:
        raise ValueError(
            "raman detuning must lie strictly between 0 and the fine-structure splitting"
        )
    return (g0 * g0 / 6.0) * (1.0 / raman_detuning + 1.0 / (fine_structure - raman_detuning))


def nearest_beatnote(splitting: float, rep_rate_hz: float) -> BeatnoteResolution:
    """Comb index j minimizing |splitting - 2*pi*j*rep_rate|.

    Exact ties break toward the smaller j, so the residual comes out
    positive at half-spacing.
    """
    if rep_rate_hz <= 0.0:
        raise ValueError("rep_rate_hz must be positive")
    spacing = TWO_PI * rep_rate_hz
    lower = math.floor(splitting / spacing)
    j = min((lower, lower + 1), key=lambda cand: (abs(splitting - spacing * cand), cand))
    return BeatnoteResolution(j=int(j), delta=splitting - spacing * j)


def _sech_squared(x: np.ndarray) -> np.ndarray:
    # sech(x) = 2 exp(-|x|) / (1 + exp(-2|x|)); avoids cosh overflow.
    ax = np.abs(x)
    e = np.exp(-ax)
    s = 2.0 * e / (1.0 + e * e)
    return s * s


def envelope_factor(splitting: float, comb: CombSpec, truncation: int) -> EnvelopeFactor:
    """Comb-envelope factor for one splitting.

    Sums tooth-pair offsets k in [-K, K] around the nearest beatnote j:

        C = sum_k sech^2((j + k) * pi * rep_rate * tau)
                  / (1 - k * 2*pi*rep_rate / delta)

    Raises ResonanceError when delta vanishes or any denominator falls
    below the resonance guard.
    """
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    note = nearest_beatnote(splitting, comb.rep_rate_hz)
    spacing = TWO_PI * comb.rep_rate_hz
    if abs(note.delta) < RESONANCE_GUARD * spacing:
        raise ResonanceError(
            f"splitting {splitting:g} rad/s is resonant with comb tooth pair j={note.j}"
        )
    k = np.arange(-truncation, truncation + 1, dtype=float)
    denominators = 1.0 - k * (spacing / note.delta)
    if np.min(np.abs(denominators)) < RESONANCE_GUARD:
        k_bad = int(k[np.argmin(np.abs(denominators))])
        raise ResonanceError(
            f"comb tooth pair at offset k={k_bad} resonant with splitting {splitting:g} rad/s"
        )
    weights = _sech_squared((note.j + k) * math.pi * comb.rep_rate_hz * comb.pulse_duration_s)
    return EnvelopeFactor(value=float(np.sum(weights / denominators)), terms_used=k.size)


def rabi_couplings(
    eps0: SphericalPolarization, eps1: SphericalPolarization, omega0: float
) -> RabiCouplings:
    """Two-photon Rabi frequencies for a tooth pair with polarizations
    eps0, eps1 and base rate omega0."""
    m0, p0, q0 = eps0.eps_minus, eps0.eps_pi, eps0.eps_plus
    m1c = np.conjugate(eps1.eps_minus)
    p1c = np.conjugate(eps1.eps_pi)
    q1c = np.conjugate(eps1.eps_plus)
    return RabiCouplings(
        omega_00_10=(m0 * m1c - q0 * q1c) * omega0,
        omega_00_1m1=-(m0 * p1c + p0 * q1c) * omega0,
        omega_00_1p1=(q0 * p1c + p0 * m1c) * omega0,
        omega_10_1m1=(m0 * p1c + p0 * q1c) * omega0,
        omega_10_1p1=(q0 * p1c + p0 * m1c) * omega0,
    )


def _g_factor(splitting: float, comb: CombSpec, truncation: int) -> float:
    """Envelope-weighted inverse detuning C/delta for one splitting."""
    note = nearest_beatnote(splitting, comb.rep_rate_hz)
    env = envelope_factor(splitting, comb, truncation)
    return env.value / note.delta


def fourth_order_shift(
    state: QubitState,
    couplings: RabiCouplings,
    ion: IonSpecies,
    comb: CombSpec,
    truncation: int,
) -> float:
    """Light shift of one clock state from all modeled couplings:

        E = sum_{a != n} |Omega_{n,a}|^2 / 4 * C_{n,a} / delta_{n,a}
    """
    if state not in (DOWN, UP):
        raise ValueError(f"shift of {state} requires couplings outside the model")
    total = 0.0
    for other in ALL_STATES:
        if other == state:
            continue
        omega = couplings.omega(state, other)
        split = level_splitting(ion, state, other)
        total += np.abs(omega) ** 2 / 4.0 * _g_factor(split, comb, truncation)
    return total


class ShiftKernel:
    """Differential-shift evaluator with the comb factors precomputed.

    The envelope factors depend only on the ion splittings and the comb, so
    a kernel built once can evaluate the polarization-dependent shift for
    whole angle grids at a time (all coupling arithmetic broadcasts).
    """

    def __init__(self, ion: IonSpecies, comb: CombSpec, truncation: int):
        self.ion = ion
        self.comb = comb
        self.truncation = truncation
        w_hf, w_z = ion.hyperfine_splitting, ion.zeeman_shift
        self._g_00_10 = _g_factor(w_hf, comb, truncation)
        self._g_00_1m1 = _g_factor(w_hf - w_z, comb, truncation)
        self._g_00_1p1 = _g_factor(w_hf + w_z, comb, truncation)
        self._g_10_00 = _g_factor(-w_hf, comb, truncation)
        self._g_10_1m1 = _g_factor(-w_z, comb, truncation)
        self._g_10_1p1 = _g_factor(w_z, comb, truncation)

    def differential(self, pol: SphericalPolarization, omega0) -> float | np.ndarray:
        """Differential four-photon shift (rad/s) for a single beam whose
        tooth pairs share the polarization `pol`."""
        c = rabi_couplings(pol, pol, omega0)
        e_down = (
            np.abs(c.omega_00_10) ** 2 * self._g_00_10
            + np.abs(c.omega_00_1m1) ** 2 * self._g_00_1m1
            + np.abs(c.omega_00_1p1) ** 2 * self._g_00_1p1
        ) / 4.0
        e_up = (
            np.abs(c.omega_00_10) ** 2 * self._g_10_00
            + np.abs(c.omega_10_1m1) ** 2 * self._g_10_1m1
            + np.abs(c.omega_10_1p1) ** 2 * self._g_10_1p1
        ) / 4.0
        return e_up - e_down

    def differential_angles(self, alpha, beta, theta, phi, omega0):
        """Differential shift for field angles (alpha, beta) and waveplate
        angles (theta: HWP, phi: QWP); broadcasts over angle arrays."""
        return self.differential(polarization_closed_form(alpha, beta, theta, phi), omega0)


def effective_base_rate(config: ExperimentConfig, beam_index: int = 0) -> float:
    """Two-photon base rate at the beam center for the configured power.

    The configured single-photon rate is referenced to 1 mW, and the
    two-photon rate scales linearly with intensity.
    """
    beam = config.beam(beam_index)
    omega0_per_mw = base_rabi_rate(
        config.ion.single_photon_rabi,
        config.ion.raman_detuning,
        config.ion.fine_structure_splitting,
    )
    return omega0_per_mw * beam.power_mw


def differential_shift_parts(
    config: ExperimentConfig, beam_index: int = 0
) -> tuple[float, float]:
    """(four-photon shift, residual two-photon shift), both rad/s, at the
    beam center.  The residual term is a configured linear-in-power
    surrogate, zero by default."""
    kernel = ShiftKernel(config.ion, config.comb, config.envelope_truncation)
    pol = polarization_closed_form(
        config.field.alpha, config.field.beta, config.hwp_angle, config.qwp_angle
    )
    four_photon = float(kernel.differential(pol, effective_base_rate(config, beam_index)))
    residual = TWO_PI * config.residual_two_photon_hz_per_mw * config.beam(beam_index).power_mw
    return four_photon, residual


def differential_shift(config: ExperimentConfig, beam_index: int = 0) -> float:
    """Differential shift (rad/s) of the clock transition for one beam at
    its peak intensity, including any configured residual term."""
    four_photon, residual = differential_shift_parts(config, beam_index)
    return four_photon + residual


def shift_components(config: ExperimentConfig, beam_index: int = 0) -> dict:
    """Per-state-pair breakdown of the differential shift, for reporting."""
    omega0 = effective_base_rate(config, beam_index)
    pol = polarization_closed_form(
        config.field.alpha, config.field.beta, config.hwp_angle, config.qwp_angle
    )
    couplings = rabi_couplings(pol, pol, omega0)
    out = {}
    for state, sign in ((UP, +1.0), (DOWN, -1.0)):
        for other in ALL_STATES:
            if other == state:
                continue
            omega = complex(couplings.omega(state, other))
            split = level_splitting(config.ion, state, other)
            note = nearest_beatnote(split, config.comb.rep_rate_hz)
            env = envelope_factor(split, config.comb, config.envelope_truncation)
            contribution = sign * abs(omega) ** 2 / 4.0 * env.value / note.delta
            out[f"{state}->{other}"] = {
                "splitting_hz": split / TWO_PI,
                "beatnote_index": note.j,
                "beatnote_detuning_hz": note.delta / TWO_PI,
                "envelope_factor": env.value,
                "coupling_abs_rad_s": abs(omega),
                "contribution_rad_s": contribution,
            }
    return out


def linear_pol_shift(
    theta: float, omega0: float, ion: IonSpecies, comb: CombSpec, truncation: int
) -> float:
    """Closed-form differential shift for pure linear polarization at HWP
    angle theta with the field along z (alpha = 0, QWP at 0):

        delta_omega(theta) = -(Omega_0^2 / 8) * sin^2(4 theta)
                             * (C_-/delta_- + C_+/delta_+)

    where +- refer to the |0,0> couplings to the two Zeeman states.  The
    overall sign follows from the differential of the level-shift sums
    (the |1,0> Zeeman contributions cancel pairwise), and the expression
    serves as an independent check on the general evaluator.
    """
    w_hf, w_z = ion.hyperfine_splitting, ion.zeeman_shift
    bracket = _g_factor(w_hf - w_z, comb, truncation) + _g_factor(w_hf + w_z, comb, truncation)
    return -(omega0 * omega0 / 8.0) * math.sin(4.0 * theta) ** 2 * bracket
