"""Built-in consistency suite behind `ionprobe selftest`.

Runs the cross-route checks that guard the physics core: closed forms
against numeric pipelines, sum convergence, round trips, and determinism.
Each check prints one pass/fail line; the suite fails if any check does.

A corruption hook (`corrupt=`) deliberately breaks one constant so the
failure path is testable end to end.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from . import engine, polarization
from .config import (
    ALL_STATES,
    config_from_dict,
    example_config,
    level_splitting,
    load_config,
)
from .fitting import sensitivity_analysis
from .simulate import simulate_hwp_scan

TWO_PI = 2.0 * math.pi

CORRUPTIBLE = ("qwp-phase", "envelope-weight")


@contextlib.contextmanager
def _corruption(name: str | None):
    """Perturb one internal constant for the duration of the suite."""
    if name is None:
        yield
        return
    if name == "qwp-phase":
        original = polarization.qwp_matrix

        def broken(phi):
            return np.exp(1j * 1e-3) * original(phi)

        polarization.qwp_matrix = broken
        try:
            yield
        finally:
            polarization.qwp_matrix = original
    elif name == "envelope-weight":
        original = engine._sech_squared

        def broken(x):
            return original(x) * 1.001

        engine._sech_squared = broken
        try:
            yield
        finally:
            engine._sech_squared = original
    else:
        raise ValueError(f"unknown corruption target {name!r} (choose from {CORRUPTIBLE})")


def _checks(config):
    ion, comb, trunc = config.ion, config.comb, config.envelope_truncation
    rng = np.random.default_rng(20240815)

    def config_roundtrip():
        text = config.to_json()
        again = load_config(text)
        ok = again.to_dict() == config.to_dict()
        return ok, "serialize -> load preserves the document"

    def splitting_antisymmetry():
        worst = max(
            abs(level_splitting(ion, a, b) + level_splitting(ion, b, a))
            for a in ALL_STATES
            for b in ALL_STATES
        )
        return worst == 0.0, f"max |E(a,b)+E(b,a)| = {worst:g}"

    def waveplate_unitarity():
        worst = 0.0
        for _ in range(200):
            angle = rng.uniform(0, math.pi)
            for mat in (polarization.qwp_matrix(angle), polarization.hwp_matrix(angle)):
                dev = np.abs(mat.conj().T @ mat - np.eye(2)).max()
                worst = max(worst, float(dev))
        return worst < 1e-12, f"max |M^dag M - I| = {worst:.2e}"

    def waveplate_closed_form():
        worst = 0.0
        for _ in range(200):
            phi, theta = rng.uniform(0, math.pi, 2)
            via_matrices = polarization.hwp_matrix(theta) @ polarization.qwp_matrix(phi) @ [1, 0]
            closed = polarization.apply_waveplates(phi, theta)
            worst = max(worst, float(np.abs(via_matrices - closed).max()))
        return worst < 1e-12, f"max matrix-vs-closed deviation = {worst:.2e}"

    def pipeline_equivalence():
        worst = 0.0
        for _ in range(200):
            alpha = rng.uniform(0, math.pi)
            beta = rng.uniform(0, TWO_PI)
            theta, phi = rng.uniform(0, math.pi, 2)
            a = polarization.polarization_pipeline(alpha, beta, theta, phi).as_array()
            b = polarization.polarization_closed_form(alpha, beta, theta, phi).as_array()
            worst = max(worst, float(np.abs(a - b).max()))
        return worst < 1e-10, f"max closed-form vs pipeline deviation = {worst:.2e}"

    def reconstruction():
        worst = 0.0
        for _ in range(200):
            alpha = rng.uniform(0, math.pi)
            beta = rng.uniform(0, TWO_PI)
            vec = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            vec = vec / np.linalg.norm(vec)
            basis = polarization.ion_frame_basis(alpha, beta)
            sph = polarization.spherical_components(vec, basis)
            back = polarization.reconstruct_lab(sph, basis)
            worst = max(worst, float(np.abs(back - vec).max()))
            worst = max(worst, float(abs(sph.norm_squared() - 1.0)))
        return worst < 1e-12, f"max reconstruction/norm deviation = {worst:.2e}"

    def beatnote_scan():
        note = engine.nearest_beatnote(ion.hyperfine_splitting, comb.rep_rate_hz)
        spacing = TWO_PI * comb.rep_rate_hz
        brute = min(range(0, 400), key=lambda j: (abs(ion.hyperfine_splitting - spacing * j), j))
        ok = note.j == brute == 158 and abs(note.delta / TWO_PI - 2.812e6) < 1.0
        return ok, f"j = {note.j}, delta = {note.delta / TWO_PI / 1e6:.6f} MHz"

    def envelope_convergence():
        # The tooth-pair sum is converged by K = 4000 at these comb
        # parameters; doubling beyond that must be inert.
        worst = 0.0
        for split in (ion.hyperfine_splitting, ion.zeeman_shift):
            c1 = engine.envelope_factor(split, comb, 4000).value
            c2 = engine.envelope_factor(split, comb, 8000).value
            worst = max(worst, abs(c2 - c1) / abs(c1))
        return worst < 1e-9, f"max relative change on doubling K=4000: {worst:.2e}"

    def closed_form_shift():
        omega0 = engine.effective_base_rate(config)
        kernel = engine.ShiftKernel(ion, comb, trunc)
        worst = 0.0
        for theta in np.linspace(0.05, math.pi / 2 - 0.05, 25):
            general = float(kernel.differential_angles(0.0, 0.0, theta, 0.0, omega0))
            closed = engine.linear_pol_shift(theta, omega0, ion, comb, trunc)
            scale = max(abs(closed), abs(general), 1e-30)
            worst = max(worst, abs(general - closed) / scale)
        return worst < 1e-10, f"max relative disagreement = {worst:.2e}"

    def zero_shift():
        omega0 = engine.effective_base_rate(config)
        kernel = engine.ShiftKernel(ion, comb, trunc)
        reference = abs(float(kernel.differential_angles(0.0, 0.0, math.pi / 8, 0.0, omega0)))
        worst = max(
            abs(float(kernel.differential_angles(0.0, 0.0, t, 0.0, omega0)))
            for t in (0.0, math.pi / 4, math.pi / 2)
        )
        return worst <= 1e-12 * reference, f"max null-angle shift = {worst:.2e} rad/s"

    def quadratic_scaling():
        kernel = engine.ShiftKernel(ion, comb, trunc)
        base = float(kernel.differential_angles(0.1, 0.2, 0.3, 0.05, 1.0))
        scaled = float(kernel.differential_angles(0.1, 0.2, 0.3, 0.05, 3.0))
        ok = abs(scaled / base - 9.0) < 1e-12
        return ok, f"shift(3 Omega0)/shift(Omega0) = {scaled / base:.15f}"

    def rabi_peak_shift():
        from .simulate import rabi_profile
        from .config import BeamGeometry

        worst = 0.0
        for offset in (2.0, 8.0, 20.0):
            b1 = BeamGeometry(waist_um=27.0, power_mw=1.0, center_um=0.0)
            b2 = BeamGeometry(waist_um=27.0, power_mw=1.0, center_um=offset)
            xs = np.linspace(-10, 30, 40001)
            peak = xs[int(np.argmax(rabi_profile(b1, b2, xs, 1.0)))]
            worst = max(worst, abs(peak - offset / 2))
        return worst < 1e-2, f"max |argmax - d/2| = {worst:.2e} um (grid-limited)"

    def sensitivity_limit():
        curve = sensitivity_analysis(27.0, math.pi / 4, [0.0, 0.01, 8.0])
        ok = (
            abs(curve.ratio[0] - 4.0) == 0.0
            and abs(curve.ratio[1] - 4.0) < 1e-3
            and 3.4 <= curve.ratio[2] <= 4.0
        )
        return ok, f"ratio(0) = {curve.ratio[0]:.6f}, ratio(8 um) = {curve.ratio[2]:.4f}"

    def scan_determinism():
        angles = np.radians(np.linspace(0, 180, 19))
        a = simulate_hwp_scan(config, angles, fast=True, seed=11).to_csv_text()
        b = simulate_hwp_scan(config, angles, fast=True, seed=11).to_csv_text()
        return a == b, "same seed reproduces identical CSV bytes"

    return [
        ("config-roundtrip", config_roundtrip),
        ("level-splitting-antisymmetry", splitting_antisymmetry),
        ("waveplate-unitarity", waveplate_unitarity),
        ("waveplate-closed-form", waveplate_closed_form),
        ("polarization-pipeline-equivalence", pipeline_equivalence),
        ("polarization-reconstruction", reconstruction),
        ("beatnote-integer-scan", beatnote_scan),
        ("envelope-sum-convergence", envelope_convergence),
        ("shift-closed-form-agreement", closed_form_shift),
        ("shift-zero-configuration", zero_shift),
        ("shift-quadratic-scaling", quadratic_scaling),
        ("rabi-peak-shift", rabi_peak_shift),
        ("sensitivity-limit-ratio", sensitivity_limit),
        ("scan-seed-determinism", scan_determinism),
    ]


def run_selftest(corrupt: str | None = None, emit=print) -> bool:
    """Run every check; returns True iff all pass."""
    config = config_from_dict(example_config())
    all_ok = True
    with _corruption(corrupt):
        for name, check in _checks(config):
            try:
                ok, detail = check()
            except Exception as exc:  # a crashed check is a failed check
                ok, detail = False, f"raised {type(exc).__name__}: {exc}"
            all_ok &= ok
            emit(f"{'PASS' if ok else 'FAIL'}  {name:<36} {detail}")
    emit(f"selftest: {'all checks passed' if all_ok else 'FAILURES detected'}")
    return all_ok
