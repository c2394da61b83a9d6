"""Four-photon light-shift toolkit for comb-driven hyperfine ion qubits.

Models the differential light shift a single mode-locked Raman beam imparts
to a hyperfine qubit, simulates the calibration scans used to measure it
(Ramsey fringes, power/HWP/position scans), and fits those scans back to
beam polarization, field orientation, waist, and alignment.
"""

from .config import (
    ALL_STATES,
    BeamGeometry,
    CombSpec,
    ExperimentConfig,
    FieldGeometry,
    IonSpecies,
    NoiseModel,
    QubitState,
    config_from_dict,
    example_config,
    level_splitting,
    load_config,
    load_config_file,
)
from .engine import (
    BeatnoteResolution,
    EnvelopeFactor,
    RabiCouplings,
    ShiftKernel,
    base_rabi_rate,
    differential_shift,
    envelope_factor,
    fourth_order_shift,
    linear_pol_shift,
    nearest_beatnote,
    rabi_couplings,
)
from .errors import ConfigError, FitError, ResonanceError
from .fitting import (
    FitResult,
    SensitivityCurve,
    alignment_report,
    fit_beam_profile,
    fit_frequency,
    fit_hwp_scan,
    fit_power_law,
    sensitivity_analysis,
)
from .polarization import (
    IonFrameBasis,
    SphericalPolarization,
    apply_waveplates,
    embed_lab,
    hwp_matrix,
    ion_frame_basis,
    polarization_closed_form,
    polarization_pipeline,
    qwp_matrix,
    reconstruct_lab,
    spherical_components,
)
from .simulate import (
    ScanDataset,
    axis_intensity,
    axis_waist_um,
    rabi_profile,
    ramsey_probability,
    simulate_hwp_scan,
    simulate_position_scan,
    simulate_power_scan,
    simulate_rabi_scan,
    simulate_ramsey,
)

__version__ = "0.1.0"
