"""Deterministic simulator and analysis toolkit for equalization-enhanced
phase noise (EEPN) in coherent optical links.

EEPN arises when local-oscillator phase noise passes through the long
digital chromatic-dispersion compensation filter.  This package simulates
the effect at full scale, characterizes it as a time-varying,
frequency-dependent phase error via cross-spectral estimation, and
reverses it blockwise with short all-pass FIR filters.
"""

__version__ = "0.1.0"

from .analysis import (
    BlockPartition,
    BlockReport,
    FrequencyPhaseProfile,
    PolynomialPhase,
    blockwise_snr,
    estimate_phase_error,
    fit_polynomial,
    max_excursion,
    timing_offset_from_slope,
)
from .channel import FiberSpec, add_awgn, cd_response, cdc_response
from .config import RunConfig, desk_preset, load_config, paper_preset
from .core_dsp import (
    ComplexSignal,
    FirFilter,
    FrequencyGrid,
    apply_frequency_response,
    resample,
    rrc_taps,
)
from .errors import (
    ConfigurationError,
    DesignError,
    EepnsimError,
    EstimationError,
    ParameterError,
)
from .experiment import RunResult, reproduce_figures, run_mc, run_paired, run_sc
from .mitigation import AllpassFirDesign, design_allpass, mitigate, reverse_block
from .phase_noise import PhaseTrajectory, apply_phase, generate_wiener_phase
from .transceiver import (
    BpsConfig,
    McConfig,
    SymbolSequence,
    bps,
    generate_symbols,
    matched_filter_and_downsample,
    mc_demodulate,
    mc_modulate,
    sc_modulate,
)
