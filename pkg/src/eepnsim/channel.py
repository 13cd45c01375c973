"""Chromatic dispersion, its digital compensation, and AWGN loading.

Sign convention (fixed here, asserted in tests): the fiber applies
H(f) = exp(+j*pi*lambda^2*D*L*f^2 / c) and the compensator applies the
complex conjugate.  |H(f)| = 1 exactly, so both are energy preserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core_dsp import ComplexSignal, FrequencyGrid
from .errors import ParameterError
from .rng import resolve_rng

__all__ = [
    "C_VACUUM",
    "FiberSpec",
    "cd_response",
    "cdc_response",
    "add_awgn",
    "cd_delay_spread",
    "cd_memory_symbols",
]

C_VACUUM = 299_792_458.0  # m/s, exact


@dataclass(frozen=True)
class FiberSpec:
    """Dispersive fiber parameters.

    dispersion : ps/(nm*km); length : km; wavelength : nm.
    """

    dispersion: float
    length: float
    wavelength: float

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ParameterError("fiber length must be >= 0")
        if not self.wavelength > 0:
            raise ParameterError("wavelength must be positive")

    def quadratic_phase_coefficient(self) -> float:
        """Coefficient a in H(f) = exp(+j*a*f^2), a = pi*lambda^2*D*L/c [s^2]."""
        d_si = self.dispersion * 1e-12 / (1e-9 * 1e3)  # s/m^2
        lam = self.wavelength * 1e-9
        return math.pi * lam * lam * d_si * (self.length * 1e3) / C_VACUUM


def cd_response(fiber: FiberSpec, grid: FrequencyGrid) -> NDArray[np.complex128]:
    """Quadratic-phase chromatic-dispersion response, |H| = 1 per bin."""
    a = fiber.quadratic_phase_coefficient()
    return np.exp(1j * a * grid.frequencies**2)


def cdc_response(fiber: FiberSpec, grid: FrequencyGrid) -> NDArray[np.complex128]:
    """Exact conjugate of :func:`cd_response` per bin."""
    return np.conj(cd_response(fiber, grid))


def cd_delay_spread(fiber: FiberSpec, bandwidth: float) -> float:
    """Group-delay spread in seconds across the given bandwidth in Hz."""
    d_si = fiber.dispersion * 1e-12 / (1e-9 * 1e3)
    lam = fiber.wavelength * 1e-9
    return lam * lam * d_si * (fiber.length * 1e3) / C_VACUUM * bandwidth


def cd_memory_symbols(fiber: FiberSpec, symbol_rate: float) -> int:
    """Dispersion memory in symbols: delay spread across one symbol-rate
    bandwidth, rounded up."""
    return int(math.ceil(cd_delay_spread(fiber, symbol_rate) * symbol_rate))


def add_awgn(
    signal: ComplexSignal,
    snr_db: float,
    reference_power: "str | float" = "signal",
    seed: "int | np.random.Generator" = 0,
) -> ComplexSignal:
    """Add complex circular Gaussian noise at the requested per-sample SNR.

    The per-sample noise variance is reference_power / 10^(snr_db/10),
    split equally between real and imaginary parts.  ``snr_db = inf`` is
    the noise-disabled sentinel.  ``reference_power`` is either the string
    "signal" (measured average power of the input) or an explicit value.
    """
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ParameterError("snr_db must be finite or +inf")
    if snr_db == math.inf:
        return signal

    if reference_power == "signal":
        ref = signal.power()
    else:
        ref = float(reference_power)
        if not ref > 0:
            raise ParameterError("explicit reference power must be positive")

    variance = ref / 10.0 ** (snr_db / 10.0)
    rng = resolve_rng(seed)
    draws = rng.standard_normal((2, len(signal)))
    noise = np.sqrt(variance / 2.0) * (draws[0] + 1j * draws[1])
    return signal.with_samples(signal.samples + noise)
