"""Signal containers and frequency-domain filtering primitives.

All heavy lifting in the simulator goes through :func:`apply_frequency_response`.
The FFT bin convention used throughout the package: bin k of an N-point
transform maps to frequency k*df for k < N/2 and (k-N)*df otherwise, with
df = sample_rate / N (this is exactly ``numpy.fft.fftfreq``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, ParameterError

__all__ = [
    "ComplexSignal",
    "FrequencyGrid",
    "FirFilter",
    "rrc_taps",
    "apply_frequency_response",
    "apply_fir_centered",
    "resample",
]


@dataclass(frozen=True)
class ComplexSignal:
    """Uniformly sampled complex baseband waveform.

    Attributes
    ----------
    samples : ndarray of complex128
        Baseband amplitudes (dimensionless).
    sample_rate : float
        Samples per second, > 0.
    """

    samples: NDArray[np.complex128]
    sample_rate: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("signal must be a non-empty 1-D sample sequence")
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise ParameterError("sample_rate must be positive and finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def power(self) -> float:
        """Average |s|^2 per sample."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    def with_samples(self, samples: NDArray[np.complex128]) -> "ComplexSignal":
        return ComplexSignal(samples, self.sample_rate)


@dataclass(frozen=True)
class FrequencyGrid:
    """Discrete frequency grid of an N-point transform.

    ``ordering`` is "fft" (numpy fftfreq layout) or "monotone" (ascending).
    Spacing is uniform and equals sample_rate / transform_length.
    """

    frequencies: NDArray[np.float64]
    resolution: float
    ordering: str = "fft"

    def __post_init__(self) -> None:
        freqs = np.asarray(self.frequencies, dtype=np.float64)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ParameterError("frequency grid must be non-empty and 1-D")
        if self.ordering not in ("fft", "monotone"):
            raise ParameterError("ordering must be 'fft' or 'monotone'")
        object.__setattr__(self, "frequencies", freqs)

    def __len__(self) -> int:
        return self.frequencies.size

    @classmethod
    def for_transform(cls, n: int, sample_rate: float) -> "FrequencyGrid":
        """FFT-ordered grid of an n-point transform at the given rate."""
        if n < 1:
            raise ParameterError("transform length must be >= 1")
        return cls(np.fft.fftfreq(n, d=1.0 / sample_rate), sample_rate / n, "fft")


@dataclass(frozen=True)
class FirFilter:
    """FIR taps plus the group-delay center used for alignment bookkeeping."""

    taps: NDArray[np.complex128]
    nominal_delay: int

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=np.complex128)
        if taps.ndim != 1 or taps.size == 0:
            raise ParameterError("taps must be a non-empty 1-D sequence")
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.size

    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


def rrc_taps(rolloff: float, span_symbols: int, samples_per_symbol: int) -> FirFilter:
    """Root-raised-cosine taps, normalized to unit energy.

    Parameters
    ----------
    rolloff : float
        Excess-bandwidth factor in [0, 1].
    span_symbols : int
        Total filter span in symbol periods; the filter has
        span_symbols * samples_per_symbol + 1 taps (odd, symmetric).
        Spans >= 32 keep the cascaded-Nyquist residual below 1e-3.
    samples_per_symbol : int
        Oversampling factor, >= 1.

    Returns
    -------
    FirFilter
        Real symmetric taps with the center tap at ``nominal_delay``.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ParameterError(f"rolloff must be in [0, 1], got {rolloff}")
    if span_symbols < 1:
        raise ParameterError("span_symbols must be positive")
    if samples_per_symbol < 1:
        raise ParameterError("samples_per_symbol must be >= 1")

    sps = int(samples_per_symbol)
    half = span_symbols * sps // 2
    k = np.arange(-half, half + 1, dtype=np.float64)
    t = k / sps  # time in symbol periods
    beta = float(rolloff)

    h = np.empty_like(t)
    if beta == 0.0:
        h = np.sinc(t)
    else:
        # Regular points, then the two removable singularities.
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.sin(np.pi * t * (1 - beta)) + 4 * beta * t * np.cos(
                np.pi * t * (1 + beta)
            )
            den = np.pi * t * (1 - (4 * beta * t) ** 2)
            h = num / den
        h[t == 0.0] = 1 - beta + 4 * beta / np.pi
        sing = np.isclose(np.abs(t), 1.0 / (4 * beta))
        if np.any(sing):
            h[sing] = (beta / np.sqrt(2)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
            )

    h = h / np.sqrt(np.sum(h**2))
    return FirFilter(h.astype(np.complex128), nominal_delay=half)


ResponseFn = Callable[[FrequencyGrid], NDArray[np.complex128]]


def _evaluate_response(response: ResponseFn, grid: FrequencyGrid) -> NDArray[np.complex128]:
    values = np.asarray(response(grid), dtype=np.complex128)
    if values.shape != grid.frequencies.shape:
        raise ParameterError(
            "response must return one complex value per grid bin "
            f"(got shape {values.shape} for {len(grid)} bins)"
        )
    return values


def apply_frequency_response(
    signal: ComplexSignal,
    response: ResponseFn,
    *,
    block_length: int | None = None,
    memory: int | None = None,
) -> ComplexSignal:
    """Filter a signal by a frequency response evaluated per FFT bin.

    With the default ``block_length=None`` the whole signal is processed in
    a single transform of exactly its own length, so the action is circular
    and a response cascaded with its complex conjugate inverts exactly.
    Edge samples within the filter memory wrap around and must be discarded
    by the caller when linear-convolution semantics are required.

    With ``block_length`` set, overlap-save block processing is used:
    ``memory`` declares the two-sided impulse-response support in samples,
    blocks of ``block_length`` are transformed, and only the central
    ``block_length - memory`` samples of each block are kept.  Accuracy is
    then limited by the truncation of the true impulse response to the
    declared memory.

    Parameters
    ----------
    signal : ComplexSignal
    response : callable
        Maps a :class:`FrequencyGrid` to one complex value per bin.
    block_length : int, optional
        Overlap-save transform length; omit for whole-signal processing.
    memory : int, optional
        Declared filter memory in samples; required with ``block_length``.

    Returns
    -------
    ComplexSignal
        Same length and sample rate as the input.
    """
    x = signal.samples
    n = x.size

    if block_length is None:
        grid = FrequencyGrid.for_transform(n, signal.sample_rate)
        h = _evaluate_response(response, grid)
        return signal.with_samples(np.fft.ifft(np.fft.fft(x) * h))

    if memory is None:
        raise ConfigurationError("block processing requires a declared filter memory")
    block_length = int(block_length)
    memory = int(memory)
    if memory < 0:
        raise ParameterError("memory must be non-negative")
    if block_length - memory < 1:
        raise ConfigurationError(
            f"block overlap shorter than declared filter memory "
            f"({block_length} - {memory} < 1 useful sample per block)"
        )

    halo = (memory + 1) // 2
    useful = block_length - 2 * halo
    if useful < 1:
        raise ConfigurationError("block_length must exceed memory by at least one sample")

    grid = FrequencyGrid.for_transform(block_length, signal.sample_rate)
    h = _evaluate_response(response, grid)

    out = np.empty(n, dtype=np.complex128)
    for start in range(0, n, useful):
        stop = min(start + useful, n)
        lo = start - halo
        hi = stop + halo
        chunk = np.zeros(block_length, dtype=np.complex128)
        src_lo = max(lo, 0)
        src_hi = min(hi, n)
        chunk[src_lo - lo : src_lo - lo + (src_hi - src_lo)] = x[src_lo:src_hi]
        filtered = np.fft.ifft(np.fft.fft(chunk) * h)
        out[start:stop] = filtered[halo : halo + (stop - start)]
    return signal.with_samples(out)


def apply_fir_centered(signal: ComplexSignal, fir: FirFilter) -> ComplexSignal:
    """Apply an FIR filter with its group-delay center moved to lag zero.

    The taps are applied circularly via the whole-signal transform, with
    the center tap at delay 0, so symmetric filters act with zero phase and
    symbol positions are preserved exactly.
    """
    n = len(signal)
    taps = fir.taps
    if taps.size > n:
        raise ParameterError("signal shorter than filter taps")
    buf = np.zeros(n, dtype=np.complex128)
    c = fir.nominal_delay
    buf[: taps.size - c] = taps[c:]
    if c > 0:
        buf[-c:] = taps[:c]
    h = np.fft.fft(buf)
    return signal.with_samples(np.fft.ifft(np.fft.fft(signal.samples) * h))


def resample(
    signal: ComplexSignal,
    factor_up: int,
    factor_down: int = 1,
    *,
    down_offset: int = 0,
) -> ComplexSignal:
    """Integer-factor rate change: zero insertion, then decimation.

    Upsampling inserts ``factor_up - 1`` zeros after each sample (any
    shaping filter is applied separately); downsampling keeps every
    ``factor_down``-th sample starting at ``down_offset``.
    """
    if factor_up < 1 or factor_down < 1:
        raise ParameterError("resampling factors must be >= 1")
    if not 0 <= down_offset < factor_down:
        raise ParameterError("down_offset must lie in [0, factor_down)")

    x = signal.samples
    if factor_up > 1:
        up = np.zeros(x.size * factor_up, dtype=np.complex128)
        up[::factor_up] = x
        x = up
    if factor_down > 1:
        x = x[down_offset::factor_down]
    if x.size == 0:
        raise ParameterError("resampling produced an empty signal")
    rate = signal.sample_rate * factor_up / factor_down
    return ComplexSignal(x, rate)
