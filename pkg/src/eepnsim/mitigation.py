"""Time-varying all-pass FIR reversal of blockwise phase errors.

Per block, the estimated (or order-1 fitted) phase error phi(f) is turned
into a short all-pass FIR with response exp(-j*phi(f)) and applied at
symbol rate.  The filter only ever sees the reference and received
symbols; the local-oscillator trajectory is not reachable from here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.signal.windows import tukey

from .analysis import (
    BlockPartition,
    BlockReport,
    FrequencyPhaseProfile,
    PolynomialPhase,
    analyze_blocks,
    estimate_phase_error,
    fit_polynomial,
)
from .errors import DesignError, ParameterError
from .transceiver import BpsConfig, SymbolSequence, bps

__all__ = [
    "REVERSAL_MODES",
    "AllpassFirDesign",
    "design_allpass",
    "reverse_block",
    "mitigate",
    "MitigationResult",
    "BlockMitigation",
]

REVERSAL_MODES = ("optimized_timing", "higher_order")


@dataclass(frozen=True)
class AllpassFirDesign:
    """Designed reversal filter and its achieved response."""

    taps: NDArray[np.complex128]
    target_phase: FrequencyPhaseProfile
    achieved_phase: FrequencyPhaseProfile
    magnitude_ripple_db: float

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=np.complex128)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ParameterError("tap count must be odd")
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.size


def _target_on_dense_grid(
    target: "FrequencyPhaseProfile | PolynomialPhase",
    dense_freqs: NDArray[np.float64],
) -> tuple[NDArray[np.float64], FrequencyPhaseProfile]:
    """Evaluate the target phase on the design grid, holding out-of-band
    bins at the nearest band-edge value."""
    if isinstance(target, PolynomialPhase):
        f_norm = np.clip(dense_freqs / target.freq_scale_hz, -1.0, 1.0)
        phase = np.polynomial.polynomial.polyval(f_norm, target.coefficients)
        half_bw = target.freq_scale_hz
        grid = np.linspace(-half_bw, half_bw, 257)
        profile = FrequencyPhaseProfile(
            grid,
            np.polynomial.polynomial.polyval(grid / half_bw, target.coefficients),
            np.ones(grid.size),
            half_bw,
        )
        return phase, profile
    # np.interp clamps to the end values outside the grid, which is exactly
    # the nearest-edge extension we want.
    phase = np.interp(dense_freqs, target.frequencies, target.phase)
    return phase, target


def design_allpass(
    target: "FrequencyPhaseProfile | PolynomialPhase",
    n_taps: int = 61,
    *,
    grid_size: int = 1024,
    taper: float = 0.5,
) -> AllpassFirDesign:
    """Frequency-sampling design of an all-pass FIR with phase -target.

    The response exp(-j*phi(f)) is sampled on a dense symbol-rate FFT grid,
    inverse transformed, centered, truncated to ``n_taps`` and tapered with
    a raised-cosine (Tukey) window.  The achieved phase and the in-band
    magnitude ripple are reported alongside the taps.

    Raises
    ------
    DesignError
        If the target's group delay exceeds the delay capacity
        (n_taps - 1) / 2 of the requested filter.
    """
    if n_taps < 1 or n_taps % 2 == 0:
        raise ParameterError("n_taps must be odd and >= 1")
    if grid_size < 4 * n_taps:
        raise ParameterError("design grid must oversample the taps (>= 4x)")

    scale = target.freq_scale_hz
    symbol_rate = 2.0 * scale
    dense = np.fft.fftfreq(grid_size, d=1.0 / symbol_rate)
    phase_dense, target_profile = _target_on_dense_grid(target, dense)

    # Delay capacity: max group delay of the target in symbol periods.
    order = np.argsort(dense)
    dphi = np.diff(phase_dense[order])
    df = np.diff(dense[order])
    group_delay = np.abs(dphi / df) * symbol_rate / (2.0 * np.pi)
    if group_delay.max(initial=0.0) > (n_taps - 1) / 2:
        raise DesignError(
            f"target group delay {group_delay.max():.2f} samples exceeds the "
            f"capacity {(n_taps - 1) / 2} of a {n_taps}-tap filter"
        )

    impulse = np.fft.ifft(np.exp(-1j * phase_dense))
    half = (n_taps - 1) // 2
    taps = np.roll(impulse, half)[:n_taps]
    taps = taps * tukey(n_taps, taper)

    # Achieved response back on the dense grid, center tap at lag 0.
    buf = np.zeros(grid_size, dtype=np.complex128)
    buf[: half + 1] = taps[half:]
    if half > 0:
        buf[-half:] = taps[:half]
    achieved = np.fft.fft(buf)

    in_band = np.abs(dense) <= scale
    mag = np.abs(achieved[in_band])
    ripple_db = float(np.max(np.abs(20.0 * np.log10(mag))))

    mono = np.argsort(dense[in_band])
    ach_freqs = dense[in_band][mono]
    # Achieved phase with the designed sign convention: response exp(-j*phi)
    # reverses a phase error +phi, so report phi = -angle(H).
    ach_phase = -np.unwrap(np.angle(achieved[in_band][mono]))
    anchor = np.argmin(np.abs(ach_freqs - target_profile.frequencies[np.argmax(target_profile.weight)]))
    ach_phase -= 2.0 * np.pi * np.round(
        (ach_phase[anchor] - np.interp(ach_freqs[anchor], target_profile.frequencies, target_profile.phase))
        / (2.0 * np.pi)
    )
    achieved_profile = FrequencyPhaseProfile(
        ach_freqs, ach_phase, np.ones(ach_freqs.size), scale
    )
    return AllpassFirDesign(taps, target_profile, achieved_profile, ripple_db)


def reverse_block(
    block: SymbolSequence,
    design: AllpassFirDesign,
    *,
    left_context: NDArray[np.complex128] | None = None,
    right_context: NDArray[np.complex128] | None = None,
) -> SymbolSequence:
    """Apply a reversal filter to one block, preserving alignment.

    The filter is centered (zero group delay at the middle tap), so the
    output block stays aligned with the reference.  Edge samples use the
    supplied neighboring samples; missing context is zero-padded, which
    degrades up to (n_taps-1)/2 samples at the affected edge.
    """
    half = (len(design) - 1) // 2
    left = np.zeros(half, dtype=np.complex128)
    right = np.zeros(half, dtype=np.complex128)
    if left_context is not None and half > 0:
        ctx = np.asarray(left_context, dtype=np.complex128)[-half:]
        left[half - ctx.size :] = ctx
    if right_context is not None and half > 0:
        ctx = np.asarray(right_context, dtype=np.complex128)[:half]
        right[: ctx.size] = ctx

    extended = np.concatenate([left, block.symbols, right])
    corrected = np.convolve(extended, design.taps, mode="valid")
    return block.with_symbols(corrected)


@dataclass(frozen=True)
class BlockMitigation:
    """Before/after reports and the filter used for one block."""

    before: BlockReport
    after: BlockReport
    design: AllpassFirDesign


@dataclass(frozen=True)
class MitigationResult:
    corrected: SymbolSequence
    blocks: list[BlockMitigation]

    @property
    def before(self) -> list[BlockReport]:
        return [b.before for b in self.blocks]

    @property
    def after(self) -> list[BlockReport]:
        return [b.after for b in self.blocks]


def mitigate(
    x: SymbolSequence,
    y: SymbolSequence,
    partition: BlockPartition,
    mode: str,
    n_taps: int = 61,
    *,
    left_context: NDArray[np.complex128] | None = None,
    right_context: NDArray[np.complex128] | None = None,
    bps_refresh: BpsConfig | None = None,
    fit_orders: Sequence[int] = tuple(range(1, 10)),
) -> MitigationResult:
    """Estimate and reverse the phase error of every block of y.

    ``mode`` selects the reversal target per block: "optimized_timing"
    reverses the order-1 (linear) fit of the estimated phase error,
    "higher_order" reverses the estimated profile itself.  Filters are
    designed independently per block and applied in order with overlap
    taken from the neighboring raw samples (or the optional explicit edge
    contexts at the first/last block).

    ``bps_refresh`` optionally re-runs carrier recovery on the corrected
    sequence afterwards (off by default).
    """
    if mode not in REVERSAL_MODES:
        raise ParameterError(f"mode must be one of {REVERSAL_MODES}")
    if partition.total_symbols() > len(y):
        raise ParameterError("partition exceeds the sequence length")

    before = analyze_blocks(x, y, partition, fit_orders=fit_orders)
    ya = y.symbols
    corrected = ya.copy()
    designs = []
    for report, sl in zip(before, partition.slices()):
        if mode == "optimized_timing":
            target = report.fits.get(1) or fit_polynomial(report.phase_profile, 1)
        else:
            target = report.phase_profile
        design = design_allpass(target, n_taps)
        lctx = ya[max(sl.start - (n_taps - 1) // 2, 0) : sl.start]
        if sl.start == 0 and left_context is not None:
            lctx = np.asarray(left_context, dtype=np.complex128)
        rctx = ya[sl.stop : sl.stop + (n_taps - 1) // 2]
        if sl.stop >= len(y) and right_context is not None:
            rctx = np.asarray(right_context, dtype=np.complex128)
        block = reverse_block(
            y.slice(sl.start, sl.stop), design, left_context=lctx, right_context=rctx
        )
        corrected[sl] = block.symbols
        designs.append(design)

    out = y.with_symbols(corrected)
    if bps_refresh is not None:
        out, _ = bps(out, bps_refresh)

    after = analyze_blocks(x, out, partition, fit_orders=fit_orders)
    blocks = [
        BlockMitigation(b, a, d) for b, a, d in zip(before, after, designs)
    ]
    return MitigationResult(out, blocks)
