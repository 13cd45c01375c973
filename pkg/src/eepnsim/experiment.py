"""Seeded end-to-end runs, paired SC/MC experiments, and CSV serialization.

One master seed is split into named streams ("data", "awgn", "lo_phase"),
so paired runs consume identical data, noise, and oscillator realizations,
and changing one stream's consumer leaves the others bit-identical.

SNR bookkeeping: the configured snr_db is referenced to the symbol-rate
bandwidth (the usual amplified-spontaneous-emission convention), so the
white noise injected on the sps-times oversampled waveform carries sps
times the in-band noise power and the recovered symbols measure at the
configured SNR.  The waveform power is 1.0 by construction, which is used
as the explicit noise reference to keep paired runs bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import __version__
from .analysis import (
    BlockPartition,
    BlockReport,
    blockwise_snr,
    analyze_blocks,
    scaled_error_power,
)
from .channel import add_awgn, cd_response, cdc_response
from .config import RunConfig
from .core_dsp import ComplexSignal, apply_frequency_response
from .errors import ConfigurationError
from .mitigation import MitigationResult, mitigate
from .phase_noise import PhaseTrajectory, apply_phase, generate_wiener_phase
from .rng import substream
from .transceiver import (
    SymbolSequence,
    bps,
    generate_symbols,
    matched_filter_and_downsample,
    mc_demodulate,
    mc_modulate,
    round_robin_merge,
    sc_modulate,
)

__all__ = [
    "RunResult",
    "run_sc",
    "run_mc",
    "run_paired",
    "reproduce_figures",
    "write_blocks_csv",
    "write_phase_profiles_csv",
    "write_lo_trace_csv",
]


@dataclass(frozen=True)
class RunResult:
    """Everything one seeded run produced."""

    config: RunConfig
    system: str  # "sc" or "mc"
    x_analyzed: SymbolSequence
    y_analyzed: SymbolSequence
    block_reports: list[BlockReport]
    partition: BlockPartition
    analysis_start: int
    lo_trajectory: PhaseTrajectory
    bps_trajectory: PhaseTrajectory | None
    subcarrier_trajectories: list[PhaseTrajectory] | None
    subcarrier_centers: NDArray[np.float64] | None
    mitigation: dict[str, MitigationResult]
    overall_snr_db: float
    provenance: dict[str, str]
    # Received symbols just outside the analysis window, for reversal-filter
    # edge context in post-hoc mitigation passes.
    y_edge_context: tuple[NDArray[np.complex128], NDArray[np.complex128]] = (
        np.zeros(0, dtype=np.complex128),
        np.zeros(0, dtype=np.complex128),
    )

    @property
    def block_snr_db(self) -> NDArray[np.float64]:
        return np.array([r.snr_db for r in self.block_reports])

    def penalties_db(self, reports: "Sequence[BlockReport] | None" = None) -> NDArray[np.float64]:
        """Per-block SNR penalty relative to the trace median."""
        snrs = (
            np.array([r.snr_db for r in reports])
            if reports is not None
            else self.block_snr_db
        )
        return np.median(snrs) - snrs


def _edge_context(full: NDArray[np.complex128], start: int, stop: int, taps: int):
    half = (taps - 1) // 2
    return full[max(start - half, 0) : start], full[stop : stop + half]


def _overall_snr(x: SymbolSequence, y: SymbolSequence, partition: BlockPartition) -> float:
    sig = err = 0.0
    for sl in partition.slices():
        xb = x.symbols[sl]
        sig += float(np.sum(np.abs(xb) ** 2))
        err += scaled_error_power(xb, y.symbols[sl]) * xb.size
    if err == 0.0:
        return 80.0
    return min(10.0 * math.log10(sig / err), 80.0)


def _received_waveform(
    config: RunConfig, wave: ComplexSignal
) -> tuple[ComplexSignal, PhaseTrajectory]:
    """Fiber, noise loading, LO phase, and dispersion compensation."""
    fiber = config.fiber
    dispersed = apply_frequency_response(wave, partial(cd_response, fiber))
    # Reference the configured SNR to the symbol-rate bandwidth (see module
    # docstring); the waveform power is unity by construction.
    wave_snr_db = config.snr_db
    if math.isfinite(wave_snr_db):
        wave_snr_db = config.snr_db - 10.0 * math.log10(config.sps)
    noisy = add_awgn(
        dispersed,
        wave_snr_db,
        reference_power=1.0,
        seed=substream(config.master_seed, "awgn"),
    )
    lo = generate_wiener_phase(
        len(wave),
        config.linewidth,
        1.0 / config.sample_rate,
        substream(config.master_seed, "lo_phase"),
    )
    received = apply_phase(noisy, lo)
    compensated = apply_frequency_response(received, partial(cdc_response, fiber))
    return compensated, lo


def _analysis_window(config: RunConfig) -> tuple[int, BlockPartition]:
    edge = config.auto_edge_discard()
    analyzed = config.n_symbols - 2 * edge
    if analyzed < config.block_size_symbols:
        raise ConfigurationError(
            f"n_symbols = {config.n_symbols} leaves no full analysis block after "
            f"discarding 2 x {edge} edge symbols"
        )
    partition = BlockPartition.from_length(analyzed, config.block_size_symbols)
    return edge, partition


def _provenance(config: RunConfig) -> dict[str, str]:
    return {
        "config_hash": config.config_hash(),
        "master_seed": str(config.master_seed),
        "version": __version__,
    }


def _finish(
    config: RunConfig,
    system: str,
    x: SymbolSequence,
    y_full: SymbolSequence,
    lo: PhaseTrajectory,
    bps_trajectory: PhaseTrajectory | None,
    sub_trajectories: list[PhaseTrajectory] | None,
    sub_centers: NDArray[np.float64] | None,
) -> RunResult:
    edge, partition = _analysis_window(config)
    stop = edge + partition.total_symbols()
    x_a = x.slice(edge, stop)
    y_a = y_full.slice(edge, stop)
    reports = analyze_blocks(x_a, y_a, partition)

    mitigation: dict[str, MitigationResult] = {}
    if config.mitigation_mode is not None and system == "sc":
        lctx, rctx = _edge_context(y_full.symbols, edge, stop, config.mitigation_taps)
        mitigation[config.mitigation_mode] = mitigate(
            x_a,
            y_a,
            partition,
            config.mitigation_mode,
            config.mitigation_taps,
            left_context=lctx,
            right_context=rctx,
        )

    context = 512  # generous halo for any post-hoc reversal tap count
    return RunResult(
        config=config,
        system=system,
        x_analyzed=x_a,
        y_analyzed=y_a,
        block_reports=reports,
        partition=partition,
        analysis_start=edge,
        lo_trajectory=lo,
        bps_trajectory=bps_trajectory,
        subcarrier_trajectories=sub_trajectories,
        subcarrier_centers=sub_centers,
        mitigation=mitigation,
        overall_snr_db=_overall_snr(x_a, y_a, partition),
        provenance=_provenance(config),
        y_edge_context=(
            y_full.symbols[max(edge - context, 0) : edge],
            y_full.symbols[stop : stop + context],
        ),
    )


def run_sc(config: RunConfig) -> RunResult:
    """Single-carrier end-to-end run: generate, shape, fiber, noise, LO
    phase, dispersion compensation, matched filter, carrier recovery,
    blockwise analysis, optional mitigation."""
    if config.mc is not None:
        raise ConfigurationError("run_sc requires a configuration without subcarriers")
    x = generate_symbols(
        config.n_symbols, config.constellation, substream(config.master_seed, "data")
    ).with_rate(config.symbol_rate)
    wave = sc_modulate(x, config.rolloff, config.sps, span=config.rrc_span_symbols)
    compensated, lo = _received_waveform(config, wave)
    y0 = matched_filter_and_downsample(
        compensated,
        config.rolloff,
        config.sps,
        span=config.rrc_span_symbols,
        constellation=config.constellation,
    )
    y, estimate = bps(y0, config.bps)
    return _finish(config, "sc", x, y, lo, estimate, None, None)


def run_mc(config: RunConfig) -> RunResult:
    """Subcarrier-multiplexed run sharing the SC run's data, noise, and LO
    realization for the same master seed."""
    if config.mc is None:
        raise ConfigurationError("run_mc requires a subcarrier configuration")
    x = generate_symbols(
        config.n_symbols, config.constellation, substream(config.master_seed, "data")
    ).with_rate(config.symbol_rate)
    wave = mc_modulate(x, config.mc, config.rolloff, config.sps, span=config.rrc_span_symbols)
    compensated, lo = _received_waveform(config, wave)
    streams = mc_demodulate(
        compensated,
        config.mc,
        config.rolloff,
        span=config.rrc_span_symbols,
        constellation=config.constellation,
    )
    corrected = []
    trajectories = []
    for stream in streams:
        c, estimate = bps(stream, config.bps)
        corrected.append(c)
        trajectories.append(estimate)
    y = round_robin_merge(corrected)
    return _finish(
        config, "mc", x, y, lo, None, trajectories, config.mc.center_frequencies()
    )


def run_paired(config: RunConfig, n_subcarriers: int = 8) -> tuple[RunResult, RunResult]:
    """SC and MC runs over the same realization, with a common analysis
    window so block indices correspond one-to-one."""
    mc_config = config.with_mc(n_subcarriers) if config.mc is None else config
    sc_config = config.without_mc()
    edge = max(sc_config.auto_edge_discard(), mc_config.auto_edge_discard())
    sc_config = replace(sc_config, edge_discard_symbols=edge)
    mc_config = replace(mc_config, edge_discard_symbols=edge)
    return run_sc(sc_config), run_mc(mc_config)


# ---------------------------------------------------------------------------
# CSV serialization.  All numeric fields use 10 significant digits so files
# are bit-stable for identical configs.


def _fmt(value: float) -> str:
    return f"{value:.9e}"


def write_blocks_csv(
    path: "str | Path",
    result: RunResult,
    opt_timing: MitigationResult | None = None,
    higher_order: MitigationResult | None = None,
) -> Path:
    """Per-block trace: SNR before/after mitigation plus fit diagnostics."""
    path = Path(path)
    rows = ["block_index,t_start_ns,snr_db,snr_db_opt_timing,snr_db_higher_order,"
            "max_excursion_rad,timing_offset_ui,fit_order_selected"]
    t0 = result.analysis_start / result.config.symbol_rate * 1e9
    t_block = result.partition.block_size_symbols / result.config.symbol_rate * 1e9
    for i, report in enumerate(result.block_reports):
        after_ot = opt_timing.after[i].snr_db if opt_timing is not None else math.nan
        after_ho = higher_order.after[i].snr_db if higher_order is not None else math.nan
        rows.append(
            ",".join(
                [
                    str(report.block_index),
                    _fmt(t0 + i * t_block),
                    _fmt(report.snr_db),
                    _fmt(after_ot),
                    _fmt(after_ho),
                    _fmt(report.max_excursion_rad),
                    _fmt(report.timing_offset_ui),
                    str(report.fit_order_selected),
                ]
            )
        )
    path.write_text("\n".join(rows) + "\n")
    return path


def write_phase_profiles_csv(
    path: "str | Path",
    result: RunResult,
    block_indices: Iterable[int],
    opt_timing: MitigationResult | None = None,
    higher_order: MitigationResult | None = None,
) -> Path:
    """Phase-vs-frequency traces for selected blocks, before and after
    each reversal mode."""
    path = Path(path)
    rows = ["block_index,f_ghz,phase_rad,phase_after_opt_timing_rad,"
            "phase_after_higher_order_rad,weight"]
    for b in block_indices:
        profile = result.block_reports[b].phase_profile
        after_ot = opt_timing.after[b].phase_profile.phase if opt_timing else None
        after_ho = higher_order.after[b].phase_profile.phase if higher_order else None
        for j, f in enumerate(profile.frequencies):
            rows.append(
                ",".join(
                    [
                        str(b),
                        _fmt(f / 1e9),
                        _fmt(profile.phase[j]),
                        _fmt(after_ot[j] if after_ot is not None else math.nan),
                        _fmt(after_ho[j] if after_ho is not None else math.nan),
                        _fmt(profile.weight[j]),
                    ]
                )
            )
    path.write_text("\n".join(rows) + "\n")
    return path


def write_lo_trace_csv(path: "str | Path", result: RunResult) -> Path:
    """LO phase at symbol instants, plus per-subcarrier estimates for MC."""
    path = Path(path)
    sub = result.subcarrier_trajectories
    header = "t_ns,phi_rad"
    if sub is not None:
        header += "".join(f",sub{i}_phi_rad" for i in range(len(sub)))
    rows = [header]

    sps = result.config.sps
    if sub is None:
        lo_symbols = result.lo_trajectory.phases[::sps]
        period_ns = 1e9 / result.config.symbol_rate
        for k in range(lo_symbols.size):
            rows.append(f"{_fmt(k * period_ns)},{_fmt(lo_symbols[k])}")
    else:
        n_sub = len(sub)
        # Common time base: subcarrier symbol instants.
        length = len(sub[0])
        step = sps * n_sub
        lo_at_sub = result.lo_trajectory.phases[::step][:length]
        period_ns = 1e9 * n_sub / result.config.symbol_rate
        for k in range(length):
            cells = [_fmt(k * period_ns), _fmt(lo_at_sub[k])]
            cells += [_fmt(t.phases[k]) for t in sub]
            rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")
    return path


def _characteristic_blocks(result: RunResult, min_penalty_db: float = 0.3) -> list[int]:
    """Pick example blocks: the strongest linear-dominated penalty, the
    strongest quadratic-dominated penalty, and the strongest block needing
    order >= 3 ("linear-dominated" means the order-1 fit explains > 90 %
    of the weighted phase variance)."""
    penalties = result.penalties_db()
    chosen: list[int] = []

    def best(indices: list[int]) -> int | None:
        return max(indices, key=lambda i: penalties[i]) if indices else None

    linear = [
        r.block_index
        for r in result.block_reports
        if r.fit_order_selected == 1 and penalties[r.block_index] >= min_penalty_db
    ]
    quadratic = [
        r.block_index
        for r in result.block_reports
        if r.fit_order_selected == 2 and penalties[r.block_index] >= min_penalty_db
    ]
    higher = [
        r.block_index
        for r in result.block_reports
        if r.fit_order_selected >= 3 and penalties[r.block_index] >= min_penalty_db
    ]
    for group in (linear, quadratic, higher):
        pick = best(group)
        if pick is not None and pick not in chosen:
            chosen.append(pick)
    if not chosen:
        chosen = [int(np.argmax(penalties))]
    return chosen


def reproduce_figures(config: RunConfig, which: str, out_dir: "str | Path") -> list[Path]:
    """Produce the CSV file set for one of the headline experiments.

    "fig2": paired SC/MC run; blockwise SNR trace, LO/subcarrier phase
    trace, and raw phase-error profiles at characteristic blocks.
    "fig3": SC run with both reversal modes; blockwise SNR before/after
    and profiles with after-reversal traces.
    """
    if which not in ("fig2", "fig3"):
        raise ConfigurationError("figure selector must be 'fig2' or 'fig3'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    sc, mc = run_paired(config)
    ot = mitigate_result(sc, "optimized_timing")
    ho = mitigate_result(sc, "higher_order")

    blocks = _characteristic_blocks(sc)
    files = [
        write_blocks_csv(out / "blocks.csv", sc, ot, ho),
        write_phase_profiles_csv(out / "phase_profiles.csv", sc, blocks, ot, ho),
        write_lo_trace_csv(out / "lo_trace.csv", mc if which == "fig2" else sc),
    ]
    return files


def mitigate_result(result: RunResult, mode: str, n_taps: int | None = None) -> MitigationResult:
    """Run (or reuse) a reversal pass over a finished SC run."""
    if mode in result.mitigation and (
        n_taps is None or n_taps == result.config.mitigation_taps
    ):
        return result.mitigation[mode]
    taps = n_taps if n_taps is not None else result.config.mitigation_taps
    left, right = result.y_edge_context
    return mitigate(
        result.x_analyzed,
        result.y_analyzed,
        result.partition,
        mode,
        taps,
        left_context=left,
        right_context=right,
    )
