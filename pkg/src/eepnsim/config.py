"""Run configuration: flat key-value config files and presets.

Config files are plain text, one ``key = value`` per line, with dotted
section keys (``fiber.length_km = 6600``).  ``#`` starts a comment.
Unknown keys are errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import FiberSpec, cd_memory_symbols
from .errors import ConfigurationError
from .transceiver import BpsConfig, McConfig

__all__ = ["RunConfig", "parse_config_text", "load_config", "paper_preset", "desk_preset"]


@dataclass(frozen=True)
class RunConfig:
    """Everything a seeded end-to-end run needs."""

    symbol_rate: float = 180e9
    rolloff: float = 0.05
    constellation: str = "16qam"
    n_symbols: int = 442_368
    sps: int = 2
    rrc_span_symbols: int = 128
    fiber: FiberSpec = field(default_factory=lambda: FiberSpec(23.0, 6600.0, 1550.0))
    linewidth: float = 70e3
    snr_db: float = 13.0
    mc: McConfig | None = None
    bps: BpsConfig = field(default_factory=BpsConfig)
    block_size_symbols: int = 2048
    mitigation_mode: str | None = None
    mitigation_taps: int = 61
    master_seed: int = 12345
    edge_discard_symbols: int | None = None

    def __post_init__(self) -> None:
        if self.n_symbols < 1:
            raise ConfigurationError("n_symbols must be positive")
        if self.sps < 1:
            raise ConfigurationError("sps must be >= 1")
        if self.mitigation_mode is not None and self.mitigation_mode not in (
            "optimized_timing",
            "higher_order",
        ):
            raise ConfigurationError(f"unknown mitigation mode {self.mitigation_mode!r}")
        memory = cd_memory_symbols(self.fiber, self.symbol_rate)
        if self.n_symbols < 4 * memory:
            warnings.warn(
                f"n_symbols = {self.n_symbols} is below 4x the dispersion memory "
                f"({memory} symbols); analysis blocks may be scarce",
                stacklevel=2,
            )

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.sps

    def auto_edge_discard(self) -> int:
        """Symbols to drop at each end: dispersion memory plus the pulse
        shaping and carrier-recovery guard (subcarrier-rate spans count at
        the aggregate rate)."""
        if self.edge_discard_symbols is not None:
            return int(self.edge_discard_symbols)
        per_stream = self.mc.n_subcarriers if self.mc is not None else 1
        guard = (self.rrc_span_symbols + self.bps.window_symbols // 2 + 1) * per_stream
        return cd_memory_symbols(self.fiber, self.symbol_rate) + guard

    def with_mc(self, n_subcarriers: int = 8) -> "RunConfig":
        mc = McConfig.contiguous(n_subcarriers, self.symbol_rate, self.rolloff)
        return replace(self, mc=mc)

    def without_mc(self) -> "RunConfig":
        return replace(self, mc=None)

    def canonical_text(self) -> str:
        """Stable textual form; also a valid config file."""
        lines = [
            f"symbol_rate_gbd = {self.symbol_rate / 1e9:.9g}",
            f"rolloff = {self.rolloff:.9g}",
            f"constellation = {self.constellation}",
            f"n_symbols = {self.n_symbols}",
            f"sps = {self.sps}",
            f"rrc_span_symbols = {self.rrc_span_symbols}",
            f"fiber.dispersion_ps_nm_km = {self.fiber.dispersion:.9g}",
            f"fiber.length_km = {self.fiber.length:.9g}",
            f"fiber.wavelength_nm = {self.fiber.wavelength:.9g}",
            f"linewidth_khz = {self.linewidth / 1e3:.9g}",
            f"snr_db = {self.snr_db:.9g}",
            f"bps.n_test_phases = {self.bps.n_test_phases}",
            f"bps.window_symbols = {self.bps.window_symbols}",
            f"bps.phase_range_rad = {self.bps.phase_range:.9g}",
            f"partition.block_size_symbols = {self.block_size_symbols}",
            f"master_seed = {self.master_seed}",
        ]
        if self.mc is not None:
            lines += [
                f"mc.n_subcarriers = {self.mc.n_subcarriers}",
                f"mc.per_subcarrier_rate_gbd = {self.mc.per_subcarrier_rate / 1e9:.9g}",
                f"mc.subcarrier_spacing_ghz = {self.mc.subcarrier_spacing / 1e9:.9g}",
            ]
        if self.mitigation_mode is not None:
            lines += [
                f"mitigation.mode = {self.mitigation_mode}",
                f"mitigation.n_taps = {self.mitigation_taps}",
            ]
        if self.edge_discard_symbols is not None:
            lines.append(f"edge_discard_symbols = {self.edge_discard_symbols}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a flat dict; reject malformed lines."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigurationError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"{key} must be an integer, got {value!r}") from None


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"{key} must be a number, got {value!r}") from None


def config_from_mapping(entries: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Build a RunConfig from flat config entries, starting from ``base``."""
    cfg = base if base is not None else RunConfig()
    fiber = cfg.fiber
    mc_fields: dict[str, float] = {}
    mitigation_mode = cfg.mitigation_mode
    mitigation_taps = cfg.mitigation_taps
    bps_fields = {
        "n_test_phases": cfg.bps.n_test_phases,
        "window_symbols": cfg.bps.window_symbols,
        "phase_range": cfg.bps.phase_range,
    }
    updates: dict = {}

    for key, value in entries.items():
        if key == "symbol_rate_gbd":
            updates["symbol_rate"] = _to_float(key, value) * 1e9
        elif key == "rolloff":
            updates["rolloff"] = _to_float(key, value)
        elif key == "constellation":
            updates["constellation"] = value.lower()
        elif key == "n_symbols":
            updates["n_symbols"] = _to_int(key, value)
        elif key == "sps":
            updates["sps"] = _to_int(key, value)
        elif key == "rrc_span_symbols":
            updates["rrc_span_symbols"] = _to_int(key, value)
        elif key == "fiber.dispersion_ps_nm_km":
            fiber = FiberSpec(_to_float(key, value), fiber.length, fiber.wavelength)
        elif key == "fiber.length_km":
            fiber = FiberSpec(fiber.dispersion, _to_float(key, value), fiber.wavelength)
        elif key == "fiber.wavelength_nm":
            fiber = FiberSpec(fiber.dispersion, fiber.length, _to_float(key, value))
        elif key == "linewidth_khz":
            updates["linewidth"] = _to_float(key, value) * 1e3
        elif key == "snr_db":
            updates["snr_db"] = math.inf if value == "inf" else _to_float(key, value)
        elif key == "mc.n_subcarriers":
            mc_fields["n_subcarriers"] = _to_int(key, value)
        elif key == "mc.per_subcarrier_rate_gbd":
            mc_fields["per_subcarrier_rate"] = _to_float(key, value) * 1e9
        elif key == "mc.subcarrier_spacing_ghz":
            mc_fields["subcarrier_spacing"] = _to_float(key, value) * 1e9
        elif key == "bps.n_test_phases":
            bps_fields["n_test_phases"] = _to_int(key, value)
        elif key == "bps.window_symbols":
            bps_fields["window_symbols"] = _to_int(key, value)
        elif key == "bps.phase_range_rad":
            bps_fields["phase_range"] = _to_float(key, value)
        elif key == "partition.block_size_symbols":
            updates["block_size_symbols"] = _to_int(key, value)
        elif key == "mitigation.mode":
            mitigation_mode = value
        elif key == "mitigation.n_taps":
            mitigation_taps = _to_int(key, value)
        elif key == "master_seed":
            updates["master_seed"] = _to_int(key, value)
        elif key == "edge_discard_symbols":
            updates["edge_discard_symbols"] = _to_int(key, value)
        else:
            raise ConfigurationError(f"unknown config key {key!r}")

    updates["fiber"] = fiber
    updates["bps"] = BpsConfig(**bps_fields)
    updates["mitigation_mode"] = mitigation_mode
    updates["mitigation_taps"] = mitigation_taps

    symbol_rate = updates.get("symbol_rate", cfg.symbol_rate)
    rolloff = updates.get("rolloff", cfg.rolloff)
    if mc_fields:
        n_sub = int(mc_fields.get("n_subcarriers", 0))
        if n_sub < 1:
            raise ConfigurationError("mc.n_subcarriers is required to enable subcarriers")
        rate = mc_fields.get("per_subcarrier_rate", symbol_rate / n_sub)
        spacing = mc_fields.get("subcarrier_spacing", (1.0 + rolloff) * rate)
        updates["mc"] = McConfig(n_sub, rate, spacing)
    elif base is not None:
        updates["mc"] = cfg.mc
    else:
        updates["mc"] = None

    return replace(cfg, **updates)


def load_config(path: "str | Path", base: RunConfig | None = None) -> RunConfig:
    text = Path(path).read_text()
    return config_from_mapping(parse_config_text(text), base)


def paper_preset() -> RunConfig:
    """Full-scale configuration: 180 GBd, 6600 km, 70 kHz linewidth."""
    return RunConfig()


def desk_preset() -> RunConfig:
    """Small, fast configuration for CI-scale runs (not an EEPN regime:
    the dispersion memory at 32 GBd over 660 km is below one symbol)."""
    return RunConfig(
        symbol_rate=32e9,
        n_symbols=32_768,
        fiber=FiberSpec(23.0, 660.0, 1550.0),
        linewidth=1e6,
    )
