"""Receiver local-oscillator phase noise as a discrete Wiener process.

The phase starts at zero and accumulates independent Gaussian increments
with variance 2*pi*linewidth*sample_period per step.  A zero start keeps
trajectories comparable across seeds; any constant offset is removed by
carrier phase recovery downstream anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core_dsp import ComplexSignal
from .errors import ParameterError
from .rng import resolve_rng

__all__ = ["PhaseTrajectory", "generate_wiener_phase", "apply_phase", "increment_variance"]


@dataclass(frozen=True)
class PhaseTrajectory:
    """Per-sample phase values in radians."""

    phases: NDArray[np.float64]
    sample_period: float

    def __post_init__(self) -> None:
        phases = np.asarray(self.phases, dtype=np.float64)
        if phases.ndim != 1 or phases.size == 0:
            raise ParameterError("phase trajectory must be non-empty and 1-D")
        if not np.all(np.isfinite(phases)):
            raise ParameterError("phase trajectory contains non-finite values")
        if not self.sample_period > 0:
            raise ParameterError("sample_period must be positive")
        object.__setattr__(self, "phases", phases)

    def __len__(self) -> int:
        return self.phases.size

    def decimated(self, factor: int, offset: int = 0) -> "PhaseTrajectory":
        return PhaseTrajectory(self.phases[offset::factor], self.sample_period * factor)


def increment_variance(linewidth: float, sample_period: float) -> float:
    """Variance of one Wiener phase increment: 2*pi*linewidth*sample_period."""
    return 2.0 * np.pi * linewidth * sample_period


def generate_wiener_phase(
    n_samples: int,
    linewidth: float,
    sample_period: float,
    seed: "int | np.random.Generator",
) -> PhaseTrajectory:
    """Draw one Wiener phase-noise realization.

    Parameters
    ----------
    n_samples : int
        Trajectory length; the first phase is exactly 0.
    linewidth : float
        Full laser linewidth in Hz, >= 0.
    sample_period : float
        Seconds between samples.
    seed : int or Generator
        Identical seeds give identical trajectories.
    """
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    if linewidth < 0:
        raise ParameterError("linewidth must be non-negative")
    if not sample_period > 0:
        raise ParameterError("sample_period must be positive")

    rng = resolve_rng(seed)
    sigma = np.sqrt(increment_variance(linewidth, sample_period))
    increments = rng.normal(0.0, sigma, size=n_samples - 1)
    phases = np.empty(n_samples, dtype=np.float64)
    phases[0] = 0.0
    np.cumsum(increments, out=phases[1:])
    return PhaseTrajectory(phases, sample_period)


def apply_phase(signal: ComplexSignal, trajectory: PhaseTrajectory) -> ComplexSignal:
    """Multiply a signal by exp(j*phi[k]) sample by sample."""
    if len(signal) != len(trajectory):
        raise ParameterError(
            f"signal ({len(signal)}) and trajectory ({len(trajectory)}) lengths differ"
        )
    return signal.with_samples(signal.samples * np.exp(1j * trajectory.phases))
