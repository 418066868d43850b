"""Pulse-level forward model on the sounder's sampling grid.

A scan is synthesized by dropping a Gaussian-envelope carrier pulse on every
tap: the envelope width is set by the nominal 1 ns pulse duration (measured
between the -20 dB envelope points), the carrier rides at the radio's center
frequency, and each tap's phase enters as a carrier phase offset. Tap delays
snap to the nearest retained sample; the raw delay-bin resolution times the
decimation factor gives the ~61 ps sample step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import ChannelRealization
from .errors import DelayOutOfWindow, MalformedFile
from .generator import _atomic_write_text

__all__ = [
    "SamplingGrid",
    "WaveformRecord",
    "template_pulse",
    "render",
    "write_waveform_csv",
    "read_waveform_csv",
    "waveform_to_json",
    "waveform_from_json",
]

DEFAULT_CENTER_FREQ_HZ = 4.3e9
DEFAULT_PULSE_DURATION_NS = 1.0

# Gaussian envelope: exp(-t^2 / (2 sigma^2)) hits 0.1 (-20 dB) at
# t = sigma * sqrt(2 ln 10), so the duration between those points fixes sigma.
_SIGMA_PER_DURATION = 1.0 / (2.0 * math.sqrt(2.0 * math.log(10.0)))

# Envelope support kept out to a 1e-8 relative floor, far below the sounder's
# dynamic range.
_SUPPORT_SIGMAS = math.sqrt(2.0 * math.log(1e8))


@dataclass(frozen=True)
class SamplingGrid:
    """Receiver time base: raw delay bins, decimation, and scan window."""

    bin_ps: float = 1.9073
    decimation: int = 32
    window_ns: float = 100.0

    def __post_init__(self) -> None:
        if self.bin_ps <= 0 or self.decimation < 1 or self.window_ns <= 0:
            raise ValueError("invalid sampling grid")

    @property
    def sample_step_ps(self) -> float:
        return self.bin_ps * self.decimation

    @property
    def sample_step_ns(self) -> float:
        return self.sample_step_ps / 1000.0

    @property
    def n_samples(self) -> int:
        """Samples that fit inside the window (floor, never overrunning it)."""
        return int(math.floor(self.window_ns * 1000.0 / self.sample_step_ps))

    def time_ns(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_step_ns


DEFAULT_GRID = SamplingGrid()


@dataclass(frozen=True)
class WaveformRecord:
    """Sampled real-valued waveform on a grid.

    A full channel scan has exactly ``grid.n_samples`` samples; the template
    pulse reuses the type with a short, odd-length, center-symmetric array.
    """

    samples: np.ndarray
    grid: SamplingGrid

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def is_full_scan(self) -> bool:
        return len(self) == self.grid.n_samples

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples**2))


def _envelope_and_carrier(
    grid: SamplingGrid, center_freq_hz: float, duration_ns: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Sampled envelope and quadrature carriers on a centered support.

    Returns (envelope, cos carrier, sin carrier, half_width_samples).
    """
    sigma_ns = duration_ns * _SIGMA_PER_DURATION
    half = int(math.ceil(_SUPPORT_SIGMAS * sigma_ns / grid.sample_step_ns))
    t_rel = np.arange(-half, half + 1) * grid.sample_step_ns
    env = np.exp(-(t_rel**2) / (2.0 * sigma_ns**2))
    omega_t = 2.0 * math.pi * center_freq_hz * 1e-9 * t_rel
    return env, np.cos(omega_t), np.sin(omega_t), half


def template_pulse(
    grid: SamplingGrid = DEFAULT_GRID,
    center_freq_hz: float = DEFAULT_CENTER_FREQ_HZ,
    duration_ns: float = DEFAULT_PULSE_DURATION_NS,
) -> WaveformRecord:
    """Unit-peak sounding pulse: Gaussian-windowed carrier, center-symmetric."""
    if duration_ns <= 0:
        raise ValueError("duration_ns must be > 0")
    env, cos_c, _, _ = _envelope_and_carrier(grid, center_freq_hz, duration_ns)
    return WaveformRecord(env * cos_c, grid)


def render(
    realization: ChannelRealization,
    grid: SamplingGrid = DEFAULT_GRID,
    center_freq_hz: float = DEFAULT_CENTER_FREQ_HZ,
    duration_ns: float = DEFAULT_PULSE_DURATION_NS,
    snr_db: Optional[float] = None,
    noise_seed: int = 0,
) -> WaveformRecord:
    """Convolve the tap set with the sounding pulse on the sampling grid.

    Each tap contributes amplitude * envelope(t - delay) *
    cos(carrier * (t - delay) + phase), with the delay snapped to the nearest
    sample. With ``snr_db`` set, white Gaussian noise is added at that
    per-sample SNR relative to the noiseless waveform's mean-square level;
    the noise stream is fixed by ``noise_seed``.
    """
    if len(realization) and float(np.max(realization.delays_ns)) >= grid.window_ns:
        worst = float(np.max(realization.delays_ns))
        raise DelayOutOfWindow(f"tap at {worst} ns exceeds the {grid.window_ns} ns window")
    if len(realization) and float(np.min(realization.delays_ns)) < 0:
        raise DelayOutOfWindow("negative tap delay")

    env, cos_c, sin_c, half = _envelope_and_carrier(grid, center_freq_hz, duration_ns)
    base_i = env * cos_c
    base_q = env * sin_c

    n = grid.n_samples
    out = np.zeros(n)
    step_ns = grid.sample_step_ns
    for delay, amp, phase in zip(
        realization.delays_ns, realization.amplitudes, realization.phases_rad
    ):
        center = int(round(delay / step_ns))
        lo = max(0, center - half)
        hi = min(n, center + half + 1)
        if lo >= hi:
            continue
        src = slice(lo - (center - half), hi - (center - half))
        out[lo:hi] += amp * (
            math.cos(phase) * base_i[src] - math.sin(phase) * base_q[src]
        )

    if snr_db is not None:
        signal_power = float(np.mean(out**2))
        sigma = math.sqrt(signal_power / 10.0 ** (snr_db / 10.0)) if signal_power > 0 else 0.0
        rng = np.random.default_rng(np.random.SeedSequence(entropy=noise_seed, spawn_key=(1,)))
        out = out + rng.normal(0.0, sigma, size=n)

    return WaveformRecord(out, grid)


# --- Serialization ----------------------------------------------------------


def write_waveform_csv(record: WaveformRecord, path: Union[str, Path]) -> None:
    """(sample_index, time_ns, value) rows; 17 significant digits round-trip."""
    step = record.grid.sample_step_ns
    lines = ["sample_index,time_ns,value"]
    for i, v in enumerate(record.samples):
        lines.append(f"{i:d},{i * step:.17g},{v:.17g}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_waveform_csv(path: Union[str, Path], grid: SamplingGrid = DEFAULT_GRID) -> WaveformRecord:
    path = Path(path)
    values = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedFile(str(path), 1, "empty file")
    if lines[0].strip() != "sample_index,time_ns,value":
        raise MalformedFile(str(path), 1, "expected header 'sample_index,time_ns,value'")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedFile(str(path), lineno, f"expected 3 fields, got {len(parts)}")
        try:
            values.append(float(parts[2]))
        except ValueError as exc:
            raise MalformedFile(str(path), lineno, str(exc)) from None
    return WaveformRecord(np.array(values), grid)


def waveform_to_json(record: WaveformRecord) -> dict:
    return {
        "grid": {
            "bin_ps": record.grid.bin_ps,
            "decimation": record.grid.decimation,
            "window_ns": record.grid.window_ns,
        },
        "samples": [float(v) for v in record.samples],
    }


def waveform_from_json(doc: dict) -> WaveformRecord:
    grid = SamplingGrid(
        bin_ps=float(doc["grid"]["bin_ps"]),
        decimation=int(doc["grid"]["decimation"]),
        window_ns=float(doc["grid"]["window_ns"]),
    )
    return WaveformRecord(np.array(doc["samples"], dtype=float), grid)


def write_waveform_json(record: WaveformRecord, path: Union[str, Path]) -> None:
    _atomic_write_text(path, json.dumps(waveform_to_json(record)) + "\n")
