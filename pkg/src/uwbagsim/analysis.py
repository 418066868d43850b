"""Inverse pipeline: waveform deconvolution, power delay profiles, significant
component counting, cluster identification, and parameter re-estimation.

The estimation stage closes the loop with the generator: feeding it an
ensemble of synthetic realizations should recover the arrival rates and decay
constants they were generated with, which is the package's primary
self-consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import ChannelRealization, Tap
from .errors import EmptyInput, InsufficientData, ZeroTemplate
from .generator import DecayMode
from .waveform import SamplingGrid, WaveformRecord, DEFAULT_GRID

__all__ = [
    "Pdp",
    "ClusterEstimate",
    "ParamEstimate",
    "clean_deconvolve",
    "taps_to_realization",
    "compute_pdp",
    "count_significant_mpcs",
    "average_significant_mpcs",
    "identify_clusters",
    "estimate_params",
    "analysis_report",
]

PDP_FLOOR_DB = -100.0


@dataclass(frozen=True)
class Pdp:
    """Ensemble power delay profile, normalized so the peak sits at 0 dB."""

    time_ns: np.ndarray
    power_db: np.ndarray
    smoothed_db: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.time_ns) == len(self.power_db) == len(self.smoothed_db)):
            raise ValueError("pdp arrays must share one length")


@dataclass(frozen=True)
class ClusterEstimate:
    """One identified power cluster on a smoothed profile."""

    start_ns: float
    peak_ns: float
    end_ns: float
    peak_db: float
    member_mpc_indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not (self.start_ns <= self.peak_ns <= self.end_ns):
            raise ValueError("cluster must satisfy start <= peak <= end")


@dataclass(frozen=True)
class ParamEstimate:
    """Recovered multipath statistics from an ensemble of realizations."""

    n_clusters_hat: float
    cluster_rate_hat: float
    cluster_decay_hat: float
    ray_rate_hat: float
    ray_decay_hat: float
    n_realizations: int
    decay_mode: DecayMode

    def as_dict(self) -> dict:
        return {
            "n_clusters_hat": self.n_clusters_hat,
            "cluster_rate_per_ns_hat": self.cluster_rate_hat,
            "cluster_decay_hat": self.cluster_decay_hat,
            "ray_rate_per_ns_hat": self.ray_rate_hat,
            "ray_decay_hat": self.ray_decay_hat,
            "n_realizations": self.n_realizations,
            "decay_mode": self.decay_mode.value,
        }


def clean_deconvolve(
    rx: WaveformRecord,
    template: WaveformRecord,
    stop_frac: float = 0.2,
    max_iterations: int = 1000,
) -> list[Tap]:
    """Iterative peak-pick-and-subtract deconvolution of a received scan.

    Repeatedly locates the strongest correlation peak between the residual
    and the template, records a tap there (sign encoded as phase 0 or pi),
    and subtracts the scaled, shifted template. Iteration stops once the
    residual correlation peak falls below ``stop_frac`` of the initial peak,
    which realizes the sounder's relative amplitude threshold.
    """
    t = np.asarray(template.samples, dtype=float)
    energy = float(np.sum(t**2))
    if energy == 0.0:
        raise ZeroTemplate("template has no energy")
    m = t.shape[0]
    center_off = (m - 1) // 2

    residual = np.asarray(rx.samples, dtype=float).copy()
    n = residual.shape[0]
    step_ns = rx.grid.sample_step_ns

    picked: dict[int, float] = {}
    initial_peak = None
    for _ in range(max_iterations):
        corr = np.correlate(residual, t, mode="full")
        k = int(np.argmax(np.abs(corr)))
        peak = abs(float(corr[k]))
        if initial_peak is None:
            initial_peak = peak
            if initial_peak == 0.0:
                return []
        if peak < stop_frac * initial_peak:
            break
        amp = float(corr[k]) / energy
        start = k - (m - 1)  # template sample 0 aligned at this rx index
        center = start + center_off
        lo = max(0, start)
        hi = min(n, start + m)
        residual[lo:hi] -= amp * t[lo - start : hi - start]
        picked[center] = picked.get(center, 0.0) + amp

    taps = []
    for i, (center, amp) in enumerate(sorted(picked.items())):
        taps.append(
            Tap(
                delay_ns=center * step_ns,
                amplitude=abs(amp),
                phase_rad=0.0 if amp >= 0 else np.pi,
                cluster_index=0,
                ray_index=i,
            )
        )
    return taps


def taps_to_realization(
    taps: Sequence[Tap], window_ns: float = 100.0
) -> ChannelRealization:
    """Package extracted taps as a realization, e.g. for CSV export.

    Deconvolved taps share the generator's file schema, so a CLEANed scan
    can be written with ``write_realization_csv`` and fed back through the
    analysis pipeline.
    """
    ordered = sorted(taps, key=lambda t: t.delay_ns)
    return ChannelRealization(
        np.array([t.delay_ns for t in ordered], dtype=float),
        np.array([t.amplitude for t in ordered], dtype=float),
        np.array([t.phase_rad for t in ordered], dtype=float),
        np.array([t.cluster_index for t in ordered], dtype=int),
        np.array([t.ray_index for t in ordered], dtype=int),
        window_ns=window_ns,
    )


def _binned_powers(realization: ChannelRealization, grid: SamplingGrid) -> np.ndarray:
    """Tap powers accumulated into nearest-sample bins."""
    out = np.zeros(grid.n_samples)
    idx = np.rint(realization.delays_ns / grid.sample_step_ns).astype(int)
    idx = np.clip(idx, 0, grid.n_samples - 1)
    np.add.at(out, idx, realization.amplitudes**2)
    return out


def compute_pdp(
    inputs: Sequence[Union[ChannelRealization, WaveformRecord]],
    grid: SamplingGrid = DEFAULT_GRID,
    smoothing_window_samples: int = 25,
    floor_db: float = PDP_FLOOR_DB,
) -> Pdp:
    """Average per-bin power across scans, normalize, and smooth.

    Accepts either tap-domain realizations (powers binned on the grid) or
    sampled waveforms (per-sample squared values). Smoothing is a centered
    moving average applied to the linear profile before conversion to dB, so
    an isolated impulse spreads into a plateau one window wide and
    10*log10(window) down from its unsmoothed peak.
    """
    inputs = list(inputs)
    if not inputs:
        raise EmptyInput("need at least one realization or waveform")
    if smoothing_window_samples < 1:
        raise ValueError("smoothing window must be >= 1 sample")

    acc: Optional[np.ndarray] = None
    for item in inputs:
        if isinstance(item, ChannelRealization):
            profile = _binned_powers(item, grid)
        elif isinstance(item, WaveformRecord):
            profile = np.asarray(item.samples, dtype=float) ** 2
            grid = item.grid
        else:
            raise TypeError(f"unsupported pdp input: {type(item)!r}")
        acc = profile if acc is None else acc + profile
    mean_power = acc / len(inputs)

    peak = float(mean_power.max())
    if peak <= 0:
        raise EmptyInput("all input power is zero")
    normalized = mean_power / peak

    kernel = np.ones(smoothing_window_samples) / smoothing_window_samples
    smoothed = np.convolve(normalized, kernel, mode="same")

    with np.errstate(divide="ignore"):
        power_db = np.maximum(10.0 * np.log10(normalized), floor_db)
        smoothed_db = np.maximum(10.0 * np.log10(smoothed), floor_db)
    time_ns = np.arange(len(normalized)) * grid.sample_step_ns
    return Pdp(time_ns=time_ns, power_db=power_db, smoothed_db=smoothed_db)


def _tap_amplitudes(taps) -> np.ndarray:
    if isinstance(taps, ChannelRealization):
        return np.asarray(taps.amplitudes, dtype=float)
    arr = np.asarray(
        [t.amplitude if isinstance(t, Tap) else float(t) for t in taps], dtype=float
    )
    return arr


def count_significant_mpcs(taps, threshold_frac: float = 0.2) -> int:
    """Components at or above ``threshold_frac`` of the strongest amplitude."""
    amps = _tap_amplitudes(taps)
    if amps.size == 0:
        raise EmptyInput("no taps to count")
    return int(np.count_nonzero(amps >= threshold_frac * amps.max()))


def average_significant_mpcs(
    realizations: Iterable[ChannelRealization], threshold_frac: float = 0.2
) -> float:
    """Mean significant-component count across scans."""
    counts = [count_significant_mpcs(r, threshold_frac) for r in realizations]
    if not counts:
        raise EmptyInput("no realizations")
    return float(np.mean(counts))


def _extrema(values: np.ndarray) -> tuple[list[int], list[int]]:
    """Indices of local maxima and minima, plateau-tolerant.

    An extremum sits where a rising run gives way to a falling one (or vice
    versa); a flat stretch between them counts as part of the turn and the
    extremum lands at the start of the plateau. The first sample acts as a
    valley when the curve initially rises (a peak when it falls), and the
    end of the last sloped run closes the sequence symmetrically.
    """
    d = np.diff(values)
    nz = np.nonzero(d)[0]
    if nz.size == 0:
        return [], []

    peaks, valleys = [], []
    first_sign = 1 if d[nz[0]] > 0 else -1
    (valleys if first_sign > 0 else peaks).append(0)

    prev_sign = first_sign
    prev_pos = int(nz[0])
    for i in nz[1:]:
        sign = 1 if d[i] > 0 else -1
        if sign != prev_sign:
            # slope flipped; the previous run ended one sample after its
            # last nonzero step
            (peaks if prev_sign > 0 else valleys).append(prev_pos + 1)
            prev_sign = sign
        prev_pos = int(i)
    (peaks if prev_sign > 0 else valleys).append(prev_pos + 1)
    return peaks, valleys


def identify_clusters(
    pdp: Pdp,
    rise_fall_db: float = 10.0,
    min_peak_to_fall_ns: float = 2.0,
    mpc_delays_ns: Optional[Sequence[float]] = None,
) -> list[ClusterEstimate]:
    """Mechanical cluster segmentation of a smoothed profile.

    A candidate opens at a peak that rises at least ``rise_fall_db`` above
    the preceding local minimum (the profile start counts as an opening
    rise). It closes at the next slope change lying at least
    ``rise_fall_db`` below the peak, and is admitted only when that
    peak-to-fall span lasts ``min_peak_to_fall_ns`` or more. Admitted
    clusters are disjoint and ordered; when the component delays are given,
    each cluster also lists the component indices inside its span.
    """
    s = np.asarray(pdp.smoothed_db, dtype=float)
    t = np.asarray(pdp.time_ns, dtype=float)
    peaks, valleys = _extrema(s)
    if not peaks:
        return []

    clusters: list[ClusterEstimate] = []
    prev_end_idx = -1
    for p in peaks:
        if p <= prev_end_idx:
            continue
        prior = [v for v in valleys if v < p and v >= prev_end_idx]
        if prior:
            rise = s[p] - s[prior[-1]]
            start_idx = prior[-1]
        else:
            rise = np.inf  # opening edge of the profile
            start_idx = prev_end_idx + 1 if prev_end_idx >= 0 else 0
        if rise < rise_fall_db:
            continue
        falls = [v for v in valleys if v > p and s[p] - s[v] >= rise_fall_db]
        if falls:
            end_idx = falls[0]
        elif s[p] - s[-1] >= rise_fall_db:
            end_idx = s.size - 1
        else:
            continue  # never decays enough to close
        if t[end_idx] - t[p] < min_peak_to_fall_ns:
            continue
        members: tuple[int, ...] = ()
        if mpc_delays_ns is not None:
            delays = np.asarray(mpc_delays_ns, dtype=float)
            inside = np.nonzero((delays >= t[start_idx]) & (delays <= t[end_idx]))[0]
            members = tuple(int(i) for i in inside)
        clusters.append(
            ClusterEstimate(
                start_ns=float(t[start_idx]),
                peak_ns=float(t[p]),
                end_ns=float(t[end_idx]),
                peak_db=float(s[p]),
                member_mpc_indices=members,
            )
        )
        prev_end_idx = end_idx
    return clusters


def estimate_params(
    realizations: Iterable[ChannelRealization],
    decay_mode: DecayMode = DecayMode.RATE,
) -> ParamEstimate:
    """Re-extract multipath statistics from an ensemble of realizations.

    Arrival rates come from the censored-exponential maximum-likelihood
    estimator (arrival events over observed exposure; with the pinned first
    cluster this reduces to ``(mean cluster count - 1) / window``). Decay
    constants come from a least-squares fit of per-tap log power against
    cluster start time and ray offset, read out in the requested decay
    convention. A deterministic direct-path tap, when present, is excluded
    from the power fit.
    """
    n_real = 0
    window = None
    cluster_count_sum = 0
    ray_events = 0
    ray_exposure = 0.0
    xtx = np.zeros((3, 3))
    xty = np.zeros(3)

    for realization in realizations:
        n_real += 1
        window = realization.window_ns
        ids = realization.cluster_ids()
        starts = realization.cluster_starts()
        n_c = starts.size
        cluster_count_sum += n_c
        ray_events += len(realization) - n_c
        ray_exposure += float(np.sum(realization.window_ns - starts))

        start_of = dict(zip(ids.tolist(), starts.tolist()))
        t_per_tap = np.array([start_of[c] for c in realization.cluster_indices.tolist()])
        tau = realization.delays_ns - t_per_tap
        amps = realization.amplitudes
        mask = amps > 0
        if realization.has_los:
            mask = mask.copy()
            mask[0] = False
        if np.any(mask):
            logp = 2.0 * np.log(amps[mask])
            design = np.column_stack(
                [np.ones(np.count_nonzero(mask)), t_per_tap[mask], tau[mask]]
            )
            xtx += design.T @ design
            xty += design.T @ logp

    if n_real == 0:
        raise EmptyInput("no realizations")
    cluster_events = cluster_count_sum - n_real
    if cluster_events < 1 or ray_events < 1:
        raise InsufficientData(
            "ensemble carries no inter-arrival information "
            f"(cluster events={cluster_events}, ray events={ray_events})"
        )

    n_clusters_hat = cluster_count_sum / n_real
    cluster_rate_hat = (n_clusters_hat - 1.0) / window
    ray_rate_hat = ray_events / ray_exposure

    coeffs = np.linalg.solve(xtx, xty)
    slope_t, slope_tau = -coeffs[1], -coeffs[2]
    if decay_mode is DecayMode.RATE:
        cluster_decay_hat, ray_decay_hat = slope_t, slope_tau
    else:
        if slope_t <= 0 or slope_tau <= 0:
            raise InsufficientData("nonpositive decay slope; cannot invert to time constants")
        cluster_decay_hat, ray_decay_hat = 1.0 / slope_t, 1.0 / slope_tau

    return ParamEstimate(
        n_clusters_hat=float(n_clusters_hat),
        cluster_rate_hat=float(cluster_rate_hat),
        cluster_decay_hat=float(cluster_decay_hat),
        ray_rate_hat=float(ray_rate_hat),
        ray_decay_hat=float(ray_decay_hat),
        n_realizations=n_real,
        decay_mode=decay_mode,
    )


def analysis_report(
    realizations: Sequence[ChannelRealization],
    decay_mode: DecayMode = DecayMode.RATE,
    grid: SamplingGrid = DEFAULT_GRID,
    smoothing_window_samples: int = 25,
    rise_fall_db: float = 10.0,
    min_peak_to_fall_ns: float = 2.0,
    threshold_frac: float = 0.2,
    config_echo: Optional[dict] = None,
) -> dict:
    """Full JSON-ready analysis of an ensemble: PDP, clusters, counts, estimates."""
    realizations = list(realizations)
    pdp = compute_pdp(realizations, grid, smoothing_window_samples)
    clusters = identify_clusters(pdp, rise_fall_db, min_peak_to_fall_ns)
    significant = average_significant_mpcs(realizations, threshold_frac)
    try:
        estimates = estimate_params(realizations, decay_mode).as_dict()
    except InsufficientData as exc:
        estimates = {"error": str(exc)}
    return {
        "pdp": {
            "time_ns": [float(x) for x in pdp.time_ns],
            "power_db": [float(x) for x in pdp.power_db],
            "smoothed_db": [float(x) for x in pdp.smoothed_db],
        },
        "clusters": [
            {
                "start_ns": c.start_ns,
                "peak_ns": c.peak_ns,
                "end_ns": c.end_ns,
                "peak_db": c.peak_db,
                "member_mpc_indices": list(c.member_mpc_indices),
            }
            for c in clusters
        ],
        "significant_mpc_avg": significant,
        "estimates": estimates,
        "config": dict(config_echo or {}),
    }
