import math

import numpy as np
import pytest
from scipy.signal import hilbert

from uwbagsim.core import ChannelRealization
from uwbagsim.errors import DelayOutOfWindow, MalformedFile
from uwbagsim.waveform import (
    DEFAULT_GRID,
    SamplingGrid,
    read_waveform_csv,
    render,
    template_pulse,
    waveform_from_json,
    waveform_to_json,
    write_waveform_csv,
)

STEP_NS = DEFAULT_GRID.sample_step_ns


def _taps(entries, window=100.0, los=0.0):
    entries = sorted(entries)
    delays = np.array([e[0] for e in entries], dtype=float)
    amps = np.array([e[1] for e in entries], dtype=float)
    phases = np.array([e[2] if len(e) > 2 else 0.0 for e in entries], dtype=float)
    n = delays.size
    return ChannelRealization(
        delays, amps, phases, np.zeros(n, int), np.arange(n), window_ns=window, los_amplitude=los
    )


def test_grid_constants():
    assert DEFAULT_GRID.sample_step_ps == pytest.approx(61.0336)
    assert DEFAULT_GRID.n_samples == 1638
    n, step = DEFAULT_GRID.n_samples, DEFAULT_GRID.sample_step_ps
    assert n * step <= DEFAULT_GRID.window_ns * 1000.0 < (n + 1) * step


def test_grid_validation():
    with pytest.raises(ValueError):
        SamplingGrid(bin_ps=0.0)
    with pytest.raises(ValueError):
        SamplingGrid(decimation=0)


def test_template_unit_peak_and_symmetry():
    tpl = template_pulse()
    s = tpl.samples
    assert len(s) % 2 == 1
    center = len(s) // 2
    assert s[center] == 1.0
    assert np.max(np.abs(s)) == 1.0
    assert np.allclose(s, s[::-1], atol=1e-12)


def test_template_envelope_width_is_pulse_duration():
    tpl = template_pulse()
    env = np.abs(hilbert(tpl.samples))
    level = 0.1 * env.max()
    above = np.nonzero(env >= level)[0]

    def crossing(i0, i1):
        return i0 + (level - env[i0]) / (env[i1] - env[i0]) * (i1 - i0)

    lo = crossing(above[0] - 1, above[0])
    hi = crossing(above[-1], above[-1] + 1)
    width_ns = (hi - lo) * STEP_NS
    assert abs(width_ns - 1.0) <= STEP_NS


def test_template_spectrum_band():
    # frozen from the DFT of the shipped pulse: peak on the carrier, -10 dB
    # band [3.264, 5.336] GHz, mostly overlapping the radio's 3.1-4.8 GHz
    tpl = template_pulse()
    nfft = 65536
    spec = np.abs(np.fft.rfft(tpl.samples, nfft))
    freqs = np.fft.rfftfreq(nfft, d=STEP_NS * 1e-9)
    assert freqs[np.argmax(spec)] == pytest.approx(4.3e9, rel=1e-3)
    band = freqs[spec >= spec.max() * 10 ** (-0.5)]
    assert band[0] == pytest.approx(3.2636e9, rel=1e-3)
    assert band[-1] == pytest.approx(5.3364e9, rel=1e-3)
    overlap = min(band[-1], 4.8e9) - max(band[0], 3.1e9)
    assert overlap / (band[-1] - band[0]) > 0.7


def test_template_duration_scales_sigma():
    wide = template_pulse(duration_ns=2.0)
    narrow = template_pulse(duration_ns=0.5)
    assert len(wide) > len(narrow)


def test_render_identity_channel():
    tpl = template_pulse()
    half = len(tpl) // 2
    rec = render(_taps([(0.0, 1.0, 0.0)]))
    # tap at delay 0: the right half of the center-symmetric pulse is in view
    assert np.allclose(rec.samples[: half + 1], tpl.samples[half:], atol=1e-12)
    assert np.allclose(rec.samples[half + 1 :], 0.0)


def test_render_full_template_at_interior_delay():
    tpl = template_pulse()
    center = 200
    rec = render(_taps([(center * STEP_NS, 1.0, 0.0)]))
    half = len(tpl) // 2
    segment = rec.samples[center - half : center + half + 1]
    assert np.allclose(segment, tpl.samples, atol=1e-12)


def test_render_two_equal_taps_resolved():
    rec = render(_taps([(20.0, 1.0, 0.0), (30.0, 1.0, 0.0)]))
    i0 = int(round(20.0 / STEP_NS))
    i1 = int(round(30.0 / STEP_NS))
    assert rec.samples[i0] == pytest.approx(rec.samples[i1], rel=1e-9)
    assert rec.samples[i0] == pytest.approx(1.0, rel=1e-6)


def test_render_phase_pi_flips_sign():
    up = render(_taps([(20.0, 1.0, 0.0)]))
    down = render(_taps([(20.0, 1.0, math.pi)]))
    assert np.allclose(up.samples, -down.samples, atol=1e-12)


def test_render_energy_superposition():
    tpl = template_pulse()
    amps = [1.0, 0.6, 0.3]
    rng = np.random.default_rng(5)
    phases = rng.uniform(0, 2 * math.pi, size=3)
    entries = [(20.0, amps[0], phases[0]), (50.0, amps[1], phases[1]), (80.0, amps[2], phases[2])]
    rec = render(_taps(entries))
    expected = sum(a * a for a in amps) * tpl.energy
    assert rec.energy == pytest.approx(expected, rel=0.01)


def test_render_linearity():
    base = _taps([(10.0, 0.5, 1.0), (40.0, 0.2, 4.0)])
    scaled = _taps([(10.0, 1.5, 1.0), (40.0, 0.6, 4.0)])
    a = render(base)
    b = render(scaled)
    assert np.allclose(b.samples, 3.0 * a.samples, rtol=1e-12, atol=1e-15)


def test_render_shift_covariance():
    k = 40
    a = render(_taps([(200 * STEP_NS, 1.0, 0.5)]))
    b = render(_taps([((200 + k) * STEP_NS, 1.0, 0.5)]))
    assert np.allclose(b.samples[k:], a.samples[:-k], atol=1e-12)


def test_render_peak_amplitudes_recoverable():
    entries = [(10.0, 1.0, 0.0), (30.0, 0.5, 0.0), (60.0, 0.25, 0.0)]
    rec = render(_taps(entries))
    for delay, amp, _ in entries:
        idx = int(round(delay / STEP_NS))
        assert rec.samples[idx] == pytest.approx(amp, rel=0.02)


def test_render_delay_outside_grid_window():
    taps = _taps([(60.0, 1.0, 0.0)], window=200.0)
    with pytest.raises(DelayOutOfWindow):
        render(taps, SamplingGrid(window_ns=50.0))


def test_render_noise_is_seeded_and_leveled():
    taps = _taps([(20.0, 1.0, 0.0)])
    a = render(taps, snr_db=20.0, noise_seed=42)
    b = render(taps, snr_db=20.0, noise_seed=42)
    c = render(taps, snr_db=20.0, noise_seed=43)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    clean = render(taps)
    noise = a.samples - clean.samples
    snr = np.mean(clean.samples**2) / np.mean(noise**2)
    assert 10 * np.log10(snr) == pytest.approx(20.0, abs=1.0)


def test_waveform_csv_round_trip(tmp_path):
    rec = render(_taps([(10.0, 1.0, 0.3), (33.0, 0.4, 2.0)]))
    path = tmp_path / "waveform.csv"
    write_waveform_csv(rec, path)
    back = read_waveform_csv(path)
    assert np.array_equal(back.samples, rec.samples)
    assert path.read_text().splitlines()[0] == "sample_index,time_ns,value"


def test_waveform_csv_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sample_index,time_ns,value\n0,0.0,1.0\n1,0.061\n")
    with pytest.raises(MalformedFile) as err:
        read_waveform_csv(path)
    assert err.value.line == 3


def test_waveform_json_round_trip():
    rec = render(_taps([(10.0, 1.0, 0.3)]))
    back = waveform_from_json(waveform_to_json(rec))
    assert np.array_equal(back.samples, rec.samples)
    assert back.grid == rec.grid


def test_full_scan_flag():
    rec = render(_taps([(10.0, 1.0, 0.0)]))
    assert rec.is_full_scan
    assert not template_pulse().is_full_scan
