import numpy as np
import pytest
from scipy import signal

from vowelmark import pitch
from vowelmark.synth import as_recording, pulse_train

FS = 44100


def test_pulse_train_contour(pulse_120):
    c = pitch.track_f0(pulse_120)
    assert c.step == 0.005
    assert np.allclose(np.diff(c.times), 0.005, atol=1 / FS)
    assert c.voiced.all()
    assert np.max(np.abs(c.f0 - 120.0)) <= 0.5
    assert c.mean_f0 == pytest.approx(120.0, abs=0.5)


def test_glide_is_monotone():
    glide = lambda t: 100.0 + 50.0 * t  # 100 -> 200 Hz over 2 s
    rec = as_recording(0.5 * pulse_train(glide, 2.0, FS), FS)
    c = pitch.track_f0(rec)
    f = c.voiced_values()
    assert np.all(np.diff(f) > 0)
    assert f[0] == pytest.approx(glide(c.times[0]), abs=2)
    assert f[-1] == pytest.approx(glide(c.times[-1]), abs=2)


def test_noise_is_unvoiceable(rng):
    with pytest.raises(pitch.UnvoicedError) as err:
        pitch.track_f0(as_recording(0.3 * rng.standard_normal(3 * FS), FS))
    assert err.value.diagnostics["voiced_fraction"] < 0.5


def test_voiced_values_in_band(rng):
    x = 0.5 * pulse_train(200.0, 2.0, FS) + 0.05 * rng.standard_normal(2 * FS)
    c = pitch.track_f0(as_recording(x, FS))
    f = c.voiced_values()
    assert np.all((f >= 60) & (f <= 450))


def test_segmentation_of_pulse_train(pulse_120):
    seg = pitch.segment_periods(pulse_120, pitch.track_f0(pulse_120))
    assert 350 <= seg.N <= 360
    period = FS / 120
    assert np.all(np.abs(seg.T0 * FS - period) <= 1)
    assert np.all(np.diff(seg.boundaries) > 0)
    assert seg.boundaries[0] >= 0 and seg.boundaries[-1] < len(pulse_120.samples)
    assert np.all(seg.A > 0)
    ratio = seg.T0[1:] / seg.T0[:-1]
    assert np.all((ratio >= 0.5) & (ratio <= 2.0))
    covered = (seg.boundaries[-1] - seg.boundaries[0]) / len(pulse_120.samples)
    assert covered >= 0.8


def test_integer_period_is_exact():
    rec = as_recording(0.4 * pulse_train(147.0, 2.0, FS), FS)  # 300 samples
    seg = pitch.segment_periods(rec, pitch.track_f0(rec))
    assert np.median(seg.T0) == 300 / FS
    from vowelmark.perturb import jitter_local
    assert jitter_local(seg.T0) <= 1e-6


def test_sawtooth_amplitude():
    t = np.arange(2 * FS) / FS
    x = 0.5 * signal.sawtooth(2 * np.pi * 200.0 * t)
    rec = as_recording(x, FS)
    seg = pitch.segment_periods(rec, pitch.track_f0(rec))
    assert np.all(np.abs(seg.A - 0.5) <= 0.005)


def test_time_shift_equivariance():
    x = 0.4 * pulse_train(147.0, 2.0, FS)
    base = pitch.segment_periods(as_recording(x, FS), pitch.track_f0(as_recording(x, FS)))
    k = 37
    y = np.concatenate([np.zeros(k), x[:-k]])
    shifted = pitch.segment_periods(as_recording(y, FS), pitch.track_f0(as_recording(y, FS)))
    common = np.intersect1d(base.boundaries + k, shifted.boundaries)
    assert len(common) >= 0.95 * min(base.N, shifted.N)


def test_too_short_recording():
    rec = as_recording(0.5 * pulse_train(120.0, 0.1, FS), FS)
    with pytest.raises((pitch.InsufficientCyclesError, pitch.UnvoicedError)):
        c = pitch.track_f0(rec)
        pitch.segment_periods(rec, c)
    contour = pitch.track_f0(as_recording(0.5 * pulse_train(120.0, 1.0, FS), FS))
    with pytest.raises(pitch.InsufficientCyclesError):
        pitch.segment_periods(as_recording(0.5 * pulse_train(120.0, 0.1, FS), FS), contour)


def test_debug_dump(tmp_path, pulse_120):
    c = pitch.track_f0(pulse_120)
    seg = pitch.segment_periods(pulse_120, c)
    pitch.write_debug(tmp_path / "dbg.tsv", c, seg)
    lines = (tmp_path / "dbg.tsv").read_text().splitlines()
    assert len(lines) == 1 + len(c.times) + len(seg.boundaries)
