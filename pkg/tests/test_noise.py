import numpy as np
import pytest

from vowelmark import noise, pitch
from vowelmark.synth import as_recording, formant_filter, harmonic_tone, pulse_train

FS = 44100


def periodic_plus_noise(snr_db, rng, f0=150.0, dur=2.0):
    x = pulse_train(f0, dur, FS)
    x /= np.sqrt(np.mean(x ** 2))
    n = rng.standard_normal(len(x)) * 10 ** (-snr_db / 20)
    return as_recording(0.1 * (x + n), FS)


def test_pure_tone_hits_ceiling():
    rec = as_recording(0.5 * harmonic_tone(150.0, 2.0, FS), FS)
    assert noise.hnr(rec, pitch.track_f0(rec)) == pytest.approx(60.0)


def test_equal_power_mix_is_near_zero_db(rng):
    rec = periodic_plus_noise(0.0, rng)
    assert noise.hnr(rec, pitch.track_f0(rec)) == pytest.approx(0.0, abs=1.0)


def test_hnr_decreases_with_noise(rng):
    values = []
    for snr in (20, 0, -20):
        rec = periodic_plus_noise(snr, rng)
        contour = pitch.track_f0(periodic_plus_noise(40, rng))  # voicing from the clean signal
        values.append(noise.hnr(rec, contour))
    assert values[0] > values[1] > values[2]
    assert all(-20 <= v <= 60 for v in values)


def test_no_voiced_frames(rng):
    rec = as_recording(0.3 * rng.standard_normal(FS), FS)
    c = pitch.track_f0(as_recording(0.5 * pulse_train(150.0, 1.0, FS), FS))
    silent = pitch.F0Contour(c.times, np.full_like(c.f0, np.nan), np.zeros_like(c.voiced),
                             c.strength)
    with pytest.raises(ValueError, match="no voiced frames"):
        noise.hnr(rec, silent)


def glottal_like(f0=120.0, dur=2.0):
    x = pulse_train(f0, dur, FS)
    return formant_filter(x, FS, ((700, 90), (1200, 110), (2600, 160)))


def test_gne_orders_pulses_above_noise(rng):
    pulses = as_recording(0.5 * glottal_like() / np.max(np.abs(glottal_like())), FS)
    g_pulse, sd = noise.gne(pulses)
    g_noise, _ = noise.gne(as_recording(0.3 * rng.standard_normal(2 * FS), FS))
    assert g_pulse >= 0.85
    assert g_noise < g_pulse
    assert sd >= 0


def test_gne_is_deterministic_and_gain_invariant():
    x = glottal_like()
    x = 0.5 * x / np.max(np.abs(x))
    a = noise.gne(as_recording(x, FS))
    assert noise.gne(as_recording(x, FS)) == a
    b = noise.gne(as_recording(0.05 * x, FS))
    assert abs(a[0] - b[0]) < 1e-6


def test_gne_frames_bounded(rng):
    x = glottal_like() + 0.2 * rng.standard_normal(2 * FS)
    g = noise.gne_frames(as_recording(0.3 * x / np.max(np.abs(x)), FS))
    assert np.all((g >= 0) & (g <= 1))


def test_gne_too_short():
    with pytest.raises(ValueError):
        noise.gne(as_recording(np.ones(FS // 4), FS))
