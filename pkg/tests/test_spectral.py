import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal

from vowelmark import spectral
from vowelmark.synth import as_recording, formant_filter, pulse_train

FS = 44100


def test_filterbank_layout():
    W = spectral.mel_filterbank(2048, FS)
    assert W.shape[0] == 20
    assert np.allclose(W.sum(axis=1), 1.0)
    freqs = np.fft.rfftfreq(2048, 1 / FS)[: W.shape[1]]
    assert freqs[-1] <= 4000
    centres = freqs[np.argmax(W, axis=1)]
    assert np.all(np.diff(centres) > 0)


def test_flat_bands_give_zero_cepstrum():
    c = spectral.cepstrum_from_bands(np.full(20, 3.7))
    assert np.max(np.abs(c)) < 1e-8


def test_cosine_band_profile():
    M = 20
    k = np.arange(1, M + 1)
    S = np.exp(np.cos((k - 0.5) * np.pi / M))
    c = spectral.cepstrum_from_bands(S)
    direct = [sum(np.log(S[j - 1]) * np.cos(m * (j - 0.5) * np.pi / M) for j in k)
              for m in range(1, 13)]
    assert np.allclose(c, direct, atol=1e-12)
    assert c[0] == pytest.approx(M / 2)
    assert np.max(np.abs(c[1:])) < 1e-10


def test_white_noise_has_small_mfcc(rng):
    rec = as_recording(0.1 * rng.standard_normal(2 * FS), FS)
    assert np.max(np.abs(spectral.mfcc(rec))) < 1.0


def test_gain_invariance(rng):
    x = 0.3 * formant_filter(pulse_train(130, 1.0, FS), FS, ((700, 90), (1200, 110)))
    x = x / np.max(np.abs(x)) * 0.4 + 1e-3 * rng.standard_normal(FS)
    a = spectral.mfcc(as_recording(x, FS))
    b = spectral.mfcc(as_recording(2 * x, FS))
    assert np.max(np.abs(a - b)) < 1e-8


def test_deltas_on_ramp_and_constant():
    frames = np.zeros((40, 12))
    frames[:, 0] = 0.1 * np.arange(40)
    d = spectral.delta_mfcc(frames)
    assert d[0] == pytest.approx(0.1)
    assert np.all(d[1:] == 0)
    assert np.all(spectral.delta_mfcc(np.ones((10, 12))) == 0)
    with pytest.raises(ValueError):
        spectral.delta_mfcc(np.ones((1, 12)))


def two_formant(freqs, rate=8000, dur=2.0):
    x = pulse_train(100.0, dur, rate, fmax=3900)
    return as_recording(formant_filter(x, rate, [(f, 60.0) for f in freqs]), rate)


def test_envelope_peaks_at_resonances():
    env = spectral.spectral_envelope(two_formant((700, 1200)))
    assert env.P == 256 and env.freqs[-1] == 4000
    peaks = env.freqs[signal.find_peaks(env.db)[0]]
    for f in (700, 1200):
        assert np.min(np.abs(peaks - f)) <= 50


def test_envelope_of_white_noise_is_flat(rng):
    env = spectral.spectral_envelope(as_recording(0.1 * rng.standard_normal(16000), 8000))
    assert np.ptp(env.db) < 6.0


def test_envelope_gain_invariance(rng):
    rec = two_formant((700, 1200))
    a = spectral.spectral_envelope(rec)
    b = spectral.spectral_envelope(as_recording(3 * rec.samples, rec.sample_rate))
    assert np.max(np.abs(a.db - b.db)) < 1e-8


def test_second_formant():
    env = spectral.spectral_envelope(two_formant((300, 2200)))
    assert spectral.second_formant(env, "i") == pytest.approx(2200, abs=50)
    assert spectral.f2_convergence(2200.0, 1200.0) == 1000.0
    flat = spectral.SpectralEnvelope(env.freqs, np.zeros(256), 24, np.array([1.0]))
    assert np.isnan(spectral.second_formant(flat, "i"))


envs = arrays(np.float64, 256, elements=st.floats(-60, 20))


@settings(max_examples=50, deadline=None)
@given(envs, envs, envs)
def test_distance_properties(a, b, c):
    d = spectral.envelope_distance
    assert d(a, b) == d(b, a)
    brute = sum(abs(float(x) - float(y)) for x, y in zip(a, b)) / 256
    assert d(a, b) == pytest.approx(brute, rel=1e-12, abs=1e-12)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


def test_distance_basics():
    e = np.linspace(-30, 0, 256)
    assert spectral.envelope_distance(e, e) == 0
    assert spectral.envelope_distance(e + 3, e) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        spectral.envelope_distance(e, e[:128])
