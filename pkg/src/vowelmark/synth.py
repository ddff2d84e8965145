"""Synthetic sustained vowels for tests, demos and smoke runs.

A glottal source (band-limited pulse train with a time-varying F0) is
passed through a cascade of second-order formant resonators. Knobs for
jitter, shimmer, vibrato, breath noise and formant placement let the
generator imitate healthy or dysarthric phonation closely enough to drive
the whole pipeline without real recordings.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from .dataset import CorpusManifest, ManifestEntry, VoiceRecording, write_manifest, write_wav

FORMANTS = {
    "a": ((700.0, 90.0), (1200.0, 110.0), (2600.0, 160.0), (3400.0, 250.0)),
    "i": ((300.0, 60.0), (2200.0, 120.0), (3000.0, 180.0), (3600.0, 250.0)),
}


def harmonic_tone(f0, duration: float, sample_rate: float = 44100.0,
                  amplitudes=(1.0,), phase: float = 0.0) -> np.ndarray:
    """Sum of harmonics of a (possibly time-varying) F0 track.

    ``f0`` is a scalar or a callable of time in seconds. Harmonic ``p`` gets
    amplitude ``amplitudes[p-1]``; amplitudes may be callables of time too.
    Harmonics at or above Nyquist are dropped.
    """
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    f = f0(t) if callable(f0) else np.full_like(t, float(f0))
    phi = 2 * np.pi * np.cumsum(f) / sample_rate - 2 * np.pi * f[0] / sample_rate + phase
    out = np.zeros_like(t)
    for p, a in enumerate(amplitudes, start=1):
        amp = a(t) if callable(a) else a
        audible = p * f < 0.5 * sample_rate
        out += np.where(audible, amp * np.cos(p * phi), 0.0)
    return out


def pulse_train(f0, duration: float, sample_rate: float = 44100.0,
                fmax: float = 4000.0) -> np.ndarray:
    """Band-limited pulse train (equal-amplitude harmonics up to ``fmax``)."""
    f_lo = f0 if not callable(f0) else float(np.min(f0(np.linspace(0, duration, 64))))
    nharm = int(fmax // f_lo)
    x = harmonic_tone(f0, duration, sample_rate, amplitudes=[1.0] * nharm)
    return x / np.max(np.abs(x))


def formant_filter(x, sample_rate: float, formants) -> np.ndarray:
    """Cascade of unit-DC-gain two-pole resonators at (frequency, bandwidth) pairs."""
    y = np.asarray(x, dtype=float)
    for freq, bw in formants:
        r = np.exp(-np.pi * bw / sample_rate)
        theta = 2 * np.pi * freq / sample_rate
        a = [1.0, -2 * r * np.cos(theta), r * r]
        y = signal.lfilter([sum(a)], a, y)
    return y


def synth_vowel(vowel: str = "a", duration: float = 3.0, sample_rate: float = 44100.0,
                f0: float = 130.0, jitter: float = 0.003, shimmer: float = 0.02,
                vibrato_rate: float = 5.5, vibrato_depth: float = 0.003,
                flutter_rate: float = 11.0, flutter_depth: float = 0.0,
                noise: float = 0.01, f2_shift: float = 0.0, level: float = 0.5,
                onset: float = 0.05, seed=None) -> np.ndarray:
    """Glottal-pulse vowel with cycle-level jitter/shimmer and F0 modulation.

    Depths are relative (0.01 = 1 %); ``f2_shift`` moves F2 in Hz.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    f_track = f0 * (1 + vibrato_depth * np.sin(2 * np.pi * vibrato_rate * t + rng.uniform(0, 2 * np.pi))
                    + flutter_depth * np.sin(2 * np.pi * flutter_rate * t + rng.uniform(0, 2 * np.pi)))
    # glottal closure instants with per-cycle jitter and shimmer
    src = np.zeros(n)
    pos = rng.uniform(0, sample_rate / f0)
    pulse_len = 64
    k = np.arange(-pulse_len, pulse_len + 1)
    while pos < n - pulse_len - 1:
        i = int(pos)
        frac = pos - i
        kern = np.sinc(k - frac) * np.hanning(2 * pulse_len + 3)[1:-1]
        amp = 1.0 + shimmer * rng.standard_normal()
        lo = i - pulse_len
        if lo >= 0:
            src[lo:i + pulse_len + 1] += amp * kern
        period = sample_rate / f_track[min(i, n - 1)]
        pos += period * (1.0 + jitter * rng.standard_normal())
    # glottal spectral tilt: -12 dB/oct source shaped by a leaky integrator pair
    src = signal.lfilter([1.0], [1.0, -0.97], signal.lfilter([1.0], [1.0, -0.9], src))
    forms = [(f + (f2_shift if j == 1 else 0.0), bw) for j, (f, bw) in enumerate(FORMANTS[vowel])]
    y = formant_filter(src, sample_rate, forms)
    y = signal.lfilter([1.0, -0.97], [1.0], y)  # lip radiation
    y /= np.max(np.abs(y)) + 1e-12
    y += noise * rng.standard_normal(n)
    ramp = np.minimum(1.0, np.minimum(t, t[-1] - t) / max(onset, 1e-9))
    y *= ramp
    return level * y / (np.max(np.abs(y)) + 1e-12)


def synth_subject(label: int, seed, duration: float = 3.0, sample_rate: float = 44100.0):
    """(/a/, /i/) recordings of one synthetic speaker; label 1 mimics ALS phonation."""
    rng = np.random.default_rng(seed)
    female = rng.random() < 0.5
    f0 = rng.uniform(180, 240) if female else rng.uniform(100, 140)
    common = dict(sample_rate=sample_rate, f0=f0,
                  duration=duration * rng.uniform(0.8, 1.3),
                  vibrato_rate=rng.uniform(4.5, 6.5))
    if label:
        kw = dict(jitter=rng.uniform(0.004, 0.012), shimmer=rng.uniform(0.03, 0.08),
                  vibrato_depth=rng.uniform(0.002, 0.006),
                  flutter_depth=rng.uniform(0.004, 0.015), flutter_rate=rng.uniform(9.5, 13.0),
                  noise=rng.uniform(0.01, 0.04))
        f2i = -rng.uniform(150, 500)
        f2a = rng.uniform(0, 150)
    else:
        kw = dict(jitter=rng.uniform(0.001, 0.005), shimmer=rng.uniform(0.01, 0.04),
                  vibrato_depth=rng.uniform(0.001, 0.005), flutter_depth=rng.uniform(0.0, 0.002),
                  noise=rng.uniform(0.003, 0.02))
        f2i = rng.uniform(-100, 150)
        f2a = rng.uniform(-100, 50)
    seeds = rng.integers(0, 2 ** 32, size=2)
    a = synth_vowel("a", f2_shift=f2a, seed=int(seeds[0]), **kw, **common)
    i = synth_vowel("i", f2_shift=f2i, seed=int(seeds[1]), **kw, **common)
    return a, i


def synth_corpus(directory, n_als: int = 8, n_hc: int = 8, seed: int = 0,
                 duration: float = 3.0, sample_rate: int = 44100) -> CorpusManifest:
    """Write a small synthetic corpus of WAV files plus ``manifest.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ss = np.random.SeedSequence(seed)
    entries = []
    labels = [1] * n_als + [0] * n_hc
    for k, (label, child) in enumerate(zip(labels, ss.spawn(len(labels)))):
        sid = f"{k + 1:03d}"
        a, i = synth_subject(label, child, duration, sample_rate)
        for vowel, x in (("a", a), ("i", i)):
            path = directory / f"{sid}_{vowel}1.wav"
            write_wav(path, x, sample_rate)
            entries.append(ManifestEntry(sid, vowel, label, path))
    manifest = CorpusManifest(entries, directory / "manifest.csv")
    write_manifest(manifest, directory / "manifest.csv")
    return manifest


def as_recording(x, sample_rate: float = 44100.0, vowel: str = "a",
                 subject_id: str = "synthetic", label: int = 0) -> VoiceRecording:
    return VoiceRecording(np.asarray(x, dtype=float), sample_rate, subject_id, vowel, label)
