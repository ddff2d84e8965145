"""MFCC statistics, all-pole spectral envelopes, F2 and the /a/-/i/ envelope distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._dsp import frame_signal, levinson, local_maxima, parabolic_peak
from .dataset import VoiceRecording, resample_signal

N_MFCC = 12
N_MEL = 20
MFCC_FMAX = 4000.0
ENVELOPE_POINTS = 256
ENVELOPE_ORDER = 24
ENVELOPE_RATE = 8000.0
F2_BANDS = {"i": (1500.0, 3200.0), "a": (900.0, 1800.0)}


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(nfft: int, sample_rate: float, n_bands: int = N_MEL,
                   fmax: float = MFCC_FMAX) -> np.ndarray:
    """Triangular mel bands over ``[0, fmax]``, 50 % overlap, rows summing to one.

    Rows are normalized so each band energy is the weighted average of the
    magnitude spectrum under its triangle. Columns cover rfft bins up to fmax.
    """
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    freqs = freqs[freqs <= fmax]
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(fmax), n_bands + 2))
    W = np.zeros((n_bands, len(freqs)))
    for k in range(n_bands):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        W[k] = np.maximum(0.0, np.minimum(up, down))
        if W[k].sum() == 0:  # band narrower than a bin: nearest bin
            W[k, np.argmin(np.abs(freqs - mid))] = 1.0
    return W / W.sum(axis=1, keepdims=True)


def cepstrum_from_bands(S, n_coeffs: int = N_MFCC) -> np.ndarray:
    """MFCC(m) = sum_k ln S(k) cos(m (k - 0.5) pi / M), m = 1..n_coeffs, along the last axis."""
    S = np.asarray(S, dtype=float)
    M = S.shape[-1]
    k = np.arange(1, M + 1)
    m = np.arange(1, n_coeffs + 1)
    basis = np.cos(np.outer(m, k - 0.5) * np.pi / M)
    return np.log(S) @ basis.T


def band_energies(rec: VoiceRecording, frame: float = 0.025, hop: float = 0.01,
                  n_bands: int = N_MEL, fmax: float = MFCC_FMAX) -> np.ndarray:
    fs = rec.sample_rate
    flen = int(round(frame * fs))
    frames = frame_signal(rec.samples, flen, int(round(hop * fs)))
    if len(frames) == 0:
        raise ValueError("recording shorter than one MFCC frame")
    nfft = 1 << int(np.ceil(np.log2(flen)))
    X = np.abs(np.fft.rfft(frames * np.hamming(flen), nfft, axis=1))
    W = mel_filterbank(nfft, fs, n_bands, fmax)
    S = X[:, :W.shape[1]] @ W.T
    floor = S.max() * 1e-12 if S.max() > 0 else np.finfo(float).tiny
    return np.maximum(S, floor)


def mfcc_frames(rec: VoiceRecording, **kwargs) -> np.ndarray:
    """Per-frame MFCC(1..12), shape (frames, 12)."""
    return cepstrum_from_bands(band_energies(rec, **kwargs))


def mfcc(rec: VoiceRecording, **kwargs) -> np.ndarray:
    """Time-averaged MFCC(1..12)."""
    return mfcc_frames(rec, **kwargs).mean(axis=0)


def deltas(frame_mfccs, width: int = 2) -> np.ndarray:
    """Regression deltas over +-width frames for the frames with full support."""
    c = np.asarray(frame_mfccs, dtype=float)
    if c.ndim != 2 or len(c) < 2 * width + 1:
        raise ValueError(f"need at least {2 * width + 1} frames for deltas")
    T = len(c)
    num = sum(n * (c[width + n:T - width + n] - c[width - n:T - width - n])
              for n in range(1, width + 1))
    return num / (2 * sum(n * n for n in range(1, width + 1)))


def delta_mfcc(frame_mfccs) -> np.ndarray:
    """Mean absolute delta per coefficient."""
    return np.mean(np.abs(deltas(frame_mfccs)), axis=0)


@dataclass(frozen=True)
class SpectralEnvelope:
    freqs: np.ndarray
    db: np.ndarray
    order: int
    poly: np.ndarray

    @property
    def P(self) -> int:
        return len(self.db)


def _stable(a) -> bool:
    return bool(np.all(np.abs(np.roots(a)) < 1.0)) if len(a) > 1 else True


def envelope_from_autocorrelation(r, order: int = ENVELOPE_ORDER, rate: float = ENVELOPE_RATE,
                                  points: int = ENVELOPE_POINTS, fmax: float = 4000.0) -> SpectralEnvelope:
    """All-pole envelope (dB) of a unit-power signal with autocorrelation ``r``.

    An unstable fit is retried with growing white-noise correction on r[0].
    """
    r = np.asarray(r, dtype=float)
    r = r[:order + 1] / r[0]
    eps = 0.0
    for _ in range(12):
        rr = r.copy()
        rr[0] *= 1.0 + eps
        a, err = levinson(rr, order)
        if err > 0 and _stable(a):
            break
        eps = 1e-9 if eps == 0 else eps * 10
    else:
        raise ValueError("could not obtain a stable all-pole model")
    freqs = np.linspace(0.0, fmax, points)
    _, h = signal.freqz([1.0], a, worN=freqs, fs=rate)
    db = 10 * np.log10(err) + 20 * np.log10(np.abs(h))
    return SpectralEnvelope(freqs, db, order, a)


def spectral_envelope(rec: VoiceRecording, order: int = ENVELOPE_ORDER,
                      points: int = ENVELOPE_POINTS, frame: int = 512) -> SpectralEnvelope:
    """All-pole envelope of the time-averaged power spectrum, at an 8 kHz analysis rate."""
    x = resample_signal(rec.samples, rec.sample_rate, ENVELOPE_RATE)
    frames = frame_signal(x, frame, frame // 2)
    if len(frames) == 0:
        frames = np.pad(x, (0, frame - len(x)))[None, :]
    P = np.mean(np.abs(np.fft.rfft(frames * np.hanning(frame), 2 * frame, axis=1)) ** 2, axis=0)
    r = np.fft.irfft(P)[:order + 1]
    if r[0] <= 0:
        raise ValueError("silent recording")
    return envelope_from_autocorrelation(r, order, ENVELOPE_RATE, points)


def envelope_distance(E_i, E_a) -> float:
    """Mean absolute difference between two dB envelopes sampled on the same grid."""
    ei = E_i.db if isinstance(E_i, SpectralEnvelope) else np.asarray(E_i, dtype=float)
    ea = E_a.db if isinstance(E_a, SpectralEnvelope) else np.asarray(E_a, dtype=float)
    if ei.shape != ea.shape:
        raise ValueError(f"envelope lengths differ ({len(ei)} vs {len(ea)})")
    return float(np.mean(np.abs(ei - ea)))


def second_formant(env: SpectralEnvelope, vowel: str, floor: float = 250.0) -> float:
    """F2 in Hz from envelope peaks, or NaN when no peak falls in the vowel's F2 band.

    The strongest envelope peak inside the band wins; weak ripple peaks from
    the all-pole fit are ignored that way.
    """
    lo, hi = F2_BANDS[vowel]
    df = env.freqs[1] - env.freqs[0]
    peaks = local_maxima(env.db)
    peaks = peaks[env.freqs[peaks] > floor]
    if peaks.size == 0:
        return float("nan")

    def refine(k):
        pos, _ = parabolic_peak(env.db, int(k))
        return env.freqs[0] + pos * df

    inband = peaks[(env.freqs[peaks] >= lo) & (env.freqs[peaks] <= hi)]
    if inband.size == 0:
        return float("nan")
    return float(refine(inband[np.argmax(env.db[inband])]))


def f2_convergence(f2_i: float, f2_a: float) -> float:
    return abs(f2_i - f2_a)
