"""Harmonics-to-noise ratio and glottal-to-noise excitation ratio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._dsp import frame_signal, local_maxima, lpc_autocorrelation, parabolic_peak
from .dataset import VoiceRecording, resample_signal
from .pitch import F0Contour, _nccf_frames

HNR_FLOOR = -20.0
HNR_CEIL = 60.0


@dataclass(frozen=True)
class NoiseFeatures:
    hnr: float
    gne_mean: float
    gne_sd: float


def _frame_hnr(ac: float) -> float:
    if ac >= 1.0:
        return HNR_CEIL
    if ac <= 0.0:
        return HNR_FLOOR
    return float(np.clip(10 * np.log10(ac / (1 - ac)), HNR_FLOOR, HNR_CEIL))


def hnr(rec: VoiceRecording, contour: F0Contour, window: float = 0.04, hop: float = 0.01,
        prominence: float = 0.9) -> float:
    """Mean frame HNR (dB) over voiced frames.

    Each frame's normalized autocorrelation is searched over lags
    ``[1/fmax, 1/fmin]``; the first local maximum reaching ``prominence``
    times the highest one in that range is taken as the periodic power.
    """
    fs = rec.sample_rate
    x = rec.samples - np.mean(rec.samples)
    win = int(round(window * fs))
    lag_min = max(2, int(np.floor(fs / contour.fmax)))
    lag_max = int(np.ceil(fs / contour.fmin)) + 1
    n_frames = int(np.floor((len(x) - win - lag_max - 1) / (hop * fs))) + 1
    if n_frames < 1:
        raise ValueError("no voiced frames")
    starts = np.round(np.arange(n_frames) * hop * fs).astype(int)
    centres = (starts + win / 2) / fs
    keep = np.array([contour.is_voiced_at(t) for t in centres])
    if not keep.any():
        raise ValueError("no voiced frames")
    ac = _nccf_frames(x, starts[keep], win, lag_max)
    values = []
    for row in ac:
        peaks = local_maxima(row[lag_min - 1:lag_max + 1]) + lag_min - 1
        peaks = peaks[(peaks >= lag_min) & (peaks < lag_max)]
        if peaks.size == 0:
            values.append(HNR_FLOOR)
            continue
        top = row[peaks].max()
        first = peaks[np.argmax(row[peaks] >= prominence * top)]
        _, val = parabolic_peak(row, int(first))
        values.append(_frame_hnr(val))
    return float(np.mean(values))


def _band_envelopes(x, sample_rate: float, centres, bandwidth: float) -> np.ndarray:
    """Hilbert envelopes of Hann-shaped frequency bands, one row per centre."""
    n = len(x)
    nfft = 2 * n
    X = np.fft.fft(x, nfft)
    freqs = np.fft.fftfreq(nfft, 1.0 / sample_rate)
    env = np.empty((len(centres), n))
    for j, fc in enumerate(centres):
        u = (freqs - (fc - bandwidth / 2)) / bandwidth
        mask = np.where((u > 0) & (u < 1), np.sin(np.pi * u) ** 2, 0.0)
        env[j] = np.abs(np.fft.ifft(2 * X * mask))[:n]
    return env


def _max_xcorr(a, b, max_lag: int) -> float:
    best = -1.0
    n = len(a)
    for lag in range(-max_lag, max_lag + 1):
        u = a[max(0, lag):n + min(0, lag)]
        v = b[max(0, -lag):n + min(0, -lag)]
        u = u - u.mean()
        v = v - v.mean()
        den = np.sqrt(np.dot(u, u) * np.dot(v, v))
        if den > 0:
            best = max(best, float(np.dot(u, v) / den))
    return best


def gne_frames(rec: VoiceRecording, rate: float = 8000.0, frame: float = 0.03, hop: float = 0.01,
               order: int = 10, centres=(500.0, 1500.0, 2500.0), bandwidth: float = 1000.0,
               max_lag: float = 0.3e-3, silence_db: float = -40.0) -> np.ndarray:
    """Per-frame GNE values.

    Frames more than ``silence_db`` below the loudest frame are skipped.
    """
    x = resample_signal(rec.samples, rec.sample_rate, rate)
    frames = frame_signal(x, int(round(frame * rate)), int(round(hop * rate)))
    if len(frames) == 0:
        raise ValueError("recording too short for GNE")
    energy = np.sum(frames ** 2, axis=1)
    loud = energy > energy.max() * 10 ** (silence_db / 10)
    lag = int(round(max_lag * rate))
    pairs = [(i, j) for i in range(len(centres)) for j in range(i + 1, len(centres))
             if abs(centres[i] - centres[j]) >= bandwidth / 2]
    out = []
    for f in frames[loud]:
        a, _ = lpc_autocorrelation(f, order, window="hamming")
        resid = signal.lfilter(a, [1.0], f)
        env = _band_envelopes(resid, rate, centres, bandwidth)
        g = max(_max_xcorr(env[i], env[j], lag) for i, j in pairs)
        out.append(min(max(g, 0.0), 1.0))
    return np.array(out)


def gne(rec: VoiceRecording, **kwargs) -> tuple[float, float]:
    """Mean and standard deviation of the frame GNE."""
    if rec.duration < 0.5:
        raise ValueError("recording too short for GNE (< 0.5 s)")
    g = gne_frames(rec, **kwargs)
    if g.size == 0:
        raise ValueError("silent recording")
    return float(np.mean(g)), float(np.std(g))


def noise_features(rec: VoiceRecording, contour: F0Contour) -> NoiseFeatures:
    m, s = gne(rec)
    return NoiseFeatures(hnr(rec, contour), m, s)
