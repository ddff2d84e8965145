"""F0-contour features: phonatory frequency range, pitch period entropy, vibrato index."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._dsp import lpc_covariance
from .pitch import F0Contour

PPE_BINS = 31
PPE_RANGE = 1.5
PVI_BAND = (9.0, 14.0)


@dataclass(frozen=True)
class ContourFeatures:
    pfr: float
    ppe: float
    pvi: float


def _values(contour) -> tuple[np.ndarray, float]:
    """Bridged voiced F0 values and the frame rate."""
    if isinstance(contour, F0Contour):
        return contour.bridged(), 1.0 / contour.step
    return np.asarray(contour, dtype=float), 200.0


def pfr(contour) -> float:
    """Semitone span between the lowest and highest voiced F0."""
    f0 = contour.voiced_values() if isinstance(contour, F0Contour) else np.asarray(contour, float)
    if f0.size == 0:
        raise ValueError("no voiced frames")
    return float(12.0 * np.log2(f0.max() / f0.min()))


def histogram_entropy(residuals, bins: int = PPE_BINS, limit: float = PPE_RANGE) -> float:
    """Entropy (bits) of a histogram on [-limit, limit]; outliers go to the end bins."""
    r = np.clip(np.asarray(residuals, dtype=float), -limit, limit)
    counts, _ = np.histogram(r, bins=bins, range=(-limit, limit))
    p = counts[counts > 0] / counts.sum()
    return float(max(0.0, -np.sum(p * np.log2(p))))


def semitone_residuals(f0, order: int = 2) -> np.ndarray:
    """Whitened semitone pitch: covariance-method LP residual of 12*log2(F0/f_low)."""
    f0 = np.asarray(f0, dtype=float)
    f_low = np.mean(f0) / np.sqrt(2.0)
    p = 12.0 * np.log2(f0 / f_low)
    a = lpc_covariance(p, order)
    return signal.lfilter(a, [1.0], p)[order:]


def ppe(contour, min_duration: float = 2.0) -> float:
    """Pitch period entropy in bits."""
    f0, rate = _values(contour)
    if len(f0) < min_duration * rate:
        raise ValueError(f"contour shorter than {min_duration} s")
    return histogram_entropy(semitone_residuals(f0))


def amplitude_spectrum(x, rate: float, seg_len: int, overlap: float = 0.95):
    """Welch-style average of Hann-windowed magnitude spectra (single-sided amplitude)."""
    hop = max(1, int(round(seg_len * (1 - overlap))))
    win = signal.get_window("hann", seg_len)
    starts = range(0, len(x) - seg_len + 1, hop)
    segs = np.array([x[s:s + seg_len] for s in starts])
    mag = np.abs(np.fft.rfft(segs * win, axis=1)) * 2.0 / win.sum()
    return np.fft.rfftfreq(seg_len, 1.0 / rate), mag.mean(axis=0)


def pvi(contour, min_duration: float = 2.0, band=PVI_BAND, order: int = 3,
        window: float = 1.0, overlap: float = 0.95) -> float:
    """Pathological vibrato index: summed 9-14 Hz amplitude spectrum of the normalized contour."""
    f0, rate = _values(contour)
    if len(f0) < min_duration * rate or len(f0) < window * rate:
        raise ValueError(f"contour shorter than {min_duration} s")
    rel = f0 / np.mean(f0) - 1.0
    sos = signal.butter(order, band, btype="bandpass", fs=rate, output="sos")
    y = signal.sosfiltfilt(sos, rel)
    freqs, amp = amplitude_spectrum(y, rate, int(round(window * rate)), overlap)
    sel = (freqs >= band[0]) & (freqs <= band[1])
    return float(np.sum(amp[sel]))


def contour_features(contour: F0Contour) -> ContourFeatures:
    return ContourFeatures(pfr(contour), ppe(contour), pvi(contour))
