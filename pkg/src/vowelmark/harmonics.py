"""Pitch-synchronous harmonic analysis.

Frames hold a fixed number of glottal cycles and overlap by one cycle.
Each frame is resampled onto a uniform grid of ``I`` points per cycle so
that harmonic ``p`` lands exactly on DFT bin ``p * cycles``, whatever the
local F0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from .pitch import PeriodSegmentation

N_HARMONICS = 8
CYCLES_PER_FRAME = 8
POINTS_PER_CYCLE = 512
REL_EPS = 1e-6


@dataclass(frozen=True)
class HarmonicFeatures:
    h_mu: np.ndarray
    h_sd: np.ndarray
    rel_h: np.ndarray
    n_frames: int = 0


def sinc_interpolate(x, positions, half_width: int = 32, beta: float = 8.0,
                     cutoff: float = 1.0) -> np.ndarray:
    """Kaiser-windowed sinc interpolation of ``x`` at fractional sample positions.

    ``cutoff`` (fraction of Nyquist) below 1 low-passes before decimation.
    Positions whose kernel runs past the signal edges see zeros there.
    """
    x = np.asarray(x, dtype=float)
    positions = np.asarray(positions, dtype=float)
    base = np.floor(positions).astype(int)
    frac = positions - base
    taps = np.arange(-half_width + 1, half_width + 1)
    idx = base[:, None] + taps[None, :]
    d = frac[:, None] - taps[None, :]
    # Kaiser window evaluated at the exact fractional offset
    w = special.i0(beta * np.sqrt(np.clip(1 - (d / half_width) ** 2, 0, None))) / special.i0(beta)
    kernel = cutoff * np.sinc(cutoff * d) * w
    valid = (idx >= 0) & (idx < len(x))
    vals = np.where(valid, x[np.clip(idx, 0, len(x) - 1)], 0.0)
    return np.sum(vals * kernel, axis=1)


def cycle_frames(seg: PeriodSegmentation, cycles: int = CYCLES_PER_FRAME):
    """(start, stop) boundary-index pairs of frames with one-cycle overlap."""
    hop = cycles - 1
    return [(k, k + cycles) for k in range(0, seg.N - cycles + 1, hop)]


def resample_frame(x, start: int, stop: int, n_points: int, half_width: int = 32) -> np.ndarray:
    """``n_points`` uniform samples spanning ``[start, stop)`` (band-limited)."""
    length = stop - start
    ratio = n_points / length
    positions = start + np.arange(n_points) * (length / n_points)
    return sinc_interpolate(x, positions, half_width, cutoff=min(1.0, ratio))


def harmonic_amplitudes(x, seg: PeriodSegmentation, n_harmonics: int = N_HARMONICS,
                        cycles: int = CYCLES_PER_FRAME, points: int = POINTS_PER_CYCLE,
                        half_width: int = 32) -> np.ndarray:
    """Linear harmonic amplitudes, shape (frames, n_harmonics).

    Frames whose interpolation kernel would reach past the recording are skipped.
    """
    x = np.asarray(x, dtype=float)
    n = points * cycles
    window = signal.get_window("hamming", n)
    bins = cycles * np.arange(1, n_harmonics + 1)
    rows = []
    for k0, k1 in cycle_frames(seg, cycles):
        start, stop = int(seg.boundaries[k0]), int(seg.boundaries[k1])
        if start - half_width < 0 or stop + half_width >= len(x):
            continue
        frame = resample_frame(x, start, stop, n, half_width)
        spec = np.abs(np.fft.rfft(frame * window))
        rows.append(spec[bins])
    return np.array(rows).reshape(-1, n_harmonics)


def harmonic_statistics(h) -> HarmonicFeatures:
    """dB scaling against the global maximum, then per-harmonic mean, SD and stability."""
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        raise ValueError("no analysis frames")
    peak = h.max()
    if peak <= 0:
        raise ValueError("silent frames")
    H = 20 * np.log10(np.maximum(h, peak * 1e-15) / peak)
    mu = H.mean(axis=0)
    sd = H.std(axis=0)
    rel = 1.0 / (np.abs(mu) + sd + REL_EPS)
    return HarmonicFeatures(mu, sd, rel, len(h))


def harmonic_profile(rec, seg: PeriodSegmentation, **kwargs) -> HarmonicFeatures:
    """Hp mean/SD (dB) and RelHp for p = 1..8."""
    cycles = kwargs.get("cycles", CYCLES_PER_FRAME)
    if seg.N < cycles + 1:
        raise ValueError(f"insufficient cycles for harmonic analysis ({seg.N})")
    x = rec.samples if hasattr(rec, "samples") else rec
    return harmonic_statistics(harmonic_amplitudes(x, seg, **kwargs))
