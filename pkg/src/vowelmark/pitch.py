"""F0 tracking at a 5 ms step and segmentation into glottal cycles.

The tracker is a normalized cross-correlation (NCCF) tracker: 40 ms
analysis windows every 5 ms, parabolic refinement of correlation peaks and
a Viterbi pass that penalizes octave jumps between neighbouring frames.
Cycle boundaries are placed on positive waveform peaks, each one chosen
so that the cycles on either side of it match best.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from ._dsp import local_maxima, parabolic_peak
from .dataset import VoiceRecording

F0_MIN = 60.0
F0_MAX = 450.0
STEP = 0.005


class UnvoicedError(ValueError):
    """Too little periodic content to estimate a pitch contour."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InsufficientCyclesError(ValueError):
    pass


@dataclass(frozen=True)
class F0Contour:
    times: np.ndarray
    f0: np.ndarray           # Hz; NaN on unvoiced frames
    voiced: np.ndarray
    strength: np.ndarray     # NCCF peak value per frame
    step: float = STEP
    fmin: float = F0_MIN
    fmax: float = F0_MAX

    @property
    def mean_f0(self) -> float:
        return float(np.mean(self.f0[self.voiced])) if self.voiced.any() else float("nan")

    @property
    def voiced_fraction(self) -> float:
        return float(np.mean(self.voiced)) if len(self.voiced) else 0.0

    def voiced_values(self) -> np.ndarray:
        return self.f0[self.voiced]

    def bridged(self) -> np.ndarray:
        """Voiced span of the contour with unvoiced gaps linearly interpolated."""
        idx = np.flatnonzero(self.voiced)
        if idx.size == 0:
            return np.empty(0)
        span = np.arange(idx[0], idx[-1] + 1)
        return np.interp(span, idx, self.f0[idx])

    def period_at(self, t) -> np.ndarray:
        """Local period in seconds at time(s) ``t`` (nearest voiced value outside)."""
        idx = np.flatnonzero(self.voiced)
        return 1.0 / np.interp(t, self.times[idx], self.f0[idx])

    def is_voiced_at(self, t: float) -> bool:
        m = int(np.clip(np.round((t - self.times[0]) / self.step), 0, len(self.times) - 1))
        return bool(self.voiced[m])


@dataclass(frozen=True)
class PeriodSegmentation:
    boundaries: np.ndarray
    sample_rate: float
    amplitudes: np.ndarray = field(repr=False)
    correlations: np.ndarray = field(repr=False)

    @property
    def T0(self) -> np.ndarray:
        return np.diff(self.boundaries) / self.sample_rate

    @property
    def A(self) -> np.ndarray:
        return self.amplitudes

    @property
    def N(self) -> int:
        return len(self.boundaries) - 1


def _nccf_frames(x, starts, win: int, max_lag: int, chunk: int = 128):
    """NCCF for lags 0..max_lag of windows starting at ``starts``."""
    nfft = sfft.next_fast_len(win + max_lag)
    seg = win + max_lag
    out = np.empty((len(starts), max_lag + 1))
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    for c0 in range(0, len(starts), chunk):
        st = starts[c0:c0 + chunk]
        idx = st[:, None] + np.arange(seg)[None, :]
        y = x[idx]
        xw = y[:, :win]
        X = sfft.rfft(xw, nfft, axis=1)
        Y = sfft.rfft(y, nfft, axis=1)
        corr = sfft.irfft(np.conj(X) * Y, nfft, axis=1)[:, :max_lag + 1]
        lags = np.arange(max_lag + 1)
        e0 = (csum[st + win] - csum[st])[:, None]
        ek = csum[st[:, None] + lags + win] - csum[st[:, None] + lags]
        denom = np.sqrt(np.maximum(e0 * ek, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            out[c0:c0 + chunk] = np.where(denom > 1e-20, corr / denom, 0.0)
    return out


def track_f0(rec: VoiceRecording, fmin: float = F0_MIN, fmax: float = F0_MAX,
             step: float = STEP, window: float = 0.04, voicing_threshold: float = 0.5,
             octave_cost: float = 2.0, lag_weight: float = 0.1,
             n_candidates: int = 6) -> F0Contour:
    """Estimate the F0 contour of a sustained phonation.

    Frame ``m`` covers ``window`` seconds starting at ``m * step``; its time
    stamp is the window centre. A frame is voiced when its best NCCF peak
    inside the lag range ``[1/fmax, 1/fmin]`` reaches ``voicing_threshold``.

    Raises
    ------
    UnvoicedError
        When fewer than half the frames are voiced or the voiced content is
        shorter than 0.5 s.
    """
    fs = rec.sample_rate
    x = rec.samples - np.mean(rec.samples)
    win = int(round(window * fs))
    lag_min = max(2, int(np.floor(fs / fmax)))
    lag_max = int(np.ceil(fs / fmin)) + 1
    n_frames = int(np.floor((len(x) - win - lag_max - 1) / (step * fs))) + 1
    if n_frames < 1:
        raise UnvoicedError("recording too short for pitch analysis",
                            {"duration": rec.duration, "frames": 0, "voiced_fraction": 0.0})
    starts = np.round(np.arange(n_frames) * step * fs).astype(int)
    times = (starts + win / 2) / fs
    nccf = _nccf_frames(x, starts, win, lag_max)

    # candidate peaks per frame: (lag, value)
    cand_lag = np.full((n_frames, n_candidates), np.nan)
    cand_val = np.full((n_frames, n_candidates), -np.inf)
    strength = np.zeros(n_frames)
    for m in range(n_frames):
        row = nccf[m]
        peaks = local_maxima(row[lag_min - 1:lag_max + 1]) + lag_min - 1
        peaks = peaks[(peaks >= lag_min) & (peaks <= lag_max - 1)]
        if peaks.size == 0:
            continue
        top = peaks[np.argsort(-row[peaks], kind="stable")[:n_candidates]]
        for j, k in enumerate(top):
            pos, val = parabolic_peak(row, int(k))
            cand_lag[m, j] = pos
            cand_val[m, j] = min(val, 1.0)
        strength[m] = cand_val[m, 0]
    voiced = strength >= voicing_threshold

    f0 = np.full(n_frames, np.nan)
    for run in _runs(voiced):
        path = _viterbi(cand_lag[run], cand_val[run], lag_max, octave_cost, lag_weight)
        f0[run] = fs / path
    in_band = (f0 >= fmin) & (f0 <= fmax)
    voiced &= in_band
    f0[~voiced] = np.nan

    contour = F0Contour(times, f0, voiced, strength, step, fmin, fmax)
    diag = {"duration": rec.duration, "frames": n_frames,
            "voiced_fraction": contour.voiced_fraction,
            "median_strength": float(np.median(strength))}
    if contour.voiced_fraction < 0.5:
        raise UnvoicedError(
            f"unvoiceable recording: {100 * contour.voiced_fraction:.0f}% voiced frames", diag)
    if voiced.sum() * step < 0.5:
        raise UnvoicedError("unvoiceable recording: less than 0.5 s of voiced frames", diag)
    return contour


def _runs(mask):
    idx = np.flatnonzero(np.diff(np.concatenate(([0], mask.astype(int), [0]))))
    return [slice(a, b) for a, b in zip(idx[::2], idx[1::2])]


def _viterbi(lags, vals, lag_max, octave_cost, lag_weight):
    ok = np.isfinite(lags)
    local = np.where(ok, 1.0 - vals * (1.0 - lag_weight * np.nan_to_num(lags) / lag_max), np.inf)
    n, k = lags.shape
    cost = local[0].copy()
    back = np.zeros((n, k), dtype=int)
    logl = np.log2(np.where(ok, lags, 1.0))
    for m in range(1, n):
        trans = octave_cost * np.abs(logl[m][:, None] - logl[m - 1][None, :])
        total = cost[None, :] + trans
        back[m] = np.argmin(total, axis=1)
        cost = total[np.arange(k), back[m]] + local[m]
    j = int(np.argmin(cost))
    path = np.empty(n)
    for m in range(n - 1, -1, -1):
        path[m] = lags[m, j]
        j = back[m, j]
    return path


def _ncc(a, b) -> float:
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    return float(np.dot(a, b) / den) if den > 0 else 0.0


def segment_periods(rec: VoiceRecording, contour: F0Contour, search: float = 0.25,
                    min_cycles: int = 30, min_corr: float = 0.2,
                    voiced_corr: float = 0.5) -> PeriodSegmentation:
    """Split the waveform into fundamental periods.

    Starting from the strongest positive peak of the voiced span, boundaries
    are laid out to the right and to the left. The next boundary is the
    positive local maximum, within ``search`` (relative) of the local period
    from the contour, that maximizes the normalized correlation between
    the two cycles it separates. Marching stops at the signal edges, when
    the best correlation drops under ``min_corr``, or when it drops under
    ``voiced_corr`` inside an unvoiced stretch of the contour.
    """
    if not contour.voiced.any():
        raise InsufficientCyclesError("no voiced frames")
    fs = rec.sample_rate
    x = rec.samples - np.mean(rec.samples)
    n = len(x)
    lo_period = fs / contour.fmax
    hi_period = fs / contour.fmin

    vt = contour.times[contour.voiced]
    half = 0.02 * fs
    span_lo = max(0, int(vt[0] * fs - half))
    span_hi = min(n, int(vt[-1] * fs + half))
    seed = span_lo + int(np.argmax(x[span_lo:span_hi]))

    def step(b, direction, prev_len):
        T = float(contour.period_at(b / fs)) * fs
        d_lo = max(lo_period, (1 - search) * T)
        d_hi = min(hi_period, (1 + search) * T)
        if prev_len:
            d_lo, d_hi = max(d_lo, 0.5 * prev_len), min(d_hi, 2.0 * prev_len)
        d_lo, d_hi = int(np.ceil(d_lo)), int(np.floor(d_hi))
        if d_hi < d_lo:
            return None
        if direction > 0:
            lo, hi = b + d_lo, b + d_hi
            if lo + 1 >= n:
                return None
        else:
            lo, hi = b - d_hi, b - d_lo
            if hi - 1 <= 0:
                return None
        lo, hi = max(lo, 1), min(hi, n - 2)
        if hi < lo:
            return None
        seg = x[lo - 1:hi + 2]
        cands = local_maxima(seg) + lo - 1
        cands = cands[(cands >= lo) & (cands <= hi)]
        pos = cands[x[cands] > 0]
        cands = pos if pos.size else cands
        best, best_score = None, -np.inf
        for c in cands:
            length = abs(c - b)
            if direction > 0:
                if c + length > n:
                    continue
                score = _ncc(x[b:c], x[c:c + length])
            else:
                if c - length < 0:
                    continue
                score = _ncc(x[c - length:c], x[c:b])
            if score > best_score:
                best, best_score = int(c), score
        if best is None:
            return None
        if best_score < min_corr:
            return None
        if best_score < voiced_corr and not contour.is_voiced_at(best / fs):
            return None
        return best, best_score

    right, rcorr = [seed], []
    prev = 0
    while True:
        r = step(right[-1], +1, prev)
        if r is None:
            break
        prev = r[0] - right[-1]
        right.append(r[0])
        rcorr.append(r[1])
    left, lcorr = [], []
    b = seed
    prev = (right[1] - right[0]) if len(right) > 1 else 0
    while True:
        r = step(b, -1, prev)
        if r is None:
            break
        prev = b - r[0]
        left.append(r[0])
        lcorr.append(r[1])
        b = r[0]
    bounds = np.array(left[::-1] + right, dtype=int)
    corrs = np.array(lcorr[::-1] + rcorr)
    if len(bounds) - 1 < min_cycles:
        raise InsufficientCyclesError(
            f"insufficient cycles: found {max(len(bounds) - 1, 0)}, need {min_cycles}")
    amps = np.array([np.max(np.abs(rec.samples[a:b])) for a, b in zip(bounds[:-1], bounds[1:])])
    return PeriodSegmentation(bounds, fs, amps, corrs)


def write_debug(path, contour: F0Contour, seg: PeriodSegmentation | None = None):
    """Dump the contour (and cycle boundaries, if given) as tab-separated text."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["kind", "index", "time_s", "value", "voiced_or_amplitude"])
        for m, (t, f, v) in enumerate(zip(contour.times, contour.f0, contour.voiced)):
            w.writerow(["f0", m, f"{t:.6f}", "" if np.isnan(f) else f"{f:.4f}", int(v)])
        if seg is not None:
            for i, b in enumerate(seg.boundaries):
                amp = f"{seg.A[i]:.6f}" if i < seg.N else ""
                w.writerow(["boundary", i, f"{b / seg.sample_rate:.6f}", int(b), amp])
