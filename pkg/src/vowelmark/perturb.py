"""Cycle-to-cycle perturbation measures (jitter, shimmer, DFP), in percent."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .pitch import PeriodSegmentation

PPQ_LENGTHS = (3, 5, 55)
APQ_LENGTHS = (3, 5, 11, 55)


@dataclass(frozen=True)
class PerturbationFeatures:
    j_loc: float
    j_ppq3: float
    j_ppq5: float
    j_ppq55: float
    s_loc: float
    s_apq3: float
    s_apq5: float
    s_apq11: float
    s_apq55: float
    dfp: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _as_sequence(x, min_len: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < min_len:
        raise ValueError(f"{what} needs at least {min_len} cycles (got {len(x)})")
    return x


def local_perturbation(x) -> float:
    """Mean absolute difference of consecutive values over the mean value, x100."""
    x = _as_sequence(x, 2, "local perturbation")
    return float(np.mean(np.abs(np.diff(x))) / np.mean(x) * 100.0)


def smoothed_perturbation(x, L: int) -> float:
    """Mean deviation of each value from its centred L-point average, over the mean, x100.

    Returns NaN when the sequence is shorter than ``L``.
    """
    if L < 3 or L % 2 == 0:
        raise ValueError("window length must be odd and >= 3")
    x = np.asarray(x, dtype=float)
    if len(x) < L:
        return float("nan")
    # deviations are shift-invariant; shifting by x[0] makes constant input exactly zero
    d = x - x[0]
    centred = np.convolve(d, np.ones(L) / L, mode="valid")
    h = (L - 1) // 2
    dev = np.abs(d[h:len(d) - h] - centred)
    return float(np.mean(dev) / np.mean(x) * 100.0)


def jitter_local(T0) -> float:
    return local_perturbation(T0)


def jitter_ppq(T0, L: int) -> float:
    return smoothed_perturbation(T0, L)


def shimmer_local(A) -> float:
    return local_perturbation(A)


def shimmer_apq(A, L: int) -> float:
    return smoothed_perturbation(A, L)


def dfp(T0) -> float:
    """Directional perturbation factor: share of period-change sign reversals, x100.

    Sign reversals are counted over every pair of consecutive differences
    (sign(0) counts as 0, a change from +1 to 0 counts one half) and the
    count is divided by the number of periods.
    """
    T0 = _as_sequence(T0, 3, "DFP")
    s = np.sign(np.diff(T0))
    changes = 0.5 * np.sum(np.abs(np.diff(s)))
    return float(changes / len(T0) * 100.0)


def perturbation_features(seg: PeriodSegmentation) -> PerturbationFeatures:
    T0, A = seg.T0, seg.A
    return PerturbationFeatures(
        j_loc=jitter_local(T0),
        j_ppq3=jitter_ppq(T0, 3), j_ppq5=jitter_ppq(T0, 5), j_ppq55=jitter_ppq(T0, 55),
        s_loc=shimmer_local(A),
        s_apq3=shimmer_apq(A, 3), s_apq5=shimmer_apq(A, 5),
        s_apq11=shimmer_apq(A, 11), s_apq55=shimmer_apq(A, 55),
        dfp=dfp(T0),
    )
