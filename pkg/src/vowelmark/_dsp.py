"""Small DSP helpers shared by the feature modules."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg, signal


def frame_signal(x, length: int, hop: int) -> np.ndarray:
    """Frames of ``length`` samples every ``hop`` samples (trailing partial frame dropped)."""
    x = np.asarray(x, dtype=float)
    if len(x) < length:
        return np.empty((0, length))
    return sliding_window_view(x, length)[::hop]


def parabolic_peak(y, k: int) -> tuple[float, float]:
    """Vertex of the parabola through ``y[k-1:k+2]`` as (offset position, value)."""
    if k <= 0 or k >= len(y) - 1:
        return float(k), float(y[k])
    a, b, c = y[k - 1], y[k], y[k + 1]
    denom = a - 2 * b + c
    if denom >= 0:
        return float(k), float(b)
    d = 0.5 * (a - c) / denom
    return k + d, b - 0.25 * (a - c) * d


def local_maxima(y) -> np.ndarray:
    """Indices of interior local maxima (plateaus report their middle sample)."""
    return signal.find_peaks(np.asarray(y, dtype=float))[0]


def levinson(r, order: int) -> tuple[np.ndarray, float]:
    """Levinson-Durbin recursion: predictor polynomial a (a[0]=1) and error power."""
    r = np.asarray(r, dtype=float)
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = r[0]
    if err <= 0:
        return a, 0.0
    for i in range(1, order + 1):
        acc = r[i] + np.dot(a[1:i], r[i - 1:0:-1])
        k = -acc / err
        a[1:i] = a[1:i] + k * a[i - 1:0:-1]
        a[i] = k
        err *= 1.0 - k * k
        if err <= 0:
            err = 0.0
            break
    return a, err


def lpc_autocorrelation(x, order: int, window: str | None = "hamming") -> tuple[np.ndarray, float]:
    """All-pole fit by the autocorrelation method (optionally Hamming-windowed)."""
    x = np.asarray(x, dtype=float)
    if window == "hamming":
        x = x * np.hamming(len(x))
    r = np.correlate(x, x, mode="full")[len(x) - 1: len(x) + order]
    return levinson(r, order)


def lpc_covariance(x, order: int) -> np.ndarray:
    """Predictor polynomial (a[0]=1) minimising the unwindowed prediction error."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= order:
        raise ValueError("sequence shorter than predictor order")
    cols = np.column_stack([x[order - i: n - i] for i in range(1, order + 1)])
    target = x[order:]
    coef, *_ = linalg.lstsq(cols, -target, lapack_driver="gelsd")
    return np.concatenate(([1.0], coef))
