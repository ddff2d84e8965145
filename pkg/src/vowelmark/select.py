"""Feature ranking (QoV, Relief, RelieFF, LASSO path) and backward-stepwise pruning."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .featureset import FeatureTable, standardize

log = logging.getLogger(__name__)

METHODS = ("qov", "relief", "relieff", "lasso")


@dataclass(frozen=True)
class FeatureRanking:
    method: str
    features: tuple[str, ...]
    scores: dict[str, float]
    notes: tuple[str, ...] = ()

    def top(self, n: int) -> list[str]:
        return list(self.features[:n])

    def report(self) -> str:
        lines = [f"# ranking: {self.method}", f"{'rank':>4}  {'feature':<12} score"]
        for k, name in enumerate(self.features, 1):
            lines.append(f"{k:>4}  {name:<12} {self.scores[name]:.6g}")
        return "\n".join(lines) + "\n"


def _order(names, keys) -> tuple[str, ...]:
    """Names sorted by descending key tuples; ties keep canonical (input) order."""
    idx = sorted(range(len(names)), key=lambda j: tuple(-k for k in keys[j]) + (j,))
    return tuple(names[j] for j in idx)


def _ranking(method, names, scores, notes=()) -> FeatureRanking:
    scores = np.asarray(scores, dtype=float)
    order = _order(list(names), [(s,) for s in scores])
    return FeatureRanking(method, order, dict(zip(names, map(float, scores))), tuple(notes))


def _standardized(table: FeatureTable) -> np.ndarray:
    return table.values if table.scaler is not None else standardize(table).values


def _check_classes(labels):
    if len(np.unique(labels)) != 2:
        raise ValueError("both classes must be present")


def qov_scores(X, y) -> np.ndarray:
    """Inverse mean class impurity from class-span overlap (0 for constant features).

    The impurity of class c along a feature is the share of opposite-class
    samples among all samples lying inside the [min, max] span of class c,
    floored at 1/(2n).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)
    floor = 1.0 / (2 * n)
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        ok = np.isfinite(col)
        col, lab = col[ok], y[ok]
        if col.size == 0 or np.ptp(col) == 0:
            continue
        imp = []
        for c in (0, 1):
            own = col[lab == c]
            if own.size == 0:
                imp.append(1.0)
                continue
            inside = (col >= own.min()) & (col <= own.max())
            imp.append(max(floor, np.sum(inside & (lab != c)) / np.sum(inside)))
        out[j] = 1.0 / np.mean(imp)
    return out


def rank_qov(table: FeatureTable) -> FeatureRanking:
    _check_classes(table.labels)
    return _ranking("QoV", table.names, qov_scores(table.values, table.labels))


def _relief_weights(Z, y, k: int):
    """Relief weights with k nearest hits and misses (range-normalized L1 metric)."""
    n, d = Z.shape
    span = np.ptp(Z, axis=0)
    span = np.where(span > 0, span, 1.0)
    Zn = Z / span
    dist = np.abs(Zn[:, None, :] - Zn[None, :, :]).sum(axis=2)
    np.fill_diagonal(dist, np.inf)
    w = np.zeros(d)
    notes = []
    counts = {c: int(np.sum(y == c)) for c in (0, 1)}
    for c in (0, 1):
        if counts[c] < 2:
            notes.append(f"class {c} has a single member; skipped as hit source")
            log.warning(notes[-1])
    used = 0
    for i in range(n):
        same = np.flatnonzero(y == y[i])
        same = same[same != i]
        other = np.flatnonzero(y != y[i])
        if same.size == 0:
            continue
        used += 1
        hits = same[np.argsort(dist[i, same], kind="stable")[:k]]
        misses = other[np.argsort(dist[i, other], kind="stable")[:k]]
        w -= np.abs(Zn[i] - Zn[hits]).mean(axis=0)
        w += np.abs(Zn[i] - Zn[misses]).mean(axis=0)
    return w / max(used, 1), notes


def rank_relief(table: FeatureTable) -> FeatureRanking:
    """Single-neighbour Relief over every instance (deterministic)."""
    _check_classes(table.labels)
    w, notes = _relief_weights(_standardized(table), table.labels, 1)
    return _ranking("Relief", table.names, w, notes)


def rank_relieff(table: FeatureTable, k: int = 11) -> FeatureRanking:
    """RelieFF with k nearest hits and misses; k is clamped below the smallest class size."""
    _check_classes(table.labels)
    if k < 1:
        raise ValueError("k must be at least 1")
    notes = []
    limit = int(min(np.sum(table.labels == 0), np.sum(table.labels == 1))) - 1
    if k > limit:
        notes.append(f"k={k} clamped to {max(limit, 1)}")
        log.warning(notes[-1])
        k = max(limit, 1)
    w, more = _relief_weights(_standardized(table), table.labels, k)
    return _ranking("RelieFF", table.names, w, notes + more)


@dataclass
class LassoPath:
    lambdas: np.ndarray
    coefs: np.ndarray            # (n_lambdas, d)
    gradients: np.ndarray        # |x_j' r| / n at each grid point
    converged: np.ndarray
    notes: list[str] = field(default_factory=list)


@numba.njit(cache=True)
def _cd_sweep(beta, grad, gram, idx, lam):
    biggest = 0.0
    for j in idx:
        old = beta[j]
        rho = grad[j] + gram[j, j] * old
        new = max(abs(rho) - lam, 0.0) / gram[j, j]
        if rho < 0:
            new = -new
        if new != old:
            step = new - old
            for i in range(len(grad)):
                grad[i] -= gram[i, j] * step
            beta[j] = new
            biggest = max(biggest, abs(step) * np.sqrt(gram[j, j]))
    return biggest


@numba.njit(cache=True)
def _cd_path(gram, corr, lambdas, max_sweeps, tol):
    d = len(corr)
    beta = np.zeros(d)
    grad = corr.copy()  # x_j' (y - X beta) / n
    usable = np.flatnonzero(np.diag(gram) > 0)
    coefs = np.full((len(lambdas), d), np.nan)
    grads = np.full((len(lambdas), d), np.nan)
    converged = np.zeros(len(lambdas), dtype=np.bool_)
    for g in range(len(lambdas)):
        lam = lambdas[g]
        start, start_grad = beta.copy(), grad.copy()
        sweeps = 0
        while sweeps < max_sweeps:
            # full sweep, then iterate on the active set until it settles
            sweeps += 1
            if _cd_sweep(beta, grad, gram, usable, lam) < tol:
                converged[g] = True
                break
            active = np.flatnonzero(beta != 0)
            while sweeps < max_sweeps:
                sweeps += 1
                if _cd_sweep(beta, grad, gram, active, lam) < tol:
                    break
        if not converged[g]:
            beta[:] = start
            grad[:] = start_grad
            continue
        coefs[g] = beta
        grads[g] = np.abs(grad)
    return coefs, grads, converged


def lasso_path(X, y, n_lambdas: int = 100, ratio: float = 1e-4, max_sweeps: int = 10_000,
               tol: float = 1e-7, fit_intercept: bool = True, lambdas=None) -> LassoPath:
    """Coordinate descent for (1/2n)||y - Xb||^2 + lam * ||b||_1 on a log-spaced grid.

    Warm starts run from the largest lambda down. A grid point that does not
    converge within ``max_sweeps`` is recorded and its coefficients left as NaN.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if fit_intercept:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    lam_max = np.max(np.abs(X.T @ y)) / n
    if lambdas is None:
        lambdas = lam_max * np.logspace(0, np.log10(ratio), n_lambdas)
    lambdas = np.asarray(lambdas, dtype=float)
    gram = X.T @ X / n
    corr = X.T @ y / n
    coefs, grads, converged = _cd_path(gram, corr, lambdas, max_sweeps, tol)
    notes = [f"no convergence at lambda={lam:.3g}" for lam in lambdas[~converged]]
    for note in notes:
        log.warning(note)
    return LassoPath(lambdas, coefs, grads, converged, notes)


def lasso_elimination_keys(path: LassoPath, rel_tol: float = 1e-5):
    """Per feature: (largest lambda at which it is active, max |gradient|/lambda).

    A feature is active when its coefficient is non-zero or its gradient sits
    on the penalty bound, so exact duplicates share the same key.
    """
    ok = path.converged
    lam = path.lambdas[ok][:, None]
    active = (np.abs(path.coefs[ok]) > 0) | (path.gradients[ok] >= lam * (1 - rel_tol))
    first = np.where(active, lam, 0.0).max(axis=0)
    pressure = (path.gradients[ok] / lam).max(axis=0)
    # rounding keeps ulp-level noise from splitting exact duplicates
    return first, np.round(pressure, 9)


def rank_lasso(table: FeatureTable, **kwargs) -> FeatureRanking:
    """Reverse elimination order along the LASSO path (last survivor first)."""
    _check_classes(table.labels)
    path = lasso_path(_standardized(table), table.labels.astype(float), **kwargs)
    first, pressure = lasso_elimination_keys(path)
    names = list(table.names)
    order = _order(names, list(zip(first, pressure)))
    return FeatureRanking("LASSO", order, dict(zip(names, map(float, first))), tuple(path.notes))


def rank_features(table: FeatureTable, method: str, k_neighbors: int = 11) -> FeatureRanking:
    method = method.lower()
    if method == "qov":
        return rank_qov(table)
    if method == "relief":
        return rank_relief(table)
    if method == "relieff":
        return rank_relieff(table, k_neighbors)
    if method == "lasso":
        return rank_lasso(table)
    raise ValueError(f"unknown ranking method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True)
class StepwiseRound:
    removed: str | None
    accuracy: float
    accepted: bool


@dataclass(frozen=True)
class StepwiseResult:
    features: tuple[str, ...]
    accuracy: float
    initial_accuracy: float
    trace: tuple[StepwiseRound, ...]

    def report(self) -> str:
        lines = [f"start: {self.initial_accuracy:.4f} with {len(self.features) + sum(r.accepted for r in self.trace)} features"]
        for r in self.trace:
            verdict = "removed" if r.accepted else "kept (all removals hurt)"
            lines.append(f"{r.removed or '-':<12} {r.accuracy:.4f} {verdict}")
        lines.append(f"final: {self.accuracy:.4f} with {len(self.features)} features")
        return "\n".join(lines) + "\n"


def backward_stepwise(subset, evaluator, tolerance: float = 1e-12) -> StepwiseResult:
    """Greedy removal of the feature whose deletion leaves the best accuracy.

    A removal is accepted while the resulting accuracy is no worse than the
    current one (within ``tolerance``); candidates tie-break by position.
    """
    current = list(subset)
    if not current:
        raise ValueError("empty feature subset")
    acc = float(evaluator(current))
    initial = acc
    trace = []
    while len(current) > 1:
        scores = [float(evaluator(current[:j] + current[j + 1:])) for j in range(len(current))]
        best = int(np.argmax(scores))
        if scores[best] >= acc - tolerance:
            trace.append(StepwiseRound(current[best], scores[best], True))
            acc = scores[best]
            del current[best]
        else:
            trace.append(StepwiseRound(current[best], scores[best], False))
            break
    return StepwiseResult(tuple(current), acc, initial, tuple(trace))
