"""Two-class Fisher LDA with an equal-error bias, metrics and cross-validation."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .featureset import FEATURE_SET_VERSION, FeatureTable, Standardizer

log = logging.getLogger(__name__)

DEFAULT_SEED = 20200131
MODEL_FORMAT = "vowelmark-lda"
MODEL_VERSION = 1
COND_LIMIT = 1e8
RIDGE_SCALE = 1e-3


class DegenerateDataError(ValueError):
    """Too few rows per class, or no usable direction between the class means."""


@dataclass(frozen=True)
class LdaModel:
    w: np.ndarray
    b: float
    feature_names: tuple[str, ...]
    scaler: Standardizer | None = None
    ridge: float = 0.0

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.w):
            raise ValueError(f"expected {len(self.w)} features, got {X.shape[1]}")
        return X @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > 0).astype(int)

    def scaled(self, c: float) -> "LdaModel":
        return LdaModel(self.w * c, self.b * c, self.feature_names, self.scaler, self.ridge)


def scatter_matrices(X, y):
    """Between-class and within-class scatter plus the class means (ALS, HC)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    X1, X0 = X[y == 1], X[y == 0]
    if len(X1) < 1 or len(X0) < 1:
        raise DegenerateDataError("each class needs at least one row")
    mu1, mu0 = X1.mean(axis=0), X0.mean(axis=0)
    diff = mu1 - mu0
    S_B = np.outer(diff, diff)
    D1, D0 = X1 - mu1, X0 - mu0
    S_W = D1.T @ D1 + D0.T @ D0
    return S_B, S_W, mu1, mu0


def ridge_for(S_W) -> float:
    """Ridge added to S_W: zero unless it is singular or badly conditioned."""
    d = len(S_W)
    tr = float(np.trace(S_W))
    if tr <= 0:
        return 1.0  # zero within-class scatter: any ridge gives the mean-difference direction
    with np.errstate(divide="ignore"):
        cond = np.linalg.cond(S_W)
    if np.isfinite(cond) and cond <= COND_LIMIT:
        return 0.0
    return RIDGE_SCALE * tr / d


def _orient(w, X, y) -> np.ndarray:
    w = w / np.linalg.norm(w)
    proj = X @ w
    if proj[y == 1].mean() < proj[y == 0].mean():
        w = -w
    return w


def lda_direction(X, y, method: str = "eig") -> tuple[np.ndarray, float]:
    """Unit discriminant direction (ALS projects higher) and the ridge used.

    ``method="eig"`` solves the generalized eigenproblem S_B w = l (S_W + g I) w;
    ``method="solve"`` uses the two-class closed form (S_W + g I)^-1 (mu1 - mu0).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    S_B, S_W, mu1, mu0 = scatter_matrices(X, y)
    if not np.any(mu1 != mu0):
        raise DegenerateDataError("class means coincide")
    gamma = ridge_for(S_W)
    A = S_W + gamma * np.eye(len(S_W))
    if method == "eig":
        _, vecs = linalg.eigh(S_B, A)
        w = vecs[:, -1]
    elif method == "solve":
        w = linalg.solve(A, mu1 - mu0, assume_a="pos")
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(w)) or not np.any(w):
        raise DegenerateDataError("no usable discriminant direction")
    return _orient(w, X, y), gamma


def select_bias(w, X, y) -> float:
    """Bias that balances training sensitivity and specificity.

    Candidate thresholds sit midway between adjacent distinct projections.
    The winner minimizes |Sens - Spec|, then maximizes accuracy, then has the
    lowest threshold.
    """
    if isinstance(w, LdaModel):
        w = w.w
    y = np.asarray(y)
    proj = np.asarray(X, dtype=float) @ np.asarray(w, dtype=float)
    u = np.unique(proj)
    if len(u) < 2:
        return float(-u[0])
    mids = (u[:-1] + u[1:]) / 2
    p1 = np.sort(proj[y == 1])
    p0 = np.sort(proj[y == 0])
    n1, n0 = len(p1), len(p0)
    tp = n1 - np.searchsorted(p1, mids, side="right")   # ALS above threshold
    tn = np.searchsorted(p0, mids, side="right")        # HC at or below
    # integer numerators keep the comparison exact
    gap = np.abs(tp * n0 - tn * n1)
    best = np.lexsort((mids, -(tp + tn), gap))[0]
    return float(-mids[best])


def train_lda(X, y, feature_names=None, scaler: Standardizer | None = None,
              method: str = "eig") -> LdaModel:
    """Fit direction and bias on (already standardized) training rows."""
    X = np.asarray(X, dtype=float)
    w, gamma = lda_direction(X, y, method)
    b = select_bias(w, X, y)
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(len(w)))
    return LdaModel(w, b, names, scaler, gamma)


def predict(model: LdaModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels (1 when the score is strictly positive) and scores."""
    s = model.score(X)
    return (s > 0).astype(int), s


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @classmethod
    def from_labels(cls, truth, pred) -> "Confusion":
        truth = np.asarray(truth)
        pred = np.asarray(pred)
        return cls(int(np.sum((truth == 1) & (pred == 1))), int(np.sum((truth == 0) & (pred == 0))),
                   int(np.sum((truth == 0) & (pred == 1))), int(np.sum((truth == 1) & (pred == 0))))

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    sensitivity: float
    specificity: float
    sensitivity_defined: bool = True
    specificity_defined: bool = True


def metrics(tp: int, tn: int, fp: int, fn: int) -> Metrics:
    """Accuracy, sensitivity and specificity in percent (NaN + flag when undefined)."""
    counts = (tp, tn, fp, fn)
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise ValueError("empty confusion matrix")
    sens_ok = tp + fn > 0
    spec_ok = tn + fp > 0
    return Metrics(100.0 * (tp + tn) / total,
                   100.0 * tp / (tp + fn) if sens_ok else float("nan"),
                   100.0 * tn / (tn + fp) if spec_ok else float("nan"),
                   sens_ok, spec_ok)


@dataclass
class EvalReport:
    scheme: str
    features: tuple[str, ...]
    confusions: list[Confusion]
    seed: int | None = None
    folds: int | None = None

    def _rates(self):
        return np.array([[m.accuracy, m.sensitivity, m.specificity]
                         for m in (metrics(c.tp, c.tn, c.fp, c.fn) for c in self.confusions)])

    @property
    def per_repetition(self) -> np.ndarray:
        return self._rates()

    acc_mean = property(lambda self: float(self._rates()[:, 0].mean()))
    acc_sd = property(lambda self: float(self._rates()[:, 0].std()))
    sens_mean = property(lambda self: float(self._rates()[:, 1].mean()))
    sens_sd = property(lambda self: float(self._rates()[:, 1].std()))
    spec_mean = property(lambda self: float(self._rates()[:, 2].mean()))
    spec_sd = property(lambda self: float(self._rates()[:, 2].std()))

    def summary(self) -> str:
        return (f"Acc {self.acc_mean:.1f} ± {self.acc_sd:.1f} %, "
                f"Sens {self.sens_mean:.1f} ± {self.sens_sd:.1f} %, "
                f"Spec {self.spec_mean:.1f} ± {self.spec_sd:.1f} %")

    def to_text(self) -> str:
        lines = [f"# scheme: {self.scheme}"]
        if self.folds is not None:
            lines.append(f"# folds: {self.folds}")
        if self.seed is not None:
            lines.append(f"# seed: {self.seed}")
        lines.append(f"# features ({len(self.features)}): {', '.join(self.features)}")
        lines.append("rep\tTP\tTN\tFP\tFN\tacc\tsens\tspec")
        for r, (c, rate) in enumerate(zip(self.confusions, self._rates())):
            lines.append(f"{r}\t{c.tp}\t{c.tn}\t{c.fp}\t{c.fn}\t"
                         + "\t".join(f"{v:.4f}" for v in rate))
        lines.append("")
        lines.append(f"accuracy\t{self.acc_mean:.4f}\t{self.acc_sd:.4f}")
        lines.append(f"sensitivity\t{self.sens_mean:.4f}\t{self.sens_sd:.4f}")
        lines.append(f"specificity\t{self.spec_mean:.4f}\t{self.spec_sd:.4f}")
        return "\n".join(lines) + "\n"


def repetition_rng(seed: int, repetition: int) -> np.random.Generator:
    """Independent counter-based stream for one CV repetition."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, repetition])))


def stratified_folds(labels, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per row; class counts per fold differ by at most one.

    Shuffled ALS rows then shuffled HC rows are dealt round-robin, so the
    overall fold sizes also differ by at most one.
    """
    labels = np.asarray(labels)
    for c in (0, 1):
        if np.sum(labels == c) < k:
            raise ValueError(f"stratification infeasible: class {c} has fewer than {k} rows")
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == 1)),
                            rng.permutation(np.flatnonzero(labels == 0))])
    fold = np.empty(len(labels), dtype=int)
    fold[order] = np.arange(len(labels)) % k
    return fold


@dataclass
class _Split:
    rep: int
    fold: int
    train: np.ndarray
    test: np.ndarray
    scaler: Standardizer
    Z_train: np.ndarray
    Z_test: np.ndarray


@dataclass
class CrossValidator:
    """Repeated stratified k-fold (or LOSO) evaluation of LDA on feature subsets.

    Standardization is fitted on each training split once, for all columns;
    evaluating a subset only slices columns, which is exact because scaling
    acts per feature.
    """
    table: FeatureTable
    folds: int = 8
    repetitions: int = 40
    seed: int = DEFAULT_SEED
    scheme: str = "stratified"
    threads: int = 1
    _splits: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        if self.table.scaler is not None:
            raise ValueError("cross-validation needs the raw (unstandardized) table")
        y = self.table.labels
        n = len(y)
        if self.scheme == "loso":
            if n < 3:
                raise ValueError("LOSO needs at least 3 subjects")
            plan = [(0, np.arange(n))]
            self.folds, self.repetitions = n, 1
        elif self.scheme == "stratified":
            plan = [(r, stratified_folds(y, self.folds, repetition_rng(self.seed, r)))
                    for r in range(self.repetitions)]
        else:
            raise ValueError(f"unknown CV scheme {self.scheme!r}")
        for rep, fold_of in plan:
            for f in range(self.folds):
                test = np.flatnonzero(fold_of == f)
                train = np.flatnonzero(fold_of != f)
                scaler = Standardizer.fit(self.table.values[train])
                self._splits.append(_Split(rep, f, train, test, scaler,
                                           scaler.transform(self.table.values[train]),
                                           scaler.transform(self.table.values[test])))

    def splits(self):
        return list(self._splits)

    def _columns(self, features) -> np.ndarray:
        idx = [self.table.names.index(f) for f in features]
        if not idx:
            raise ValueError("empty feature subset")
        return np.array(idx)

    def _run_split(self, s: _Split, cols) -> Confusion:
        y = self.table.labels
        Z = s.Z_train[:, cols]
        try:
            model = train_lda(Z, y[s.train])
        except DegenerateDataError as exc:
            # no discriminant direction on this split: score along the first feature
            log.info("repetition %d fold %d: %s; using the first feature axis", s.rep, s.fold, exc)
            w = np.zeros(len(cols))
            w[0] = 1.0
            model = LdaModel(w, select_bias(w, Z, y[s.train]), ())
        return Confusion.from_labels(y[s.test], model.predict(s.Z_test[:, cols]))

    def evaluate(self, features, on_fold=None) -> EvalReport:
        features = tuple(features)
        cols = self._columns(features)
        if on_fold is not None:
            for s in self._splits:
                on_fold(s.rep, s.fold, s.train, s.test, s.scaler)
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda s: self._run_split(s, cols), self._splits))
        else:
            parts = [self._run_split(s, cols) for s in self._splits]
        per_rep = [Confusion(0, 0, 0, 0) for _ in range(self.repetitions)]
        for s, c in zip(self._splits, parts):
            per_rep[s.rep] = per_rep[s.rep] + c
        return EvalReport(self.scheme, features, per_rep,
                          self.seed if self.scheme == "stratified" else None, self.folds)

    def accuracy(self, features) -> float:
        return self.evaluate(features).acc_mean


def stratified_kfold_cv(table: FeatureTable, features, folds: int = 8, repetitions: int = 40,
                        seed: int = DEFAULT_SEED, on_fold=None, threads: int = 1) -> EvalReport:
    """Repeated stratified k-fold CV; standardization and bias are fitted per training split."""
    cv = CrossValidator(table, folds, repetitions, seed, "stratified", threads)
    return cv.evaluate(features, on_fold)


def loso_cv(table: FeatureTable, features, on_fold=None) -> EvalReport:
    """Leave-one-subject-out CV with one pooled confusion matrix."""
    return CrossValidator(table, scheme="loso").evaluate(features, on_fold)


def fit_final_model(table: FeatureTable, features, method: str = "eig") -> LdaModel:
    """Standardize on all rows of ``table`` and train on the chosen features."""
    cols = [table.names.index(f) for f in features]
    raw = table.values[:, cols]
    scaler = Standardizer.fit(raw)
    return train_lda(scaler.transform(raw), table.labels, features, scaler, method)


def apply_model(model: LdaModel, table: FeatureTable) -> tuple[np.ndarray, np.ndarray]:
    """Labels and scores for raw rows of ``table`` using the model's stored scaling."""
    raw = table.columns(model.feature_names)
    Z = model.scaler.transform(raw) if model.scaler is not None else raw
    return predict(model, Z)


def save_model(model: LdaModel, path):
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "feature_set_version": FEATURE_SET_VERSION,
        "features": list(model.feature_names),
        "w": [float(v) for v in model.w],
        "b": float(model.b),
        "ridge": float(model.ridge),
        "standardization": model.scaler.to_dict() if model.scaler is not None else None,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path) -> LdaModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    names = tuple(doc["features"])
    w = np.array(doc["w"], dtype=float)
    if len(w) != len(names) or not np.any(w):
        raise ValueError(f"{path}: weight vector does not match the feature list")
    scaler = None
    if doc.get("standardization") is not None:
        scaler = Standardizer.from_dict(doc["standardization"])
        if len(scaler.mean) != len(names) or len(scaler.sd) != len(names):
            raise ValueError(f"{path}: standardization does not match the feature list")
    return LdaModel(w, float(doc["b"]), names, scaler, float(doc["ridge"]))
