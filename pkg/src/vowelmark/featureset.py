"""The 131-feature subject vector: extraction, table I/O, survey and scaling."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import contour as contour_mod
from . import harmonics, noise, perturb, pitch, spectral
from .dataset import (EARLY_ALS_SUBJECTS, CorpusManifest, VoiceRecording, decode_recording,
                      trim_silence)

log = logging.getLogger(__name__)

FEATURE_SET_VERSION = 1


def vowel_feature_names(v: str) -> list[str]:
    names = ["J_loc", "J_ppq3", "J_ppq5", "J_ppq55",
             "S_loc", "S_apq3", "S_apq5", "S_apq11", "S_apq55",
             "DPF", "HNR", "GNE_mu", "GNE_sd", "PFR", "PPE", "PVI"]
    names += [f"H{p}_mu" for p in range(1, 9)]
    names += [f"H{p}_sd" for p in range(1, 9)]
    names += [f"RelH{p}" for p in range(1, 9)]
    names += [f"MFCC{m}" for m in range(1, 13)]
    names += [f"dMFCC{m}" for m in range(1, 13)]
    return [f"{n}_{v}" for n in names]


FEATURE_NAMES: tuple[str, ...] = tuple(
    vowel_feature_names("a") + vowel_feature_names("i") + ["F2_i", "d1", "F2_conv"])
assert len(FEATURE_NAMES) == 131
FEATURE_INDEX = {n: k for k, n in enumerate(FEATURE_NAMES)}


@dataclass
class VowelAnalysis:
    """Features of one recording plus what the joint features need."""
    features: dict[str, float]
    envelope: spectral.SpectralEnvelope | None
    f2: float
    log: list[str] = field(default_factory=list)
    voiced_fraction: float = float("nan")
    trim: tuple[float, float] | None = None


def analyze_vowel(rec: VoiceRecording, trim: bool = True) -> VowelAnalysis:
    """Run every per-vowel feature extractor; failures leave NaNs and a log line."""
    v = rec.vowel
    out = {n: float("nan") for n in vowel_feature_names(v)}
    notes: list[str] = []
    if trim:
        rec = trim_silence(rec)

    def put(prefix_values):
        for k, val in prefix_values.items():
            out[f"{k}_{v}"] = float(val)

    def attempt(what, fn):
        try:
            return fn()
        except (ValueError, np.linalg.LinAlgError) as exc:
            notes.append(f"{what}: {exc}")
            return None

    contour = attempt("pitch", lambda: pitch.track_f0(rec))
    seg = None
    if contour is not None:
        seg = attempt("periods", lambda: pitch.segment_periods(rec, contour))
    if seg is not None:
        pf = attempt("perturbation", lambda: perturb.perturbation_features(seg))
        if pf is not None:
            put({"J_loc": pf.j_loc, "J_ppq3": pf.j_ppq3, "J_ppq5": pf.j_ppq5,
                 "J_ppq55": pf.j_ppq55, "S_loc": pf.s_loc, "S_apq3": pf.s_apq3,
                 "S_apq5": pf.s_apq5, "S_apq11": pf.s_apq11, "S_apq55": pf.s_apq55,
                 "DPF": pf.dfp})
            for name in ("J_ppq55", "S_apq55", "S_apq11"):
                if math.isnan(out[f"{name}_{v}"]):
                    notes.append(f"{name}: only {seg.N} cycles")
        hf = attempt("harmonics", lambda: harmonics.harmonic_profile(rec, seg))
        if hf is not None:
            for p in range(8):
                put({f"H{p + 1}_mu": hf.h_mu[p], f"H{p + 1}_sd": hf.h_sd[p],
                     f"RelH{p + 1}": hf.rel_h[p]})
    if contour is not None:
        h = attempt("hnr", lambda: noise.hnr(rec, contour))
        if h is not None:
            put({"HNR": h})
        put({"PFR": contour_mod.pfr(contour)})
        val = attempt("ppe", lambda: contour_mod.ppe(contour))
        if val is not None:
            put({"PPE": val})
        val = attempt("pvi", lambda: contour_mod.pvi(contour))
        if val is not None:
            put({"PVI": val})
    g = attempt("gne", lambda: noise.gne(rec))
    if g is not None:
        put({"GNE_mu": g[0], "GNE_sd": g[1]})
    frames = attempt("mfcc", lambda: spectral.mfcc_frames(rec))
    if frames is not None:
        put({f"MFCC{m + 1}": c for m, c in enumerate(frames.mean(axis=0))})
        d = attempt("delta-mfcc", lambda: spectral.delta_mfcc(frames))
        if d is not None:
            put({f"dMFCC{m + 1}": c for m, c in enumerate(d)})
    env = attempt("envelope", lambda: spectral.spectral_envelope(rec))
    f2 = spectral.second_formant(env, v) if env is not None else float("nan")
    if env is not None and math.isnan(f2):
        notes.append("F2: no envelope peak in band")
    for k, val in out.items():
        if not math.isfinite(val):
            out[k] = float("nan")
    return VowelAnalysis(out, env, f2, notes,
                         contour.voiced_fraction if contour is not None else 0.0, rec.trim)


@dataclass
class FeatureVector:
    subject_id: str
    label: int
    values: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    @property
    def missing(self) -> list[str]:
        return [n for n, x in zip(self.names, self.values) if not np.isfinite(x)]


def assemble(a: VowelAnalysis, i: VowelAnalysis, subject_id: str = "", label: int = 0) -> FeatureVector:
    """Join the /a/ and /i/ analyses into the canonical 131-vector."""
    if a is None or i is None:
        raise ValueError(f"subject {subject_id}: both vowels are required")
    vals = dict(a.features)
    vals.update(i.features)
    vals["F2_i"] = i.f2
    if a.envelope is not None and i.envelope is not None:
        vals["d1"] = spectral.envelope_distance(i.envelope, a.envelope)
    else:
        vals["d1"] = float("nan")
    vals["F2_conv"] = spectral.f2_convergence(i.f2, a.f2)
    missing_names = [n for n in FEATURE_NAMES if n not in vals]
    if missing_names:
        raise ValueError(f"subject {subject_id}: no value for {missing_names[:3]}...")
    return FeatureVector(subject_id, int(label),
                         np.array([vals[n] for n in FEATURE_NAMES], dtype=float))


def _analyze_entry(entry):
    rec = decode_recording(entry)
    return analyze_vowel(rec)


def extract_corpus(manifest: CorpusManifest, threads: int = 1):
    """Analyse every recording of a manifest; returns (FeatureTable, log rows)."""
    pairs = manifest.pairs()
    entries = [e for pair in pairs for e in pair]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_analyze_entry, entries))
    else:
        results = [_analyze_entry(e) for e in entries]
    rows, log_rows = [], []
    for k, (ea, ei) in enumerate(pairs):
        ra, ri = results[2 * k], results[2 * k + 1]
        for e, r in ((ea, ra), (ei, ri)):
            trim = r.trim or (float("nan"), float("nan"))
            log_rows.append({"subject_id": e.subject_id, "vowel": e.vowel, "path": str(e.path),
                             "trim_start_s": f"{trim[0]:.3f}", "trim_end_s": f"{trim[1]:.3f}",
                             "voiced_fraction": f"{r.voiced_fraction:.3f}",
                             "notes": "; ".join(r.log)})
        fv = assemble(ra, ri, ea.subject_id, ea.label)
        if fv.missing:
            log.info("subject %s: %d missing features", fv.subject_id, len(fv.missing))
        rows.append(fv)
    return FeatureTable.from_vectors(rows), log_rows


@dataclass
class FeatureTable:
    subject_ids: list[str]
    labels: np.ndarray
    values: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES
    scaler: "Standardizer | None" = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.subject_ids), len(self.names)):
            raise ValueError("table shape does not match ids/names")
        if not set(np.unique(self.labels)) <= {0, 1}:
            raise ValueError("labels must be 0/1")

    @classmethod
    def from_vectors(cls, vectors) -> "FeatureTable":
        vectors = list(vectors)
        if not vectors:
            raise ValueError("no feature vectors")
        return cls([v.subject_id for v in vectors], np.array([v.label for v in vectors]),
                   np.vstack([v.values for v in vectors]), vectors[0].names)

    def __len__(self):
        return len(self.subject_ids)

    def columns(self, names) -> np.ndarray:
        idx = [self.names.index(n) for n in names]
        return self.values[:, idx]

    def subset_rows(self, mask_or_idx) -> "FeatureTable":
        idx = np.arange(len(self))[mask_or_idx]
        return FeatureTable([self.subject_ids[k] for k in idx], self.labels[idx],
                            self.values[idx], self.names, self.scaler)

    def select_subjects(self, subject_ids) -> "FeatureTable":
        keep = set(subject_ids)
        return self.subset_rows(np.array([s in keep for s in self.subject_ids]))

    def missing_counts(self) -> dict[str, int]:
        return {s: int(np.sum(~np.isfinite(row))) for s, row in zip(self.subject_ids, self.values)}

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject_id", "label", *self.names])
            for sid, lab, row in zip(self.subject_ids, self.labels, self.values):
                w.writerow([sid, int(lab), *(repr(float(x)) for x in row)])

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"feature table not found: {path}")
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2 or rows[0][:2] != ["subject_id", "label"]:
            raise ValueError(f"{path}: not a feature table")
        names = tuple(rows[0][2:])
        ids = [r[0] for r in rows[1:]]
        labels = np.array([int(r[1]) for r in rows[1:]])
        vals = np.array([[float(x) if x not in ("", "NA") else np.nan for x in r[2:]]
                         for r in rows[1:]])
        return cls(ids, labels, vals, names)


def _normalize_id(sid: str) -> str:
    return sid.zfill(3) if sid.isdigit() else sid


def early_subset(table: FeatureTable, als_ids=EARLY_ALS_SUBJECTS) -> FeatureTable:
    """All controls plus the listed ALS speakers (ids compared zero-padded to 3 digits)."""
    keep = {_normalize_id(s) for s in als_ids}
    mask = np.array([lab == 0 or _normalize_id(sid) in keep
                     for sid, lab in zip(table.subject_ids, table.labels)])
    return table.subset_rows(mask)


@dataclass(frozen=True)
class SurveyRow:
    feature: str
    r: float
    p: float
    n: int
    zero_variance: bool = False

    @property
    def p_threshold(self) -> str:
        return p_threshold(self.p)


def p_threshold(p: float) -> str:
    """Round a p-value up to one significant digit, as ``p<0.0003``."""
    if not np.isfinite(p):
        return "n/a"
    if p <= 0:
        return "p<1e-300"
    e = math.floor(math.log10(p))
    d = math.floor(p / 10 ** e) + 1
    if d == 10:
        d, e = 1, e + 1
    return f"p<{d * 10.0 ** e:.{max(0, -e)}f}" if e > -10 else f"p<{d}e{e}"


def pearson(x, y) -> tuple[float, float, bool]:
    """Pearson r, two-sided p via the t distribution, and a zero-variance flag."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(xc, xc), np.dot(yc, yc)
    if sxx <= 0 or syy <= 0:
        return 0.0, 1.0, True
    r = float(np.clip(np.dot(xc, yc) / math.sqrt(sxx * syy), -1.0, 1.0))
    if n < 3:
        return r, float("nan"), False
    if abs(r) == 1.0:
        return r, 0.0, False
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return r, float(2 * stats.t.sf(abs(t), n - 2)), False


def correlation_survey(table: FeatureTable) -> list[SurveyRow]:
    """Per-feature correlation with the labels, ranked by |r| (ties in canonical order)."""
    if len(table) < 3 or len(np.unique(table.labels)) < 2:
        raise ValueError("survey needs at least 3 rows and both classes")
    rows = []
    for j, name in enumerate(table.names):
        col = table.values[:, j]
        ok = np.isfinite(col)
        if ok.sum() < 3 or len(np.unique(table.labels[ok])) < 2:
            rows.append(SurveyRow(name, 0.0, float("nan"), int(ok.sum()), True))
            continue
        r, p, flat = pearson(col[ok], table.labels[ok])
        rows.append(SurveyRow(name, r, p, int(ok.sum()), flat))
    order = sorted(range(len(rows)), key=lambda k: (-abs(rows[k].r), k))
    return [rows[k] for k in order]


def format_survey(rows, top: int | None = None) -> str:
    lines = [f"{'feature':<12} {'r':>8}  {'p':<12} {'n':>4}"]
    for row in rows[:top]:
        flag = "  (zero variance)" if row.zero_variance else ""
        lines.append(f"{row.feature:<12} {row.r:>8.3f}  {row.p_threshold:<12} {row.n:>4}{flag}")
    return "\n".join(lines) + "\n"


class StandardizationError(RuntimeError):
    pass


@dataclass
class Standardizer:
    """Training-split mean imputation and z-scoring."""
    mean: np.ndarray
    sd: np.ndarray
    passthrough: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        ok = np.isfinite(X)
        count = ok.sum(axis=0)
        total = np.where(ok, X, 0.0).sum(axis=0)
        mean = np.divide(total, count, out=np.zeros(X.shape[1]), where=count > 0)
        filled = np.where(np.isfinite(X), X, mean)
        sd = filled.std(axis=0)
        passthrough = ~(sd > 1e-12 * np.maximum(1.0, np.abs(mean)))
        sd = np.where(passthrough, 1.0, sd)
        return cls(mean, sd, passthrough)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        filled = np.where(np.isfinite(X), X, self.mean)
        return (filled - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist(),
                "passthrough": self.passthrough.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.array(d["mean"], float), np.array(d["sd"], float),
                   np.array(d["passthrough"], bool))


def standardize(table: FeatureTable, train=None, scaler: Standardizer | None = None) -> FeatureTable:
    """Z-score a table with statistics from the ``train`` rows (default: all rows).

    Missing values are replaced by the training mean first. Standardizing an
    already standardized table raises StandardizationError.
    """
    if table.scaler is not None:
        raise StandardizationError("table is already standardized")
    if scaler is None:
        rows = table.values if train is None else table.values[train]
        scaler = Standardizer.fit(rows)
    return FeatureTable(list(table.subject_ids), table.labels.copy(),
                        scaler.transform(table.values), table.names, scaler)


@dataclass(frozen=True)
class DensityCurves:
    feature: str
    grid: np.ndarray
    density_hc: np.ndarray
    density_als: np.ndarray
    bandwidths: tuple[float, float]

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.feature, "density_HC", "density_ALS"])
            for row in zip(self.grid, self.density_hc, self.density_als):
                w.writerow([f"{v:.10g}" for v in row])


def density_export(column, labels, feature: str = "", points: int = 200) -> DensityCurves:
    """Gaussian KDE per class (Silverman bandwidth) on a shared grid."""
    column = np.asarray(column, dtype=float)
    labels = np.asarray(labels)
    ok = np.isfinite(column)
    kdes, bws = [], []
    for c in (0, 1):
        xc = column[ok & (labels == c)]
        if len(xc) < 5:
            raise ValueError(f"class {c}: need at least 5 samples for a density")
        if np.ptp(xc) == 0:
            raise ValueError(f"class {c}: degenerate (single-valued) sample")
        k = stats.gaussian_kde(xc, bw_method="silverman")
        kdes.append(k)
        bws.append(float(np.sqrt(k.covariance[0, 0])))
    pad = 3 * max(bws)
    grid = np.linspace(column[ok].min() - pad, column[ok].max() + pad, points)
    return DensityCurves(feature, grid, kdes[0](grid), kdes[1](grid), (bws[0], bws[1]))
