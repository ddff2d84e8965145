"""Corpus manifests, WAV decoding, resampling and silence trimming."""
from __future__ import annotations

import csv
import logging
import os
import re
import wave
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal

log = logging.getLogger(__name__)

VOWELS = ("a", "i")
LABEL_NAMES = {0: "HC", 1: "ALS"}
MANIFEST_COLUMNS = ("subject_id", "vowel", "label", "path")

# ALS speakers recorded within 12 months of symptom onset (clinical table of
# the public database); with the 33 controls they form the 45-speaker
# early-detection subset.
EARLY_ALS_SUBJECTS = (
    "022", "025", "028", "031", "039", "046",
    "055", "058", "068", "072", "076", "078",
)


class CorpusError(ValueError):
    """Raised for unusable manifests or audio files."""


@dataclass(frozen=True)
class VoiceRecording:
    samples: np.ndarray
    sample_rate: float
    subject_id: str = ""
    vowel: str = "a"
    label: int = 0
    trim: tuple[float, float] | None = None

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", x)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    vowel: str
    label: int
    path: Path


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    source: Path | None = None
    counts: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.counts = _class_counts(self.entries)

    @property
    def subjects(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.subject_id, None)
        return list(seen)

    def pairs(self) -> list[tuple[ManifestEntry, ManifestEntry]]:
        """(/a/, /i/) entry pairs per subject, in manifest order."""
        by_subject: dict[str, dict[str, ManifestEntry]] = {}
        for e in self.entries:
            by_subject.setdefault(e.subject_id, {})[e.vowel] = e
        return [(by_subject[s]["a"], by_subject[s]["i"]) for s in self.subjects]

    def restrict(self, subject_ids) -> "CorpusManifest":
        keep = set(subject_ids)
        return CorpusManifest([e for e in self.entries if e.subject_id in keep], self.source)


def _class_counts(entries) -> dict[str, int]:
    labels = {}
    for e in entries:
        labels[e.subject_id] = e.label
    counts = {name: 0 for name in LABEL_NAMES.values()}
    for lab in labels.values():
        counts[LABEL_NAMES[lab]] += 1
    counts["subjects"] = len(labels)
    counts["entries"] = len(entries)
    return counts


def _parse_label(raw: str, where: str) -> int:
    token = raw.strip().upper()
    aliases = {"0": 0, "1": 1, "HC": 0, "ALS": 1}
    if token not in aliases:
        raise CorpusError(f"{where}: label must be 0/1 (got {raw!r})")
    return aliases[token]


def _parse_vowel(raw: str, where: str) -> str:
    v = raw.strip().lower().strip("/")
    if v not in VOWELS:
        raise CorpusError(f"{where}: vowel must be 'a' or 'i' (got {raw!r})")
    return v


def load_corpus(manifest_path, check_audio: bool = True) -> CorpusManifest:
    """Read and validate a manifest file.

    The manifest is delimiter-separated UTF-8 text (comma, tab or semicolon)
    with a header row naming ``subject_id, vowel, label, path``. Relative
    audio paths resolve against the manifest's directory.

    Raises
    ------
    CorpusError
        On a missing manifest or audio file, an empty manifest, labels outside
        {0, 1}, a subject without exactly one /a/ and one /i/ entry, or audio
        that is not 16-bit linear PCM.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise CorpusError(f"manifest not found: {manifest_path}")
    text = manifest_path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise CorpusError(f"{manifest_path}: no entries")
    try:
        dialect = csv.Sniffer().sniff(lines[0], delimiters=",\t;")
    except csv.Error:
        dialect = csv.excel
    reader = csv.DictReader(lines, dialect=dialect)
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise CorpusError(f"{manifest_path}: header lacks column(s) {', '.join(missing)}")

    base = manifest_path.parent
    entries = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        where = f"{manifest_path}:{lineno}"
        path = Path(row["path"])
        if not path.is_absolute():
            path = base / path
        entries.append(ManifestEntry(
            subject_id=row["subject_id"],
            vowel=_parse_vowel(row["vowel"], where),
            label=_parse_label(row["label"], where),
            path=path,
        ))
    if not entries:
        raise CorpusError(f"{manifest_path}: no entries")

    _check_pairing(entries)
    if check_audio:
        for e in entries:
            if not e.path.is_file():
                raise CorpusError(f"audio file not found: {e.path}")
            _check_wav_header(e.path)

    manifest = CorpusManifest(entries, manifest_path)
    c = manifest.counts
    log.info("corpus %s: %d subjects (%d ALS, %d HC), %d recordings",
             manifest_path, c["subjects"], c["ALS"], c["HC"], c["entries"])
    return manifest


def _check_pairing(entries):
    vowels: dict[str, list[str]] = {}
    labels: dict[str, set[int]] = {}
    for e in entries:
        vowels.setdefault(e.subject_id, []).append(e.vowel)
        labels.setdefault(e.subject_id, set()).add(e.label)
    for subject, vs in vowels.items():
        if sorted(vs) != ["a", "i"]:
            raise CorpusError(
                f"subject {subject}: needs exactly one /a/ and one /i/ recording (got {sorted(vs)})")
        if len(labels[subject]) != 1:
            raise CorpusError(f"subject {subject}: /a/ and /i/ entries carry different labels")


def _check_wav_header(path: Path):
    try:
        with wave.open(str(path), "rb") as w:
            width, channels, nframes = w.getsampwidth(), w.getnchannels(), w.getnframes()
    except (wave.Error, EOFError) as exc:
        raise CorpusError(f"{path}: not a linear-PCM WAV file ({exc})") from exc
    if width != 2:
        raise CorpusError(f"{path}: unsupported encoding, {8 * width}-bit PCM (need 16-bit)")
    if channels not in (1, 2):
        raise CorpusError(f"{path}: unsupported channel count {channels}")
    if nframes == 0:
        raise CorpusError(f"{path}: zero-length audio")


def decode_recording(entry: ManifestEntry) -> VoiceRecording:
    """Decode a 16-bit PCM WAV file into a mono recording scaled by 2**-15."""
    path = Path(entry.path)
    _check_wav_header(path)
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise CorpusError(f"{path}: corrupt WAV data ({exc})") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise CorpusError(f"{path}: zero-length audio")
    pcm = pcm[: pcm.size - pcm.size % channels].reshape(-1, channels)
    x = pcm.astype(float).mean(axis=1) / 32768.0
    return VoiceRecording(x, float(rate), entry.subject_id, entry.vowel, entry.label)


def write_wav(path, samples, sample_rate: int):
    """Write a mono 16-bit PCM WAV file (samples in [-1, 1))."""
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def resample_signal(x, source_rate: float, target_rate: float, half_width: int = 10) -> np.ndarray:
    """Polyphase windowed-sinc resampling with cutoff 0.45 * min(rates)."""
    if target_rate <= 0 or source_rate <= 0:
        raise ValueError("sample rates must be positive")
    x = np.asarray(x, dtype=float)
    if target_rate == source_rate:
        return x.copy()
    ratio = Fraction(target_rate).limit_denominator(10_000) / Fraction(source_rate).limit_denominator(10_000)
    up, down = ratio.numerator, ratio.denominator
    fs_up = source_rate * up
    cutoff = 0.45 * min(source_rate, target_rate)
    ntaps = 2 * half_width * max(up, down) + 1
    # resample_poly applies the gain of `up` itself
    taps = signal.firwin(ntaps, cutoff, fs=fs_up, window=("kaiser", 8.0))
    return signal.resample_poly(x, up, down, window=taps)


def resample(rec: VoiceRecording, target_rate: float) -> VoiceRecording:
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == rec.sample_rate:
        return rec
    y = resample_signal(rec.samples, rec.sample_rate, target_rate)
    return replace(rec, samples=y, sample_rate=float(target_rate))


def trim_silence(rec: VoiceRecording, threshold_db: float = -40.0,
                 hangover: float = 0.2, frame: float = 0.01) -> VoiceRecording:
    """Cut leading and trailing segments quieter than ``threshold_db`` dBFS.

    Activity is decided on 10 ms RMS frames; ``hangover`` seconds are kept on
    either side of the first and last active frame. A recording with no
    active frame is returned untouched. The kept span is recorded in ``trim``.
    """
    x = rec.samples
    n = max(1, int(round(frame * rec.sample_rate)))
    nframes = len(x) // n
    if nframes == 0:
        return replace(rec, trim=(0.0, rec.duration))
    frames = x[: nframes * n].reshape(nframes, n)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    level = 20 * np.log10(np.maximum(rms, 1e-12))
    active = np.flatnonzero(level >= threshold_db)
    if active.size == 0:
        return replace(rec, trim=(0.0, rec.duration))
    keep = int(round(hangover * rec.sample_rate))
    start = max(0, active[0] * n - keep)
    stop = min(len(x), (active[-1] + 1) * n + keep)
    log.debug("trim %s/%s: kept %.3f-%.3f s of %.3f s", rec.subject_id, rec.vowel,
              start / rec.sample_rate, stop / rec.sample_rate, rec.duration)
    return replace(rec, samples=x[start:stop],
                   trim=(start / rec.sample_rate, stop / rec.sample_rate))


_LABEL_DIRS = {"als": 1, "patient": 1, "patients": 1, "hc": 0, "healthy": 0,
               "normal": 0, "control": 0, "controls": 0}


def import_directory(root, manifest_path=None,
                     pattern: str = r"(?P<subject>\d+)[^/]*?_(?P<vowel>[ai])\d*[_.]") -> CorpusManifest:
    """Build a manifest from a directory tree of WAV files.

    Labels come from the nearest parent directory named like ``ALS`` or
    ``HC``/``Normal``; subject id and vowel come from ``pattern`` applied to
    the file name (default matches names like ``008_a1_PCGITA.wav``).
    Written to ``manifest_path`` when given.
    """
    root = Path(root)
    rx = re.compile(pattern, re.IGNORECASE)
    entries = []
    for path in sorted(root.rglob("*")):
        if path.suffix.lower() != ".wav":
            continue
        label = None
        for part in reversed(path.relative_to(root).parts[:-1]):
            label = _LABEL_DIRS.get(part.lower())
            if label is not None:
                break
        m = rx.search(path.name)
        if label is None or m is None:
            log.warning("skipping %s: cannot infer label/subject/vowel", path)
            continue
        entries.append(ManifestEntry(m.group("subject"), m.group("vowel").lower(), label, path))
    if not entries:
        raise CorpusError(f"{root}: no recognisable recordings")
    entries.sort(key=lambda e: (e.label, e.subject_id, e.vowel))
    _check_pairing(entries)
    manifest = CorpusManifest(entries, Path(manifest_path) if manifest_path else None)
    if manifest_path is not None:
        write_manifest(manifest, manifest_path)
    return manifest


def write_manifest(manifest: CorpusManifest, path):
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            p = Path(e.path).resolve()
            try:
                p = Path(os.path.relpath(p, base))
            except ValueError:
                pass
            w.writerow([e.subject_id, e.vowel, e.label, p.as_posix()])
