import os
from pathlib import Path

import numpy as np
import pytest

from vowelmark.synth import as_recording, pulse_train

FS = 44100


@pytest.fixture(scope="session")
def pulse_120():
    return as_recording(0.5 * pulse_train(120.0, 3.0, FS), FS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus_manifest():
    """Path of a manifest for the public recordings, or skip."""
    path = os.environ.get("VOWELMARK_MANIFEST")
    if not path or not Path(path).is_file():
        pytest.skip("public corpus not available (set VOWELMARK_MANIFEST)")
    return Path(path)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and assert one acceptance criterion; lines are echoed in the summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(label, ok, detail=""):
        """``ok=None`` reports the criterion as skipped."""
        word = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{word}  {label}  {detail}".rstrip()
        lines.append(line)
        print(line)
        if ok is None:
            pytest.skip(detail)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
