import shutil
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_REPO = DATA_DIR / "fixture_repo"


@pytest.fixture
def fixture_repo(tmp_path) -> Path:
    """Writable copy of the hand-enumerated 3-file / 9-segment Java corpus."""
    dest = tmp_path / "fixture_repo"
    shutil.copytree(FIXTURE_REPO, dest)
    return dest


@pytest.fixture
def fixture_repo_ro() -> Path:
    """The checked-in corpus itself, for read-only test paths."""
    return FIXTURE_REPO


def write_java(root: Path, relpath: str, text: str) -> Path:
    path = root / relpath
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL/SKIP line per acceptance criterion, every run."""
    try:
        from test_acceptance import CRITERIA
    except ImportError:
        return
    lines = []
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("skipped", "SKIP")):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.rsplit("::", 1)[-1]
            if name in CRITERIA:
                lines.append((name, f"{label}: {CRITERIA[name]}"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        ordered = {name: line for name, line in lines}
        for name in CRITERIA:
            if name in ordered:
                terminalreporter.write_line(ordered[name])
