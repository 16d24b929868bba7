import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIOS


@pytest.fixture
def record():
    """``record(k, passed, text)`` stores the summary line for criterion ``k``."""

    def _record(k: int, passed: bool, text: str) -> bool:
        ACCEPTANCE[k] = f"{'PASS' if passed else 'FAIL'} criterion {k}: {text}"
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
