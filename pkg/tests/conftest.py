from __future__ import annotations

import re
import sys
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("lab", max_examples=60, deadline=None)
settings.load_profile("lab")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    mods = [m for name, m in list(sys.modules.items()) if name.split(".")[-1] == "test_acceptance"]
    lines = getattr(mods[0], "RESULTS", None) if mods else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(re.search(r"criterion\s+(\d+)", s).group(1))):
            terminalreporter.write_line(line)
