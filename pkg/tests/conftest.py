"""Shared fixtures: bundled example texts and the acceptance reporter."""

from __future__ import annotations

from contextlib import contextmanager
from importlib import resources

import pytest

_ACCEPTANCE_LINES: list[str] = []


def bundled_text(name: str) -> str:
    return (resources.files("commcheck") / "bundled" / name).read_text()


@pytest.fixture(scope="session")
def fdiff_protocol_text() -> str:
    return bundled_text("fdiff.cty")


@pytest.fixture(scope="session")
def fdiff_program_text() -> str:
    return bundled_text("fdiff.mmp")


@pytest.fixture(scope="session")
def fdiff_flat_program_text() -> str:
    return bundled_text("fdiff_flat.mmp")


@pytest.fixture
def acceptance():
    """Context manager factory recording one pass/fail line per criterion."""

    @contextmanager
    def run(number: int, name: str):
        try:
            yield
        except BaseException:
            _ACCEPTANCE_LINES.append(f"ACCEPTANCE {number} ({name}): FAIL")
            raise
        _ACCEPTANCE_LINES.append(f"ACCEPTANCE {number} ({name}): PASS")

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
