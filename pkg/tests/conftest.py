from __future__ import annotations

import json
import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def write_lines(tmp_path):
    """Write dicts (or raw strings) as one JSON object per line; returns the path."""

    def _write(name, rows):
        p = tmp_path / name
        with open(p, "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")
        return p

    return _write


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict_line():
    """Record the one-line outcome of an acceptance criterion for the summary."""

    def _record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
