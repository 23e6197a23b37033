import os
import sys

import pytest

HERE = os.path.dirname(__file__)
sys.path.insert(0, HERE)

from epiprover.diffalg import DiffForm  # noqa: E402

ACCEPTANCE = {}


def load_golden(name):
    """Sections '== label' followed by a form in the text format."""
    with open(os.path.join(HERE, "data", name), encoding="utf-8") as fh:
        text = fh.read()
    out = {}
    for chunk in text.split("== ")[1:]:
        label, body = chunk.split("\n", 1)
        out[label.strip()] = DiffForm.from_text(body)
    return out


@pytest.fixture
def golden():
    return load_golden


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
