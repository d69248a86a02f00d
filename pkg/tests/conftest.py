import os
import re

import pytest

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    """Keep the case 4 reference cache out of the user's home directory."""
    old = os.environ.get("PBMSPLIT_CACHE")
    os.environ["PBMSPLIT_CACHE"] = str(tmp_path_factory.mktemp("pbmsplit-cache"))
    yield
    if old is None:
        os.environ.pop("PBMSPLIT_CACHE", None)
    else:
        os.environ["PBMSPLIT_CACHE"] = old


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {detail}")
