from datetime import datetime

import numpy as np
import pytest

from amiwav.load_model import LoadProfile

MONDAY = datetime(2013, 5, 27)


def profile(values, cid="c0", start=MONDAY, **kw):
    return LoadProfile(cid, start, np.asarray(values, dtype=float), **kw)


@pytest.fixture
def make_profile():
    return profile


# --- acceptance summary -----------------------------------------------------

_CRITERIA: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion n")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, [title, "PASS", ""])
    rep_outcome = None
    if call.excinfo is not None and call.when in ("setup", "call"):
        rep_outcome = "FAIL"
        entry[2] = str(call.excinfo.value).splitlines()[0][:120] if str(call.excinfo.value) else call.excinfo.typename
    if rep_outcome:
        entry[1] = rep_outcome
    detail = getattr(item, "acceptance_detail", None)
    if detail and entry[1] == "PASS":
        entry[2] = detail


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, outcome, detail = _CRITERIA[n]
        line = f"{outcome} criterion {n:2d}: {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
