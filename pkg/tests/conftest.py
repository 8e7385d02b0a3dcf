import re

import pytest

_KEY = pytest.StashKey[dict]()
_LABEL = re.compile(r"test_criterion_0*(\d+[a-z]?)_")


def pytest_configure(config):
    config.stash[_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record the verdict line for one acceptance criterion."""
    lines = request.config.stash[_KEY]

    def record(label: str, ok: bool, detail: str) -> bool:
        lines[label] = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        print(lines[label])
        return ok

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = _LABEL.search(item.name)
    if m and report.when == "call" and call.excinfo is not None:
        # a criterion that crashed before recording still gets a FAIL line
        lines = item.config.stash[_KEY]
        lines.setdefault(m.group(1), f"FAIL criterion {m.group(1)}: "
                                     f"{call.excinfo.typename}: {call.excinfo.value}")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_KEY]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(lines, key=lambda s: (int(re.match(r"\d+", s).group()), s)):
        terminalreporter.write_line(lines[label])
