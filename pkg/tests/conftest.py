import re

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call" or report.outcome != "passed":
        outcome = "PASS" if report.passed else "FAIL"
        prev = _CRITERIA.get(num)
        if prev is None or prev[1] == "PASS":
            _CRITERIA[num] = (m.group(2).replace("_", " "), outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        name, outcome, secs = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {outcome}  {name} ({secs:.2f} s)")
