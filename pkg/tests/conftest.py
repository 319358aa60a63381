from __future__ import annotations

import pytest

_outcomes: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        n, title = mark.args
        detail = getattr(item, "criterion_detail", "")
        _outcomes.setdefault(n, []).append((title, report.passed, report.skipped, detail))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        rows = _outcomes[n]
        title = rows[0][0]
        if all(skipped for _, _, skipped, _ in rows):
            verdict = "SKIP"
        else:
            verdict = "PASS" if all(ok or skipped for _, ok, skipped, _ in rows) else "FAIL"
        details = "; ".join(d for *_, d in rows if d)
        terminalreporter.write_line(f"criterion {n}: {verdict}  {title}" + (f"  [{details}]" if details else ""))
