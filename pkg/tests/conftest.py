import re

_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
        if not m:
            return
        detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE.append((m.group(1), status, f"{m.group(2)}  {detail}".rstrip()))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, text in sorted(_ACCEPTANCE, key=lambda r: int(r[0])):
        terminalreporter.write_line(f"criterion {int(num):2d}: {status}  {text}")
