"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("acceptance")
    if label is None:
        return
    if report.when == "call" or report.failed:
        if report.failed:
            _ACCEPTANCE[label] = "FAIL"
        else:
            _ACCEPTANCE.setdefault(label, "PASS" if report.passed else "SKIP")


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{outcome}  {label}")
    passed = sum(v == "PASS" for v in _ACCEPTANCE.values())
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE)} criteria passed")
