import pytest

_acceptance_results: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(label): a top-level acceptance criterion; its verdict is"
        " echoed in the terminal summary",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        _acceptance_results[marker.args[0]] = report.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"{label}: {'PASS' if passed else 'FAIL'}")
