import pytest

from thermoshell.calibration import calibrated_config
from thermoshell.simulator import Plant


@pytest.fixture(scope="session")
def calibrated():
    return calibrated_config()


@pytest.fixture(scope="session")
def calibrated_plant(calibrated):
    return Plant(calibrated)


@pytest.fixture(scope="session")
def reduced(calibrated_plant):
    from thermoshell.controller.model import identify_reduced_model

    return identify_reduced_model(calibrated_plant)


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if report.failed or report.when == "call":
        _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {title}: {verdict}" + (f"  ({detail})" if detail else ""))
