import numpy as np
import pytest


def random_stable(rng, n, margin=0.1, scale=1.0):
    """Random real matrix shifted so its spectral abscissa is ``-margin``."""
    A = scale * rng.standard_normal((n, n))
    alpha = np.max(np.linalg.eigvals(A).real)
    return A - (alpha + margin) * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n = report.nodeid.split("test_criterion_")[1].split("_")[0]
        detail = dict(report.user_properties).get("summary", "")
        _CRITERIA[int(n)] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, detail = _CRITERIA[n]
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"criterion {n}: {verdict}  {detail}")
