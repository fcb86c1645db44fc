import pytest
import torch

from glasstryon.backbones.toy import toy_bundle
from glasstryon.latent import LatentSplit

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_", "", 1)
    _acceptance_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _acceptance_results:
        status = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"  [{status}] {name}")


@pytest.fixture(scope="session")
def bundle():
    return toy_bundle(64)


@pytest.fixture(scope="session")
def toy_split():
    return LatentSplit.default(3)


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)
