import numpy as np
import pytest

from cbrn.codec import DatasetManifest, vectorize
from cbrn.learning import train_system
from cbrn.model import CbrnSystem, SystemConfig


@pytest.fixture(scope="session")
def manifest():
    return DatasetManifest.default()


@pytest.fixture(scope="session")
def dataset_images(manifest):
    return manifest.resolve()


@pytest.fixture(scope="session")
def dataset_vectors(dataset_images):
    return {name: [vectorize(img) for img in imgs] for name, imgs in dataset_images.items()}


@pytest.fixture(scope="session")
def trained(dataset_vectors):
    """Default 116x116 system after the full training run; treat as read-only."""
    system = CbrnSystem(SystemConfig())
    report = train_system(system, dataset_vectors)
    return system, report


@pytest.fixture
def trained_copy(trained):
    return trained[0].copy()



def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = dict(report.user_properties).get("criterion")
    if name is not None:
        _CRITERIA.append((name, report.outcome))


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


_CRITERIA: list[tuple[str, str]] = []
