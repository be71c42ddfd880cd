import numpy as np
import pytest

from amenable_entropy import _kernels
from amenable_entropy.group import centered_boxes


@pytest.fixture(params=["numpy", "numba"])
def backend(request, monkeypatch):
    """Run the test once per kernel flavour."""
    table = _kernels.NUMPY if request.param == "numpy" else _kernels.NUMBA
    monkeypatch.setattr(_kernels, "_ACTIVE", table)
    return request.param


@pytest.fixture
def zbox():
    return centered_boxes(1)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20261014))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
