import numpy as np
import pytest

from polartomo import _kernels
from polartomo._kernels import _pure
from polartomo.optics import povm_elements

ACCEPTANCE_LINES: list[str] = []

BACKENDS = [pytest.param(_pure, id="pure")]
try:
    from polartomo._kernels import _fast
except ImportError:  # pragma: no cover - depends on the build
    _fast = None
else:
    BACKENDS.append(pytest.param(_fast, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def use_pure_backend(monkeypatch):
    monkeypatch.setattr(_kernels, "event_amplitudes", _pure.event_amplitudes)
    monkeypatch.setattr(_kernels, "residuals_jacobian", _pure.residuals_jacobian)


@pytest.fixture(scope="session")
def povm1():
    return povm_elements(1)


@pytest.fixture(scope="session")
def povm2():
    return povm_elements(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20161)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
