import numpy as np
import pytest

from polartomo import _kernels
from polartomo._kernels import _pure
from polartomo.optics import DEFAULT_ISOMETRY, enumerate_events

from conftest import _fast


def _problem(N, seed):
    rng = np.random.default_rng(seed)
    d = N + 1
    events = np.array(enumerate_events(N), dtype=np.int64)
    amps = _pure.event_amplitudes(DEFAULT_ISOMETRY, events)
    x = rng.normal(size=d * d) * 10
    weights = rng.uniform(0.2, 1, size=len(events))
    counts = rng.poisson(50, size=len(events)).astype(float)
    counts[::4] = 0
    return amps, x, weights, counts


def test_backend_flag():
    assert _kernels.BACKEND in ("cython", "pure")


@pytest.mark.parametrize("N", [1, 3, 6])
def test_amplitudes_agree_across_backends(kernels, N):
    events = np.array(enumerate_events(N), dtype=np.int64)
    ref = _pure.event_amplitudes(DEFAULT_ISOMETRY, events)
    np.testing.assert_allclose(kernels.event_amplitudes(DEFAULT_ISOMETRY, events), ref, atol=1e-13)


@pytest.mark.parametrize("N", [1, 2, 4])
def test_residuals_agree_across_backends(kernels, N):
    amps, x, weights, counts = _problem(N, N)
    r0, J0 = _pure.residuals_jacobian(x, amps, weights, counts, 0.5)
    r1, J1 = kernels.residuals_jacobian(x, amps, weights, counts, 0.5)
    np.testing.assert_allclose(r1, r0, atol=1e-12)
    np.testing.assert_allclose(J1, J0, atol=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_jacobian_matches_finite_differences(kernels, N):
    amps, x, weights, counts = _problem(N, 100 + N)
    _, J = kernels.residuals_jacobian(x, amps, weights, counts, 0.5)
    h = 1e-6
    fd = np.empty_like(J)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        fd[:, k] = (kernels.residuals_jacobian(x + e, amps, weights, counts, 0.5)[0]
                    - kernels.residuals_jacobian(x - e, amps, weights, counts, 0.5)[0]) / (2 * h)
    np.testing.assert_allclose(J, fd, atol=1e-6 * max(1, np.abs(fd).max()))


def test_params_to_tril_layout():
    T = _pure.params_to_tril(np.arange(1.0, 10.0), 3)
    np.testing.assert_allclose(np.diag(T), [1, 2, 3])
    assert T[1, 0] == 4 + 5j and T[2, 0] == 6 + 7j and T[2, 1] == 8 + 9j
    assert np.all(np.triu(T, 1) == 0)


@pytest.mark.skipif(_fast is None, reason="compiled kernels not built")
def test_compiled_backend_selected_by_default():
    import os

    if not os.environ.get("POLARTOMO_PURE"):
        assert _kernels.BACKEND == "cython"
