"""NumPy reference implementations of the hot kernels.

Kept behaviourally identical to the compiled ``_fast`` module; the test suite
runs both against each other.
"""
from math import factorial

import numpy as np


def event_amplitudes(isometry, events):
    """Amplitude rows ``v_mu`` of every detection event.

    Row ``mu`` holds the components of
    ``prod_i (V_iH a_H^+ + V_iV a_V^+)^{d_i} |0> / sqrt(prod_i d_i!)`` in the
    ``|N-m, m>`` basis, so that ``Pr(mu) = <v_mu| rho |v_mu>``.
    """
    iso = np.asarray(isometry, dtype=complex)
    events = np.asarray(events, dtype=np.int64)
    n_events = events.shape[0]
    N = int(events[0].sum()) if n_events else 0
    out = np.zeros((n_events, N + 1), dtype=complex)
    fock = np.sqrt([float(factorial(N - m) * factorial(m)) for m in range(N + 1)])
    for row, event in enumerate(events):
        poly = np.zeros(N + 1, dtype=complex)
        poly[0] = 1.0
        deg = 0
        denom = 1.0
        for i in range(events.shape[1]):
            h, v = iso[i, 0], iso[i, 1]
            for _ in range(event[i]):
                poly[1:deg + 2] = poly[1:deg + 2] * h + poly[:deg + 1] * v
                poly[0] *= h
                deg += 1
            denom *= factorial(int(event[i]))
        out[row] = poly * fock / np.sqrt(denom)
    return out


def params_to_tril(x, d):
    """Lower-triangular ``T`` from ``d`` real diagonal entries then (re, im) pairs."""
    x = np.asarray(x, dtype=float)
    T = np.zeros((d, d), dtype=complex)
    T[np.diag_indices(d)] = x[:d]
    rows, cols = np.tril_indices(d, -1)
    T[rows, cols] = x[d::2] + 1j * x[d + 1::2]
    return T


def residuals_jacobian(x, amps, weights, counts, floor):
    """Pearson residuals of the unnormalized Cholesky model and their Jacobian.

    The model is ``nbar_mu = w_mu * ||T v_mu||^2``; the overall intensity is
    carried by the scale of ``T``. Residuals are ``(nbar - n)/sqrt(max(nbar, floor))``
    so that their squared sum is the chi-squared penalty.
    """
    amps = np.asarray(amps, dtype=complex)
    d = amps.shape[1]
    T = params_to_tril(x, d)
    w = amps @ T.T  # w[mu] = T v_mu
    q = np.sum(w.real**2 + w.imag**2, axis=1)
    nbar = weights * q
    above = nbar >= floor
    denom = np.where(above, nbar, floor)
    sq = np.sqrt(denom)
    r = (nbar - counts) / sq
    safe = np.where(above, nbar, 1.0)
    drdn = np.where(above, (nbar + counts) / (2.0 * safe * np.sqrt(safe)), 1.0 / sq)
    scale = drdn * weights * 2.0

    # z[mu, i, j] = conj(w_i) v_j
    z = w.conj()[:, :, None] * amps[:, None, :]
    J = np.empty((amps.shape[0], d * d))
    J[:, :d] = z[:, np.arange(d), np.arange(d)].real
    rows, cols = np.tril_indices(d, -1)
    J[:, d::2] = z[:, rows, cols].real
    J[:, d + 1::2] = -z[:, rows, cols].imag
    J *= scale[:, None]
    return r, J
