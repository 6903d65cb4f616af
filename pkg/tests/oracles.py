"""Independent reference computations used by the tests.

Nothing here imports the package's optics code: creation operators are built
as explicit matrices on a truncated two-mode Fock space, and multiphoton
amplitudes through the linear network come from brute-force permanents.
"""
from itertools import permutations
from math import factorial, prod

import numpy as np

FORMS = [(0, 1), (1, 0), (1, 1), (-1, 1), (1, 1j), (-1, 1j)]  # (H, V) per detector


def creation_ops(cutoff):
    """a_H^+, a_V^+ on the two-mode space with occupation < cutoff per mode."""
    a_dag = np.diag(np.sqrt(np.arange(1, cutoff)), -1).astype(complex)
    eye = np.eye(cutoff)
    return np.kron(a_dag, eye), np.kron(eye, a_dag)


def numerator_vector(event):
    """Unnormalized projector numerator, as a vector indexed by (n_H, n_V)."""
    N = sum(event)
    cutoff = N + 1
    aH, aV = creation_ops(cutoff)
    vec = np.zeros(cutoff * cutoff, dtype=complex)
    vec[0] = 1
    for (h, v), k in zip(FORMS, event):
        for _ in range(k):
            vec = (h * aH + v * aV) @ vec
    return vec.reshape(cutoff, cutoff)


def numerator_norm2(event):
    return float(np.sum(np.abs(numerator_vector(event)) ** 2))


def sector_vector(event):
    """Numerator restricted to |N-m, m>, m ascending."""
    grid = numerator_vector(event)
    N = sum(event)
    return np.array([grid[N - m, m] for m in range(N + 1)])


def permanent(M):
    n = M.shape[0]
    if n == 0:
        return 1.0
    return sum(prod(M[i, s[i]] for i in range(n)) for s in permutations(range(n)))


def event_probability_by_permanents(psi, event, isometry):
    """Pr(event) for a pure input state via the transfer matrix.

    Detector i registers mode sum_k V_ik a_k^+, so the input creation
    operators map as a_k^+ -> sum_i conj(V_ik) b_i^+.
    """
    W = np.conj(np.asarray(isometry))
    N = len(psi) - 1
    rows = [i for i, k in enumerate(event) for _ in range(k)]
    amp = 0j
    for m, alpha in enumerate(psi):
        n_in = (N - m, m)
        cols = [k for k, c in enumerate(n_in) for _ in range(c)]
        sub = W[np.ix_(rows, cols)]
        norm = np.sqrt(float(prod(factorial(c) for c in n_in) * prod(factorial(k) for k in event)))
        amp += alpha * permanent(sub) / norm
    return abs(amp) ** 2
