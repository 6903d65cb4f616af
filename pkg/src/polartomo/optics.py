"""The fixed six-detector polarization analyser.

The input beam is split 1:2 and then 1:1 into three paths that project onto
the H/V, diagonal/antidiagonal and circular bases, each path ending on a
polarizing beam splitter and two photon-number-resolving detectors.

Detector ``i`` registers photons in the mode ``V[i, 0] a_H^+ + V[i, 1] a_V^+``
where ``V`` is the 6x2 :data:`DEFAULT_ISOMETRY`. The row norms carry the
path-splitting ratios, so ``V^+ V = I`` makes the event POVM complete.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .qudit import DimensionError, GeneratorBasis, PolarizationState, StateVector, generator_basis

N_DETECTORS = 6
MAX_PHOTONS = 10

# Detected-mode coefficients (H, V): d1 <-> a_V^+, d2 <-> a_H^+,
# d3 <-> a_V^+ + a_H^+, d4 <-> a_V^+ - a_H^+, d5 <-> i a_V^+ + a_H^+,
# d6 <-> i a_V^+ - a_H^+.
_DETECTOR_FORMS = ((0, 1), (1, 0), (1, 1), (-1, 1), (1, 1j), (-1, 1j))
DEFAULT_ISOMETRY = np.array(
    [[complex(h), complex(v)] for h, v in _DETECTOR_FORMS], dtype=complex
) / np.sqrt([3, 3, 6, 6, 6, 6])[:, None]
DEFAULT_ISOMETRY.setflags(write=False)

Event = tuple[int, int, int, int, int, int]


class NetworkError(ValueError):
    """Raised for a splitting network that is not an isometry."""


def event_count(N: int) -> int:
    """Number of distinct N-fold coincidence patterns, ``C(N+5, 5)``."""
    return comb(N + N_DETECTORS - 1, N_DETECTORS - 1)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_events(N: int) -> list[Event]:
    """All six-detector patterns summing to ``N``, in lexicographic order."""
    if N < 0:
        raise DimensionError(f"photon number must be non-negative, got {N}")
    # ascending first entry with lexicographic tails is lexicographic overall
    return list(_compositions(N, N_DETECTORS))


def _check_event(event) -> Event:
    ev = tuple(int(k) for k in event)
    if len(ev) != N_DETECTORS or min(ev) < 0:
        raise ValueError(f"event must be six non-negative integers, got {event!r}")
    return ev  # type: ignore[return-value]


# --- exact creation-operator algebra ---------------------------------------
# A homogeneous polynomial in (a_H^+, a_V^+) is stored as a list indexed by the
# power of a_V^+, with Gaussian-integer coefficients as (re, im) int pairs.

def _gmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _gadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


_GAUSSIAN_FORMS = (
    ((0, 0), (1, 0)),
    ((1, 0), (0, 0)),
    ((1, 0), (1, 0)),
    ((-1, 0), (1, 0)),
    ((1, 0), (0, 1)),
    ((-1, 0), (0, 1)),
)


def expand_creation_product(event) -> list[tuple[int, int]]:
    """Exact expansion of the unnormalized projector numerator of ``event``.

    Returns the Gaussian-integer coefficient of ``a_H^{+(N-m)} a_V^{+m}`` for
    ``m = 0 .. N``.
    """
    ev = _check_event(event)
    poly = [(1, 0)]
    for (h, v), k in zip(_GAUSSIAN_FORMS, ev):
        for _ in range(k):
            new = [(0, 0)] * (len(poly) + 1)
            for m, c in enumerate(poly):
                new[m] = _gadd(new[m], _gmul(c, h))
                new[m + 1] = _gadd(new[m + 1], _gmul(c, v))
            poly = new
    return poly


def numerator_norm_squared(event) -> int:
    """Exact squared norm of the two-mode numerator vector ``prod(...)|0>``."""
    poly = expand_creation_product(event)
    N = len(poly) - 1
    return sum((re * re + im * im) * factorial(N - m) * factorial(m) for m, (re, im) in enumerate(poly))


def projected_state(event) -> StateVector:
    """Normalized state the analyser projects onto for ``event``."""
    ev = _check_event(event)
    if sum(ev) == 0:
        raise ValueError("the all-zero event has no projector")
    poly = expand_creation_product(ev)
    N = len(poly) - 1
    amps = np.array(
        [complex(re, im) * np.sqrt(float(factorial(N - m) * factorial(m))) for m, (re, im) in enumerate(poly)]
    )
    return StateVector(amps)


def pair_normalization(di: int, dj: int) -> int:
    """Alternating factorial sum for one analysis path with counts ``(di, dj)``.

    Equals the squared norm of ``(a_V^+ + a_H^+)^di (a_V^+ - a_H^+)^dj |0>``.
    """
    total = 0
    for i1 in range(di + 1):
        for j1 in range(dj + 1):
            s = i1 + j1
            weight = comb(di, i1) * comb(dj, j1) * (-1) ** j1
            for i2 in range(max(0, s - dj), min(di, s) + 1):
                j2 = s - i2
                total += (
                    weight * comb(di, i2) * comb(dj, j2) * (-1) ** j2
                    * factorial(di + dj - s) * factorial(s)
                )
    return total


def normalization_factor(event) -> int:
    """Projector normalization ``d1! d2! N2(d3, d4) N2(d5, d6)``.

    This is the product of the three per-path squared norms, i.e. the norm of
    the numerator with photons in different paths treated as distinguishable.
    It coincides with :func:`numerator_norm_squared` only when all photons
    land in a single path.
    """
    d1, d2, d3, d4, d5, d6 = _check_event(event)
    return factorial(d1) * factorial(d2) * pair_normalization(d3, d4) * pair_normalization(d5, d6)


# --- POVM --------------------------------------------------------------------

@dataclass(frozen=True)
class PovmElement:
    """Rank-one POVM element ``weight * |state><state|`` for one event."""

    event: Event
    weight: float
    state: StateVector

    @property
    def operator(self) -> np.ndarray:
        return self.weight * self.state.density_matrix().matrix


class Povm(Sequence[PovmElement]):
    """Event POVM of the analyser for a fixed photon number.

    Besides behaving as a sequence of :class:`PovmElement`, it keeps the
    stacked amplitude rows used by the vectorized probability code:
    ``amplitudes[mu]`` is ``sqrt(weight) * state`` for event ``mu``.
    """

    def __init__(self, N: int, events: list[Event], amplitudes: np.ndarray, isometry: np.ndarray):
        self.N = N
        self.events = events
        self.amplitudes = amplitudes
        self.isometry = isometry
        self.weights = np.sum(np.abs(amplitudes) ** 2, axis=1)
        self._index = {ev: k for k, ev in enumerate(events)}

    @property
    def dim(self) -> int:
        return self.N + 1

    def __len__(self):
        return len(self.events)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        w = float(self.weights[k])
        if w > 0:
            state = StateVector(self.amplitudes[k])
        else:
            state = StateVector(np.eye(self.dim)[0])
        return PovmElement(self.events[k], w, state)

    def index(self, event) -> int:
        return self._index[tuple(int(x) for x in event)]

    @property
    def states(self) -> np.ndarray:
        norms = np.sqrt(self.weights)
        return self.amplitudes / np.where(norms > 0, norms, 1.0)[:, None]

    def operator_sum(self) -> np.ndarray:
        a = self.amplitudes
        return a.T @ a.conj()

    def to_json(self, basis: GeneratorBasis | None = None) -> dict:
        states = self.states
        out = {
            "N": self.N,
            "events": [list(ev) for ev in self.events],
            "weights": self.weights.tolist(),
            "states": [{"re": s.real.tolist(), "im": s.imag.tolist()} for s in states],
        }
        if basis is not None:
            out["B"] = b_matrix(self.N, basis, self).tolist()
        return out


def check_isometry(isometry) -> np.ndarray:
    V = np.asarray(isometry, dtype=complex)
    if V.shape != (N_DETECTORS, 2):
        raise NetworkError(f"network must be a 6x2 matrix, got shape {V.shape}")
    if np.max(np.abs(V.conj().T @ V - np.eye(2))) > 1e-12:
        raise NetworkError("network matrix is not an isometry (V^+ V != I)")
    return V


def povm_elements(N: int, isometry=None) -> Povm:
    """Build the event POVM for ``N`` photons through the given network."""
    if N < 1 or N > MAX_PHOTONS:
        raise DimensionError(f"photon number must lie in 1..{MAX_PHOTONS}, got {N}")
    V = check_isometry(DEFAULT_ISOMETRY if isometry is None else isometry)
    events = enumerate_events(N)
    amps = _kernels.event_amplitudes(V, np.array(events, dtype=np.int64))
    return Povm(N, events, amps, V)


def event_probabilities(rho: PolarizationState, povm: Povm) -> np.ndarray:
    """``Pr(mu) = K_mu <psi_mu|rho|psi_mu>`` for every event, in POVM order."""
    if rho.dim != povm.dim:
        raise DimensionError(f"state dim {rho.dim} != POVM dim {povm.dim}")
    a = povm.amplitudes
    p = np.einsum("mi,ij,mj->m", a.conj(), rho.matrix, a).real
    return np.clip(p, 0.0, None)


def b_matrix(N: int, basis: GeneratorBasis, povm: Povm) -> np.ndarray:
    """Expectation values ``<psi_mu|g_v|psi_mu>``; column 0 is the identity."""
    if basis.dim != N + 1 or povm.dim != N + 1:
        raise DimensionError(f"basis dim {basis.dim} / POVM dim {povm.dim} do not match N={N}")
    s = povm.states
    ops = basis.with_identity()
    return np.einsum("mi,nij,mj->mn", s.conj(), ops, s).real


def rank_check(N: int, isometry=None) -> tuple[int, np.ndarray]:
    """Numerical rank of the B matrix, cut at ``sigma_max * M(N) * 1e-12``."""
    povm = povm_elements(N, isometry)
    B = b_matrix(N, generator_basis(N + 1), povm)
    sv = np.linalg.svd(B, compute_uv=False)
    cutoff = sv[0] * len(povm) * 1e-12
    return int(np.sum(sv > cutoff)), sv

