"""State algebra on the N-photon two-mode polarization sector.

Basis element ``m`` (``m = 0 .. N``) is the Fock state ``|N-m, m>`` with
``N-m`` horizontally and ``m`` vertically polarized photons. Every vector and
matrix in the package uses this ordering.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10


class DimensionError(ValueError):
    """Raised when dimensions of states, bases or vectors disagree."""


class StateError(ValueError):
    """Raised for matrices that cannot represent a polarization state."""


class FockBasisIndex(NamedTuple):
    n_h: int
    n_v: int


def fock_basis(N: int) -> list[FockBasisIndex]:
    """Labels of the sector basis in storage order."""
    if N < 0:
        raise DimensionError(f"photon number must be non-negative, got {N}")
    return [FockBasisIndex(N - m, m) for m in range(N + 1)]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure polarization state; amplitudes are normalized on construction."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(a)
        if a.size == 0 or norm == 0:
            raise StateError("state vector must be non-zero")
        a = a / norm
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def N(self) -> int:
        return self.dim - 1

    def density_matrix(self) -> "PolarizationState":
        a = self.amplitudes
        return PolarizationState(np.outer(a, a.conj()))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class PolarizationState:
    """Density matrix on the (N+1)-dimensional sector.

    Hermiticity and unit trace are enforced on construction. Positivity is
    not: linear inversion may legitimately produce unphysical matrices, so it
    is exposed through :attr:`is_psd` instead.
    """

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise StateError(f"density matrix trace is {np.trace(rho).real:.3g}, expected 1")
        rho = 0.5 * (rho + rho.conj().T)
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def from_unnormalized(cls, matrix) -> "PolarizationState":
        m = np.asarray(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        return cls(m / np.trace(m).real)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "PolarizationState":
        return cls(np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.dim - 1

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def is_psd(self) -> bool:
        return bool(self.eigenvalues[0] >= PSD_TOL)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PolarizationState":
        rho = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        if "dim" in data and rho.shape != (data["dim"], data["dim"]):
            raise DimensionError(f"declared dim {data['dim']} does not match matrix {rho.shape}")
        return cls(rho)


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """Generalized Gell-Mann matrices normalized to ``Tr(g_a g_b) = 2 delta_ab``.

    ``generators`` has shape ``(d**2 - 1, d, d)``; the identity is implicit.
    """

    dim: int
    generators: np.ndarray

    def __len__(self):
        return len(self.generators)

    def with_identity(self) -> np.ndarray:
        """Stack of ``d**2`` operators with the identity first."""
        return np.concatenate([np.eye(self.dim, dtype=complex)[None], self.generators])


def generator_basis(d: int) -> GeneratorBasis:
    """Build the SU(d) generator basis.

    Ordering: symmetric off-diagonal pairs ``(j, k)`` for ``j < k`` in
    row-major order, then the antisymmetric pairs in the same order, then the
    ``d - 1`` diagonal generators.
    """
    if d < 2:
        raise DimensionError(f"generator basis needs d >= 2, got {d}")
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    gens = []
    for j, k in pairs:
        g = np.zeros((d, d), dtype=complex)
        g[j, k] = g[k, j] = 1
        gens.append(g)
    for j, k in pairs:
        g = np.zeros((d, d), dtype=complex)
        g[j, k] = -1j
        g[k, j] = 1j
        gens.append(g)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        gens.append(np.diag(diag * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    gens = np.array(gens)
    gens.setflags(write=False)
    return GeneratorBasis(d, gens)


def bloch_decompose(rho: PolarizationState, basis: GeneratorBasis) -> np.ndarray:
    """Coefficients ``lambda_v = Tr(rho g_v) / 2`` of the generator expansion."""
    if rho.dim != basis.dim:
        raise DimensionError(f"state dim {rho.dim} != basis dim {basis.dim}")
    # Tr(rho g) = sum_ij rho_ij g_ji
    traces = np.einsum("ij,nji->n", rho.matrix, basis.generators)
    return traces.real / 2


def bloch_reconstruct(coefficients, basis: GeneratorBasis) -> PolarizationState:
    """Inverse of :func:`bloch_decompose`. The result may fail :attr:`~PolarizationState.is_psd`."""
    v = np.asarray(coefficients, dtype=float).ravel()
    if v.size != len(basis):
        raise DimensionError(f"expected {len(basis)} coefficients, got {v.size}")
    rho = np.eye(basis.dim) / basis.dim + np.tensordot(v, basis.generators, axes=1)
    return PolarizationState(rho)


def fidelity(target: StateVector, rho: PolarizationState) -> float:
    """Overlap ``<psi|rho|psi>`` of a pure target with an estimated state."""
    if target.dim != rho.dim:
        raise DimensionError(f"target dim {target.dim} != state dim {rho.dim}")
    if not rho.is_psd:
        raise StateError("fidelity requires a positive semidefinite state")
    psi = target.amplitudes
    return float(np.real(np.vdot(psi, rho.matrix @ psi)))


def purity(rho: PolarizationState) -> float:
    m = rho.matrix
    return float(np.real(np.sum(m * m.T)))


def hwp_state(theta: float) -> StateVector:
    """Two-photon state behind a half-wave plate at angle ``theta / 2``.

    Starting from ``|1,1>``; ``theta = pi/4`` gives the NOON state
    ``(-|2,0> + |0,2>)/sqrt(2)`` and ``theta ~ 0.076 pi`` the equipartition
    state.
    """
    c, s = np.cos(theta), np.sin(theta)
    a = np.sqrt(2) * c * s
    return StateVector(np.array([-a, np.cos(2 * theta), a], dtype=complex))


def fock_state(n_h: int, n_v: int) -> StateVector:
    N = n_h + n_v
    a = np.zeros(N + 1, dtype=complex)
    a[n_v] = 1
    return StateVector(a)


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> PolarizationState:
    """Random density matrix from the induced (Ginibre) measure."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    return PolarizationState.from_unnormalized(g @ g.conj().T)
