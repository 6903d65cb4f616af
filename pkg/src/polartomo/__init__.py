"""Polarization tomography of N-photon two-mode states with a fixed six-detector analyser."""
from ._kernels import BACKEND
from .detection import CountsRecord, EfficiencyModel, expected_counts, poisson_resample, sample_counts
from .optics import (
    DEFAULT_ISOMETRY,
    MAX_PHOTONS,
    Povm,
    PovmElement,
    b_matrix,
    enumerate_events,
    event_count,
    event_probabilities,
    normalization_factor,
    povm_elements,
    projected_state,
    rank_check,
)
from .qudit import (
    GeneratorBasis,
    PolarizationState,
    StateVector,
    bloch_decompose,
    bloch_reconstruct,
    fidelity,
    generator_basis,
    hwp_state,
    purity,
)
from .reconstruction import (
    ReconstructionOptions,
    ReconstructionResult,
    bootstrap_fidelity,
    chi2,
    linear_inversion,
    maxlik_reconstruct,
)

__version__ = "0.1.0"
