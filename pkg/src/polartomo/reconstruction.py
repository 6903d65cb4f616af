"""Density-matrix estimation from coincidence counts.

Two estimators are provided. :func:`linear_inversion` solves the
overdetermined linear system between event probabilities and the generator
expansion, and is exact on consistent data. :func:`maxlik_reconstruct`
minimizes the Pearson chi-squared penalty over a Cholesky-factored state,
which keeps every candidate physical.

The optimizer works with an unnormalized lower-triangular ``T`` whose
Frobenius norm squared is the fitted ensemble size, so that
``nbar_mu = eta_mu * <v_mu| T^+ T |v_mu>`` and ``rho = T^+ T / Tr(T^+ T)``.
This is the same model as a normalized ``T`` times a free intensity, minus
the redundant overall scale.
"""
from __future__ import annotations

import csv
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import least_squares, minimize

from . import _kernels
from .detection import CountsRecord, EfficiencyModel, poisson_resample
from .optics import Povm, b_matrix, event_probabilities
from .qudit import (
    DimensionError,
    GeneratorBasis,
    PolarizationState,
    StateVector,
    bloch_reconstruct,
    fidelity,
    generator_basis,
)

log = logging.getLogger(__name__)

CHI2_FLOOR = 0.5
UNPHYSICAL_EIGENVALUE = -1e-6


class DegenerateParametersError(ValueError):
    """Raised when a Cholesky parameter vector maps to the zero matrix."""


# --- Cholesky parameterization ----------------------------------------------

def _dim_from_params(n: int) -> int:
    d = int(round(np.sqrt(n)))
    if d * d != n or d < 1:
        raise DimensionError(f"Cholesky parameter count must be a square, got {n}")
    return d


def params_to_tril(params) -> np.ndarray:
    """Lower-triangular ``T`` from ``d**2`` reals.

    Layout: the ``d`` diagonal entries, then ``(re, im)`` of each strictly
    lower entry in row-major order.
    """
    params = np.asarray(params, dtype=float).ravel()
    return _kernels.params_to_tril(params, _dim_from_params(params.size))


def tril_to_params(T) -> np.ndarray:
    """Inverse of :func:`params_to_tril`; rows are rephased to a non-negative real diagonal.

    Left-multiplying ``T`` by a diagonal unitary leaves ``T^+ T`` unchanged,
    so the rephasing never alters the represented state.
    """
    T = np.array(T, dtype=complex)
    d = T.shape[0]
    diag = np.diag(T)
    phase = np.where(np.abs(diag) > 0, np.exp(-1j * np.angle(diag)), 1.0)
    T = phase[:, None] * np.tril(T)
    rows, cols = np.tril_indices(d, -1)
    off = T[rows, cols]
    out = np.empty(d * d)
    out[:d] = np.diag(T).real
    out[d::2] = off.real
    out[d + 1::2] = off.imag
    return out


def cholesky_to_state(params) -> PolarizationState:
    """``rho = T^+ T / Tr(T^+ T)``; positive semidefinite for any parameters."""
    T = params_to_tril(params)
    gram = T.conj().T @ T
    tr = np.trace(gram).real
    if tr <= 0:
        raise DegenerateParametersError("Cholesky parameters describe the zero matrix")
    return PolarizationState.from_unnormalized(gram / tr)


def state_to_cholesky(rho: PolarizationState, scale: float = 1.0) -> np.ndarray:
    """Parameters of a lower-triangular ``T`` with ``T^+ T = scale * rho``.

    Works for rank-deficient states: a square root of ``rho`` is factored as
    ``Q T`` (QL decomposition) and ``T^+ T`` equals ``rho``.
    """
    w, U = np.linalg.eigh(rho.matrix)
    A = np.sqrt(np.clip(w, 0, None) * scale)[:, None] * U.conj().T  # A^+ A = scale * rho
    J = np.eye(rho.dim)[::-1]
    _, R = np.linalg.qr(J @ A @ J)
    return tril_to_params(J @ R @ J)


# --- penalty ------------------------------------------------------------------

def chi2(params, intensity: float, record: CountsRecord, povm: Povm, eff: EfficiencyModel,
         floor: float = CHI2_FLOOR) -> float:
    """Pearson penalty ``sum_mu (nbar - n)^2 / nbar`` over all events.

    ``nbar`` follows the forward model with state ``rho(params)`` and ensemble
    size ``intensity``; denominators below ``floor`` are replaced by ``floor``.
    """
    T = params_to_tril(params)
    if T.shape[0] != povm.dim or record.N != povm.N:
        raise DimensionError("parameters, record and POVM disagree on the photon number")
    tr = np.sum(np.abs(T) ** 2)
    if tr == 0:
        raise DegenerateParametersError("Cholesky parameters describe the zero matrix")
    x = tril_to_params(T * np.sqrt(intensity / tr))
    r, _ = _kernels.residuals_jacobian(x, povm.amplitudes, eff.event_factors(povm.events), record.counts, floor)
    return float(r @ r)


# --- linear inversion ---------------------------------------------------------

class LinearInversion(NamedTuple):
    bloch: np.ndarray
    state: PolarizationState
    physical: bool


def linear_inversion(record: CountsRecord, b: np.ndarray, povm: Povm, eff: EfficiencyModel,
                     basis: GeneratorBasis | None = None) -> LinearInversion:
    """Least-squares solution of the event-probability equations.

    The probabilities are estimated as ``n_mu / (I * eta_mu)``; each equation
    is ``K_mu * (B_mu0 / d + sum_v B_mv lambda_v) = P_mu``.
    """
    d = povm.dim
    basis = generator_basis(d) if basis is None else basis
    b = np.asarray(b, dtype=float)
    if b.shape != (len(povm), d * d) or basis.dim != d or record.N != povm.N:
        raise DimensionError("B matrix, basis, record and POVM disagree")
    if np.linalg.matrix_rank(b) < d * d:
        raise np.linalg.LinAlgError("B matrix is rank deficient; the measurement is not a quorum")
    p_hat = record.counts / (record.ensemble_size * eff.event_factors(povm.events))
    A = povm.weights[:, None] * b
    rhs = p_hat - A[:, 0] / d
    lam, *_ = np.linalg.lstsq(A[:, 1:], rhs, rcond=None)
    rho = bloch_reconstruct(lam, basis)
    return LinearInversion(lam, rho, bool(rho.eigenvalues[0] >= UNPHYSICAL_EIGENVALUE))


# --- maximum likelihood ---------------------------------------------------------

@dataclass(frozen=True)
class ReconstructionOptions:
    """Optimizer settings. ``n_starts`` random starts are tried besides the linear-inversion start."""

    n_starts: int = 5
    seed: int | None = 0
    floor: float = CHI2_FLOOR
    ftol: float = 1e-10
    xtol: float = 1e-12
    gtol: float = 1e-12
    max_iter: int = 20000
    polish_nfev: int = 400
    warm_start_eigen_floor: float = 1e-3


@dataclass
class ReconstructionResult:
    rho_hat: PolarizationState
    chi2: float
    intensity_hat: float
    iterations: int
    converged: bool
    expected: np.ndarray = field(repr=False)
    fidelity_target: StateVector | None = None
    fidelity: float | None = None
    fidelity_mean: float | None = None
    fidelity_std: float | None = None
    fidelity_reps: int = 0
    failed_reps: int = 0

    def to_json(self) -> dict:
        rho = self.rho_hat.to_json()
        out = {
            "rho": rho,
            "chi2": self.chi2,
            "intensity": self.intensity_hat,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if self.fidelity_target is not None:
            t = self.fidelity_target.amplitudes
            out["fidelity"] = {
                "target": {"re": t.real.tolist(), "im": t.imag.tolist()},
                "value": self.fidelity,
                "mean": self.fidelity_mean,
                "std": self.fidelity_std,
                "reps": self.fidelity_reps,
                "failed": self.failed_reps,
            }
        return out


class _Objective:
    """Residuals, Jacobian and chi-squared sharing one kernel call per point."""

    def __init__(self, amps, weights, counts, floor):
        self.args = (amps, weights, counts, floor)
        self._x = None
        self.nfev = 0

    def _eval(self, x):
        if self._x is None or not np.array_equal(x, self._x):
            self._r, self._J = _kernels.residuals_jacobian(x, *self.args)
            self._x = np.array(x)
            self.nfev += 1
        return self._r, self._J

    def residuals(self, x):
        return self._eval(x)[0]

    def jacobian(self, x):
        return self._eval(x)[1]

    def value_and_grad(self, x):
        r, J = self._eval(x)
        return float(r @ r), 2.0 * (J.T @ r)


class _Fit(NamedTuple):
    x: np.ndarray
    chi2: float
    nfev: int
    converged: bool


def _fit_from(objective: _Objective, x0: np.ndarray, options: "ReconstructionOptions") -> _Fit:
    # Quasi-Newton first: near the rank boundary the residuals are quadratic in
    # the vanishing rows of T, so Gauss-Newton curvature degenerates there.
    # The Levenberg-Marquardt pass then polishes small-residual (noiseless) fits.
    objective.nfev = 0
    qn = minimize(
        objective.value_and_grad, x0, jac=True, method="L-BFGS-B",
        options={"ftol": options.ftol, "gtol": options.gtol, "maxiter": options.max_iter, "maxcor": 30},
    )
    lm = least_squares(
        objective.residuals, qn.x, jac=objective.jacobian, method="lm",
        ftol=options.ftol, xtol=options.xtol, gtol=options.gtol, max_nfev=options.polish_nfev,
    )
    chi_qn, chi_lm = float(qn.fun), float(2 * lm.cost)
    x, chi = (lm.x, chi_lm) if chi_lm <= chi_qn else (qn.x, chi_qn)
    converged = bool(qn.success or lm.status > 0 or chi_qn - chi_lm <= options.ftol * max(chi_qn, 1.0))
    return _Fit(x, chi, objective.nfev, converged)


def _scaled_start(rho: PolarizationState, povm: Povm, factors: np.ndarray, total: float) -> np.ndarray:
    """Cholesky start for ``rho`` with intensity matched to the observed total."""
    model = np.sum(factors * event_probabilities(rho, povm))
    intensity = total / model if model > 0 else total
    return state_to_cholesky(rho, scale=intensity)


def maxlik_reconstruct(record: CountsRecord, povm: Povm, eff: EfficiencyModel,
                       options: ReconstructionOptions | None = None,
                       basis: GeneratorBasis | None = None) -> ReconstructionResult:
    """Chi-squared maximum-likelihood estimate over physical states.

    The fit is started from the (eigenvalue-clipped) linear-inversion estimate
    and from ``options.n_starts`` random states; the lowest penalty wins.
    Non-convergence is reported through ``converged`` rather than raised.
    """
    options = options or ReconstructionOptions()
    d = povm.dim
    if record.N != povm.N:
        raise DimensionError(f"record has N={record.N} but POVM has N={povm.N}")
    total = record.total
    if total <= 0:
        raise ValueError("cannot reconstruct from an empty record")
    if np.count_nonzero(record.counts) < d * d:
        warnings.warn(f"only {np.count_nonzero(record.counts)} events observed; "
                      f"{d * d} are needed to fix the state", RuntimeWarning, stacklevel=2)

    factors = eff.event_factors(povm.events)
    basis = generator_basis(d) if basis is None else basis

    starts = []
    try:
        li = linear_inversion(record, b_matrix(povm.N, basis, povm), povm, eff, basis)
        w, U = np.linalg.eigh(li.state.matrix)
        w = np.clip(w, options.warm_start_eigen_floor, None)
        starts.append(_scaled_start(PolarizationState.from_unnormalized((U * w) @ U.conj().T),
                                    povm, factors, total))
    except np.linalg.LinAlgError:
        log.warning("linear inversion unavailable; using random starts only")
    rng = np.random.default_rng(options.seed)
    for _ in range(options.n_starts):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        starts.append(_scaled_start(PolarizationState.from_unnormalized(g @ g.conj().T), povm, factors, total))

    objective = _Objective(povm.amplitudes, factors, record.counts, options.floor)
    best = None
    for k, x0 in enumerate(starts):
        fit = _fit_from(objective, x0, options)
        log.debug("start %d: chi2=%.10g nfev=%d converged=%s", k, fit.chi2, fit.nfev, fit.converged)
        if best is None or fit.chi2 < best.chi2:
            best = fit

    T = params_to_tril(best.x)
    gram = T.conj().T @ T
    intensity = float(np.trace(gram).real)
    rho = PolarizationState.from_unnormalized(gram)
    expected = intensity * factors * event_probabilities(rho, povm)
    return ReconstructionResult(
        rho_hat=rho,
        chi2=best.chi2,
        intensity_hat=intensity,
        iterations=best.nfev,
        converged=best.converged,
        expected=expected,
    )


# --- bootstrap ----------------------------------------------------------------

class BootstrapResult(NamedTuple):
    mean: float
    std: float
    values: np.ndarray
    failures: int


def _bootstrap_rep(args):
    record, target, povm, eff, options, seed = args
    resampled = poisson_resample(record, seed)
    result = maxlik_reconstruct(resampled, povm, eff, replace(options, seed=seed))
    return fidelity(target, result.rho_hat)


def bootstrap_fidelity(record: CountsRecord, target: StateVector, povm: Povm, eff: EfficiencyModel,
                       reps: int = 10, seed: int | None = 0,
                       options: ReconstructionOptions | None = None, workers: int = 1) -> BootstrapResult:
    """Fidelity spread over ``reps`` Poisson resamplings of the measured counts.

    Returns the sample mean and the sample standard deviation (``ddof=1``).
    Repetitions are seeded from ``seed`` by index, so serial and parallel
    runs give identical results. Failed repetitions are dropped and counted.
    """
    if reps < 2:
        raise ValueError("bootstrap needs at least two repetitions")
    options = options or ReconstructionOptions()
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(reps)]
    jobs = [(record, target, povm, eff, options, s) for s in seeds]

    values, failures = [], 0
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_bootstrap_rep, job) for job in jobs]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - a failed repetition is reported, not fatal
                    log.warning("bootstrap repetition failed: %s", exc)
                    outcomes.append(None)
    else:
        outcomes = []
        for job in jobs:
            try:
                outcomes.append(_bootstrap_rep(job))
            except Exception as exc:  # noqa: BLE001
                log.warning("bootstrap repetition failed: %s", exc)
                outcomes.append(None)
    for v in outcomes:
        if v is None:
            failures += 1
        else:
            values.append(v)
    if len(values) < 2:
        raise RuntimeError(f"only {len(values)} of {reps} bootstrap repetitions succeeded")
    values = np.array(values)
    return BootstrapResult(float(values.mean()), float(values.std(ddof=1)), values, failures)


def reconstruct_with_bootstrap(record: CountsRecord, povm: Povm, eff: EfficiencyModel,
                               target: StateVector | None = None, reps: int = 10, seed: int | None = 0,
                               options: ReconstructionOptions | None = None,
                               workers: int = 1) -> ReconstructionResult:
    """MAXLIK estimate plus, if a target is given, the bootstrap fidelity statistics."""
    options = options or ReconstructionOptions(seed=seed)
    result = maxlik_reconstruct(record, povm, eff, options)
    if target is not None:
        boot = bootstrap_fidelity(record, target, povm, eff, reps, seed, options, workers)
        result.fidelity_target = target
        result.fidelity = fidelity(target, result.rho_hat)
        result.fidelity_mean = boot.mean
        result.fidelity_std = boot.std
        result.fidelity_reps = reps - boot.failures
        result.failed_reps = boot.failures
    return result


def write_residual_csv(path, record: CountsRecord, result: ReconstructionResult) -> None:
    """Per-event observed count, fitted mean and Pearson residual."""
    nbar = result.expected
    resid = (record.counts - nbar) / np.sqrt(np.maximum(nbar, CHI2_FLOOR))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d1", "d2", "d3", "d4", "d5", "d6", "n", "nbar", "residual"])
        for ev, n, m, r in zip(record.events, record.counts, nbar, resid):
            w.writerow([*ev, n, repr(float(m)), repr(float(r))])
