"""Photon-number-resolving detection, expected counts and Poisson sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .optics import MAX_PHOTONS, N_DETECTORS, Povm, enumerate_events, event_probabilities
from .qudit import DimensionError, PolarizationState


@dataclass(frozen=True)
class EfficiencyModel:
    """Per-detector efficiencies ``eta_i(n)`` for registering all ``n`` photons.

    ``mode='ideal'`` gives unit efficiency everywhere. ``mode='independent'``
    treats photons as detected independently, ``eta_i(n) = eta_i ** n``.
    ``mode='table'`` reads ``eta_i(n)`` from a 6 x (n_max + 1) array whose
    column 0 must be 1.
    """

    eta: tuple[float, ...] = (1.0,) * N_DETECTORS
    mode: str = "ideal"
    table: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in ("ideal", "independent", "table"):
            raise ValueError(f"unknown efficiency mode {self.mode!r}")
        eta = tuple(float(e) for e in self.eta)
        if len(eta) != N_DETECTORS:
            raise ValueError(f"need {N_DETECTORS} detector efficiencies, got {len(eta)}")
        if any(not 0 < e <= 1 for e in eta):
            raise ValueError(f"efficiencies must lie in (0, 1], got {eta}")
        object.__setattr__(self, "eta", eta)
        if self.mode == "table":
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[0] != N_DETECTORS:
                raise ValueError("efficiency table must have one row per detector")
            if np.any(t <= 0) or np.any(t > 1) or not np.allclose(t[:, 0], 1.0):
                raise ValueError("table entries must lie in (0, 1] with eta_i(0) = 1")
            object.__setattr__(self, "table", t)

    @classmethod
    def ideal(cls) -> "EfficiencyModel":
        return cls()

    @classmethod
    def uniform(cls, eta: float) -> "EfficiencyModel":
        return cls((eta,) * N_DETECTORS, mode="independent")

    @classmethod
    def per_detector(cls, etas: Sequence[float]) -> "EfficiencyModel":
        return cls(tuple(etas), mode="independent")

    @classmethod
    def from_table(cls, table) -> "EfficiencyModel":
        return cls(mode="table", table=np.asarray(table, dtype=float))

    @property
    def is_ideal(self) -> bool:
        if self.mode == "ideal":
            return True
        if self.mode == "independent":
            return all(e == 1.0 for e in self.eta)
        return bool(np.all(self.table == 1.0))

    def eta_n(self, detector: int, n: int) -> float:
        """Probability that detector ``detector`` registers all ``n`` impinging photons."""
        if n == 0 or self.mode == "ideal":
            return 1.0
        if self.mode == "independent":
            return self.eta[detector] ** n
        if n >= self.table.shape[1]:
            raise ValueError(f"efficiency table has no entry for n={n}")
        return float(self.table[detector, n])

    def event_factors(self, events) -> np.ndarray:
        """``prod_i eta_i(d_i)`` for each event."""
        return np.array([np.prod([self.eta_n(i, int(k)) for i, k in enumerate(ev)]) for ev in events])

    def to_json(self) -> dict:
        out = {"mode": self.mode, "eta": list(self.eta)}
        if self.table is not None:
            out["table"] = self.table.tolist()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "EfficiencyModel":
        table = data.get("table")
        return cls(tuple(data.get("eta", (1.0,) * N_DETECTORS)), data.get("mode", "ideal"),
                   None if table is None else np.asarray(table))


@dataclass(eq=False)
class CountsRecord:
    """N-fold coincidence counts aligned with :func:`~polartomo.optics.enumerate_events`.

    Counts are usually integers; real values are accepted so that noiseless
    expected counts can be fed through the same reconstruction path.
    """

    N: int
    ensemble_size: float
    counts: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.N <= MAX_PHOTONS:
            raise DimensionError(f"photon number must lie in 0..{MAX_PHOTONS}, got {self.N}")
        if self.ensemble_size <= 0:
            raise ValueError("ensemble size must be positive")
        c = np.asarray(self.counts, dtype=float).ravel()
        n_events = len(enumerate_events(self.N))
        if c.size != n_events:
            raise DimensionError(f"expected {n_events} event counts for N={self.N}, got {c.size}")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        self.counts = c

    @property
    def events(self) -> list[tuple[int, ...]]:
        return enumerate_events(self.N)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(zip(self.events, self.counts.tolist()))

    def scaled(self, factor: float) -> "CountsRecord":
        return CountsRecord(self.N, self.ensemble_size * factor, self.counts * factor, self.seed)

    @classmethod
    def from_mapping(cls, N: int, ensemble_size: float, counts: dict, seed=None) -> "CountsRecord":
        """Build from an event -> count mapping; absent events count zero."""
        events = enumerate_events(N)
        index = {ev: k for k, ev in enumerate(events)}
        arr = np.zeros(len(events))
        for ev, n in counts.items():
            ev = tuple(int(x) for x in ev)
            if ev not in index:
                raise ValueError(f"event {ev} is not an {N}-photon coincidence")
            arr[index[ev]] += n
        return cls(N, ensemble_size, arr, seed)

    def to_json(self) -> dict:
        def num(x):
            return int(x) if float(x).is_integer() else float(x)

        return {
            "N": self.N,
            "ensemble_size": num(self.ensemble_size),
            "seed": self.seed,
            "counts": [{"event": list(ev), "n": num(n)} for ev, n in zip(self.events, self.counts)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CountsRecord":
        try:
            N = int(data["N"])
            mapping: dict = {}
            for entry in data["counts"]:
                ev = tuple(int(x) for x in entry["event"])
                mapping[ev] = mapping.get(ev, 0) + entry["n"]
            return cls.from_mapping(N, data["ensemble_size"], mapping, data.get("seed"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed counts record: {exc}") from exc


def expected_counts(rho: PolarizationState, povm: Povm, eff: EfficiencyModel, ensemble_size: float) -> np.ndarray:
    """Mean coincidence counts ``I * prod_i eta_i(d_i) * Pr(mu | rho)`` in POVM event order."""
    if ensemble_size <= 0:
        raise ValueError("ensemble size must be positive")
    return ensemble_size * eff.event_factors(povm.events) * event_probabilities(rho, povm)


def sample_counts(rho: PolarizationState, povm: Povm, eff: EfficiencyModel,
                  ensemble_size: float, seed: int | None = None) -> CountsRecord:
    """Independent Poisson draws around :func:`expected_counts`."""
    rng = np.random.default_rng(seed)
    mean = expected_counts(rho, povm, eff, ensemble_size)
    return CountsRecord(povm.N, ensemble_size, rng.poisson(mean).astype(float), seed)


def poisson_resample(record: CountsRecord, seed: int | None = None) -> CountsRecord:
    """Replace each count by a Poisson variate with that count as its mean."""
    rng = np.random.default_rng(seed)
    return CountsRecord(record.N, record.ensemble_size, rng.poisson(record.counts).astype(float), seed)
