"""Compare the compiled and pure-Python kernels.

Run with ``python benchmarks/bench_kernels.py``. Reports the median wall time
of each kernel for both backends and of a full reconstruction.
"""
import argparse
import statistics
import time

import numpy as np

from polartomo import _kernels
from polartomo._kernels import _pure
from polartomo.detection import EfficiencyModel, sample_counts
from polartomo.optics import DEFAULT_ISOMETRY, enumerate_events, povm_elements
from polartomo.qudit import random_state
from polartomo.reconstruction import maxlik_reconstruct, state_to_cholesky

try:
    from polartomo._kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--n-max", type=int, default=10)
    args = parser.parse_args()

    backends = {"pure": _pure}
    if _fast is not None:
        backends["cython"] = _fast
    else:
        print("compiled kernels unavailable; timing the pure backend only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'N':>3}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for N in sorted({2, 5, args.n_max}):
        events = np.array(enumerate_events(N), dtype=np.int64)
        amps = _pure.event_amplitudes(DEFAULT_ISOMETRY, events)
        rho = random_state(N + 1, rng)
        x = state_to_cholesky(rho, 1e4)
        w = np.full(len(events), 0.6**N)
        counts = rng.poisson(1e4 * w * np.sum(np.abs(amps @ np.linalg.cholesky(rho.matrix)) ** 2, axis=1))
        counts = counts.astype(float)
        rows = {
            "event_amplitudes": lambda k: k.event_amplitudes(DEFAULT_ISOMETRY, events),
            "residuals_jacobian": lambda k: k.residuals_jacobian(x, amps, w, counts, 0.5),
        }
        for name, call in rows.items():
            t = {b: timeit(lambda k=k: call(k), args.repeat) for b, k in backends.items()}
            speed = f"{t['pure'] / t['cython']:>9.1f}x" if "cython" in t else ""
            print(f"{name:<28}{N:>3}" + "".join(f"{v * 1e3:>10.3f}ms" for v in t.values()) + speed)

    povm = povm_elements(2)
    eff = EfficiencyModel.uniform(0.6)
    record = sample_counts(random_state(3, rng), povm, eff, 50000, seed=1)
    t = {}
    for b, k in backends.items():
        _kernels.residuals_jacobian = k.residuals_jacobian
        t[b] = timeit(lambda: maxlik_reconstruct(record, povm, eff), args.repeat)
    speed = f"{t['pure'] / t['cython']:>9.1f}x" if "cython" in t else ""
    print(f"{'maxlik_reconstruct':<28}{2:>3}" + "".join(f"{v * 1e3:>10.3f}ms" for v in t.values()) + speed)


if __name__ == "__main__":
    main()
