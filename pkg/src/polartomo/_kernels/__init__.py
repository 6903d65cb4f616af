"""Hot kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it was built and ``POLARTOMO_PURE`` is
not set in the environment.
"""
import os
import warnings

from . import _pure
from ._pure import params_to_tril

BACKEND = "pure"

if not os.environ.get("POLARTOMO_PURE"):
    try:
        from . import _fast
    except ImportError as exc:
        warnings.warn(f"polartomo: compiled kernels unavailable ({exc}); using NumPy fallback")
        _fast = None
else:
    _fast = None

if _fast is not None:
    event_amplitudes = _fast.event_amplitudes
    residuals_jacobian = _fast.residuals_jacobian
    BACKEND = "cython"
else:
    event_amplitudes = _pure.event_amplitudes
    residuals_jacobian = _pure.residuals_jacobian

__all__ = ["BACKEND", "event_amplitudes", "residuals_jacobian", "params_to_tril"]
