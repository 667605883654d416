"""Backend selection for the jet product kernel.

Two implementations of the same contraction are provided:

* ``_jetcore`` -- a Cython extension compiled at install time;
* ``_jetpure`` -- a vectorised numpy fallback.

The compiled kernel is preferred when importable.  Setting the environment
variable ``DETOURCHECK_PURE=1`` before import forces the numpy path (used by
the benchmark and by the test that cross-checks the two backends).
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("DETOURCHECK_PURE", "") in ("1", "true", "yes"):
    from . import _jetpure as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _jetcore as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _jetpure as _impl

        BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND


def jsum_mul(A, B, tI, tJ, tK, tstarts, size):
    """Contract ``(P, C, size) x (Q, C, size) -> (P, Q, size)`` where the
    trailing axis multiplies as truncated Taylor coefficients."""
    if A.shape[1] != B.shape[1] or A.shape[2] != size or B.shape[2] != size:
        raise ValueError(f"kernel shape mismatch: {A.shape} x {B.shape}, size {size}")
    dtype = np.promote_types(A.dtype, B.dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.complex128)):
        dtype = np.dtype(np.complex128) if dtype.kind == "c" else np.dtype(np.float64)
    A = np.ascontiguousarray(A, dtype=dtype)
    B = np.ascontiguousarray(B, dtype=dtype)
    return _impl.jsum_mul(A, B, tI, tJ, tK, tstarts)
