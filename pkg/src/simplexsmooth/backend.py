"""Compute-backend selection.

Two interchangeable implementations of the batch fitting kernels exist:

* ``_core_numba`` -- numba ``@njit`` loops, parallelised over evaluation
  points with ``prange``.  Default whenever numba imports.
* ``_core_numpy`` -- vectorised pure-numpy fallback, single threaded.

``SIMPLEXSMOOTH_BACKEND`` picks one at import time: ``auto`` (default),
``numba`` or ``numpy``.  Both backends expose the same three functions
(``ll_batch``, ``nw_batch``, ``loocv_predict``) with identical semantics;
results agree to floating-point roundoff.
"""

import os

_ENV_VAR = "SIMPLEXSMOOTH_BACKEND"
_requested = os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto"

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"{_ENV_VAR}={_requested!r}: expected 'auto', 'numba' or 'numpy'"
    )

if _requested == "numpy":
    from . import _core_numpy as core

    BACKEND = "numpy"
else:
    try:
        from . import _core_numba as core

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _core_numpy as core

        BACKEND = "numpy"


def set_threads(n):
    """Bound the number of worker threads used by the compiled kernels.

    Clamped to the platform maximum (asking for more threads than cores is
    an upper bound, not a demand).  A no-op on the numpy backend (it is
    single threaded); results are bitwise identical for every thread count
    either way.
    """
    if n is None:
        return
    n = int(n)
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    if BACKEND == "numba":
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
