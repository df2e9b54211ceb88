"""Optional numba acceleration.

Set ``BREMERMANN_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""
import os

DISABLED = os.environ.get("BREMERMANN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError
    import numba
    from numba import njit, prange

    numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    numba = None
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def use_numba():
    return HAVE_NUMBA


def set_workers(workers):
    """Set the numba thread count; a no-op on the numpy path."""
    if not HAVE_NUMBA or workers is None:
        return
    workers = max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(workers)
