"""Numerical backend selection.

Hot kernels (FEM substeps, SDF batch queries, mesh-distance loops) are
implemented twice: a numba @njit version and a pure-numpy reference
version.  The active path is chosen once at import time:

* ``SOFTGRIP_BACKEND=numpy``  forces the pure-numpy fallback,
* ``SOFTGRIP_BACKEND=numba``  requires numba (ImportError if missing),
* unset: numba when importable, numpy otherwise.

``benchmarks/bench_backends.py`` compares the two paths.
"""

import os

_requested = os.environ.get("SOFTGRIP_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"SOFTGRIP_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _requested != "numpy"


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


if USE_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """No-op decorator standing in for numba.njit on the numpy path."""

        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap
