"""Kernel backend selection: compiled extension if present, NumPy otherwise.

Set QSELFTEST_FORCE_NUMPY=1 to skip the compiled kernel (used by the
benchmark and the parity tests).
"""

import os

if os.environ.get("QSELFTEST_FORCE_NUMPY"):
    from . import _kernels_py as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "numpy"

apply_local = _impl.apply_local
