"""NumPy fallback kernel: apply a local operator to a dense state vector.

Same contract as the compiled `qselftest._kernels`. The operator matrix acts
on the listed target subsystems (in the given order); everything else is
untouched. The full-space matrix is never formed.
"""

import numpy as np


def apply_local(vec, dims, targets, mat):
    """Return ``mat`` applied on the ``targets`` subsystems of ``vec``.

    vec: 1-D complex vector of length prod(dims).
    dims: per-subsystem dimensions, row-major ordering.
    targets: distinct subsystem indices; mat is prod(dims[t]) square.
    """
    k = len(targets)
    t = np.asarray(vec, dtype=np.complex128).reshape(dims)
    t = np.moveaxis(t, targets, range(k))
    shape = t.shape
    d = mat.shape[0]
    out = np.asarray(mat, dtype=np.complex128) @ t.reshape(d, -1)
    out = np.moveaxis(out.reshape(shape), range(k), targets)
    return out.reshape(-1)
