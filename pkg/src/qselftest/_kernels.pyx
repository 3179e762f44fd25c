"""Compiled kernel: apply a local operator to a dense state vector.

Same contract as `qselftest._kernels_py.apply_local`; pure index arithmetic,
no full-space matrix.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def apply_local(vec, dims, targets, mat):
    """Return ``mat`` applied on the ``targets`` subsystems of ``vec``."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] x = \
        np.ascontiguousarray(vec, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] m = \
        np.ascontiguousarray(mat, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dim_arr = np.asarray(dims, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tgt_arr = np.asarray(targets, dtype=np.int64)
    cdef Py_ssize_t nsub = dim_arr.shape[0]
    cdef Py_ssize_t k = tgt_arr.shape[0]
    cdef Py_ssize_t i, j, t, a, b, r
    cdef Py_ssize_t total = 1
    for i in range(nsub):
        total *= dim_arr[i]
    if x.shape[0] != total:
        raise ValueError("vector length does not match dims")

    # row-major element strides
    cdef cnp.ndarray[cnp.int64_t, ndim=1] strides = np.empty(nsub, dtype=np.int64)
    cdef Py_ssize_t s_acc = 1
    for i in range(nsub - 1, -1, -1):
        strides[i] = s_acc
        s_acc *= dim_arr[i]

    cdef Py_ssize_t D = 1
    for i in range(k):
        D *= dim_arr[tgt_arr[i]]
    if m.shape[0] != D or m.shape[1] != D:
        raise ValueError("operator matrix does not match target dimensions")

    # flat offsets of the D target configurations, targets[0] most significant
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offs = np.zeros(D, dtype=np.int64)
    cdef Py_ssize_t rep = D
    for i in range(k):
        t = tgt_arr[i]
        rep //= dim_arr[t]
        for j in range(D):
            offs[j] += ((j // rep) % dim_arr[t]) * strides[t]

    cdef cnp.ndarray[cnp.uint8_t, ndim=1] is_tgt = np.zeros(nsub, dtype=np.uint8)
    for i in range(k):
        is_tgt[tgt_arr[i]] = 1
    cdef Py_ssize_t nrest = nsub - k
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rest_dims = np.ones(nrest + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rest_strides = np.zeros(nrest + 1, dtype=np.int64)
    j = 0
    for i in range(nsub):
        if not is_tgt[i]:
            rest_dims[j] = dim_arr[i]
            rest_strides[j] = strides[i]
            j += 1
    cdef Py_ssize_t n_outer = total // D

    cdef cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] out = \
        np.zeros(total, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] xbuf = np.empty(D, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ctr = np.zeros(nrest + 1, dtype=np.int64)
    cdef Py_ssize_t base = 0
    cdef double complex acc

    for r in range(n_outer):
        for j in range(D):
            xbuf[j] = x[base + offs[j]]
        for a in range(D):
            acc = 0
            for b in range(D):
                acc = acc + m[a, b] * xbuf[b]
            out[base + offs[a]] = acc
        for i in range(nrest - 1, -1, -1):
            ctr[i] += 1
            base += rest_strides[i]
            if ctr[i] < rest_dims[i]:
                break
            base -= rest_dims[i] * rest_strides[i]
            ctr[i] = 0
    return out
