"""Backend parity: compiled kernel against the NumPy fallback."""

import numpy as np
import pytest

from qselftest import _backend, _kernels_py

compiled = pytest.importorskip("qselftest._kernels", reason="compiled kernels not built")


def random_case(rng):
    nsub = int(rng.integers(1, 6))
    dims = tuple(int(d) for d in rng.integers(1, 5, nsub))
    k = int(rng.integers(1, nsub + 1))
    targets = tuple(int(t) for t in rng.choice(nsub, size=k, replace=False))
    d = int(np.prod([dims[t] for t in targets]))
    total = int(np.prod(dims))
    vec = rng.normal(size=total) + 1j * rng.normal(size=total)
    mat = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return vec, dims, targets, mat


class TestKernelParity:
    def test_backend_selected(self):
        assert _backend.BACKEND in ("cython", "numpy")

    def test_random_parity(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            vec, dims, targets, mat = random_case(rng)
            a = compiled.apply_local(vec, dims, targets, mat)
            b = _kernels_py.apply_local(vec, dims, targets, mat)
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_all_targets(self):
        rng = np.random.default_rng(1)
        vec = rng.normal(size=6) + 1j * rng.normal(size=6)
        mat = rng.normal(size=(6, 6)) + 0j
        a = compiled.apply_local(vec, (2, 3), (0, 1), mat)
        np.testing.assert_allclose(a, mat @ vec, atol=1e-12)

    def test_target_order_matters(self):
        # matrix rows follow the listed target order, not subsystem order
        rng = np.random.default_rng(2)
        vec = rng.normal(size=4) + 0j
        mat = rng.normal(size=(4, 4)) + 0j
        swapped = compiled.apply_local(vec, (2, 2), (1, 0), mat)
        ref = _kernels_py.apply_local(vec, (2, 2), (1, 0), mat)
        np.testing.assert_allclose(swapped, ref, atol=1e-12)

    def test_dim_one_subsystems(self):
        vec = np.array([1.0, 2.0], dtype=complex)
        mat = np.array([[0, 1], [1, 0]], dtype=complex)
        out = compiled.apply_local(vec, (1, 2, 1), (1,), mat)
        np.testing.assert_allclose(out, [2.0, 1.0], atol=1e-15)

    def test_matrix_shape_checked(self):
        with pytest.raises(ValueError):
            compiled.apply_local(np.ones(4, dtype=complex), (2, 2), (0,), np.eye(3, dtype=complex))
