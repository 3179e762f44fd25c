"""Compare the compiled apply_local kernel against the NumPy fallback.

Times the workloads the verification harness actually runs: single-wire and
two-wire gate applications on dense registers, including a register with a
non-qubit environment slice. Both backends are imported directly, so this
also doubles as a parity check between them.

The package itself picks the backend at import time; set
QSELFTEST_FORCE_NUMPY=1 to make an installed qselftest use the fallback.

Usage: python3 benchmarks/bench_kernels.py [--qubits 8 12 16 20] [--repeats 7]
"""

import argparse
import time

import numpy as np

from qselftest import _kernels_py

try:
    from qselftest import _kernels
except ImportError:
    _kernels = None


def rand_state(rng, dims):
    v = rng.standard_normal(int(np.prod(dims))) + 1j * rng.standard_normal(
        int(np.prod(dims))
    )
    return v / np.linalg.norm(v)


def rand_unitary(rng, d):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def workloads(rng, n_qubits):
    dims = (2,) * n_qubits
    mixed = (2,) * (n_qubits - 2) + (4,)  # trailing environment slice
    yield (
        f"1-wire gate, {n_qubits} qubits",
        rand_state(rng, dims),
        dims,
        (n_qubits // 2,),
        rand_unitary(rng, 2),
    )
    yield (
        f"2-wire gate, {n_qubits} qubits",
        rand_state(rng, dims),
        dims,
        (0, n_qubits // 2),
        rand_unitary(rng, 4),
    )
    yield (
        f"1-wire gate, {n_qubits - 2} qubits + dim-4 env",
        rand_state(rng, mixed),
        mixed,
        (0,),
        rand_unitary(rng, 2),
    )


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[4, 8, 12, 16, 20])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels is None:
        print("compiled kernel not built; timing the NumPy fallback only")
    rng = np.random.default_rng(args.seed)
    header = f"{'workload':<34} {'numpy':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    worst_diff = 0.0
    for n in args.qubits:
        for name, vec, dims, targets, mat in workloads(rng, n):
            t_py, out_py = best_time(
                lambda: _kernels_py.apply_local(vec, dims, targets, mat),
                args.repeats,
            )
            if _kernels is None:
                print(f"{name:<34} {t_py * 1e3:>8.3f}ms {'-':>10} {'-':>8}")
                continue
            t_cy, out_cy = best_time(
                lambda: _kernels.apply_local(vec, dims, targets, mat),
                args.repeats,
            )
            worst_diff = max(worst_diff, float(np.abs(out_py - out_cy).max()))
            print(
                f"{name:<34} {t_py * 1e3:>8.3f}ms {t_cy * 1e3:>8.3f}ms"
                f" {t_py / t_cy:>7.2f}x"
            )
    if _kernels is not None:
        print(f"\nbackend parity: max |diff| = {worst_diff:.3e}")
        if worst_diff > 1e-12:
            raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
