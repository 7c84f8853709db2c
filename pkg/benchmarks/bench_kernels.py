"""Time every hot kernel under the numba and numpy backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once per backend before timing (this absorbs JIT compile
time), then the best of ``--repeat`` runs is reported. Outputs of the two
backends are compared so that a speedup never hides a wrong answer.
"""

import argparse
import time

import numpy as np

from kplab import kernels


def _hermitian(n, rng):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T + n * np.eye(n)


def cases(rng):
    H = _hermitian(64, rng)
    L, _ = kernels.cholesky(H)
    b = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    omega = rng.standard_normal(64) * 100
    nt, m = 4097, 144
    times = np.linspace(0, 1, nt)
    F = rng.standard_normal((nt, m)) + 1j * rng.standard_normal((nt, m))
    w = np.full(nt, 1.0 / nt)
    om = rng.standard_normal(m) * 500
    chi = rng.random(257)
    g = rng.standard_normal(1025) + 1j * rng.standard_normal(1025)
    return [
        ("jacobi_eigh 64x64", lambda: kernels.jacobi_eigh(H)[0]),
        ("cholesky 64x64", lambda: kernels.cholesky(H)[0]),
        ("chol_solve 64", lambda: kernels.chol_solve(L, b)),
        ("matvec 64", lambda: kernels.matvec(H, b)),
        ("gramian 64x64", lambda: kernels.gramian(H, omega, 1.0)),
        ("phase_sum 4097x144", lambda: kernels.phase_sum(w, times, om, F, 1.0)),
        ("commutator 257x257", lambda: kernels.commutator_matrix(chi, g, 512)),
    ]


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy backend is available")
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    old = kernels.backend()
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>12}")
    try:
        for name, _ in cases(np.random.default_rng(0)):
            timings, outputs = [], []
            for b in backends:
                kernels.set_backend(b)
                fn = dict(cases(np.random.default_rng(0)))[name]
                timings.append(best_of(fn, args.repeat))
                outputs.append(np.sort_complex(np.ravel(fn())) if name.startswith("jacobi") else np.ravel(fn()))
            diff = float(np.max(np.abs(outputs[0] - outputs[-1])))
            speed = timings[0] / timings[-1]
            print(f"{name:<22}" + "".join(f"{t * 1e3:>10.3f}ms" for t in timings) + f"{speed:>9.1f}x{diff:>12.2e}")
    finally:
        kernels.set_backend(old)


if __name__ == "__main__":
    main()
