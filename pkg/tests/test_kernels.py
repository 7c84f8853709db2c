import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kplab import kernels


def hermitian(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A + A.conj().T


def hpd(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T + n * np.eye(n)


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 20))
def test_jacobi_matches_lapack(each_backend, seed, n):
    H = hermitian(np.random.default_rng(seed), n)
    w, V, _ = kernels.jacobi_eigh(H)
    assert np.max(np.abs(np.sort(w) - np.linalg.eigvalsh(H))) <= 1e-11 * max(1.0, np.abs(w).max())
    assert np.max(np.abs(V.conj().T @ V - np.eye(n))) <= 1e-12
    assert np.max(np.abs(H @ V - V * w)) <= 1e-10 * max(1.0, np.abs(w).max())


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 20))
def test_cholesky_and_solve(each_backend, seed, n):
    rng = np.random.default_rng(seed)
    A = hpd(rng, n)
    L, failed = kernels.cholesky(A)
    assert failed == -1
    assert np.max(np.abs(L - np.linalg.cholesky(A))) <= 1e-10 * np.abs(A).max()
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = kernels.chol_solve(L, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(A) * np.linalg.norm(x)


def test_cholesky_reports_failure(each_backend):
    _, failed = kernels.cholesky(np.diag([1.0, -1.0, 2.0]))
    assert failed == 1


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 16), T=st.floats(0.01, 5))
def test_backends_agree(seed, n, T):
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(seed)
    A = hermitian(rng, n)
    om = rng.uniform(-50, 50, n)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    times = np.linspace(0, T, 33)
    w = rng.uniform(0, 1, 33)
    F = rng.standard_normal((33, n)) + 1j * rng.standard_normal((33, n))
    chi = rng.uniform(0, 1, n)
    gco = rng.standard_normal(2 * n - 1) + 0j
    out = {}
    for name in ("numba", "numpy"):
        old = kernels.set_backend(name)
        try:
            out[name] = (kernels.matvec(A, x), kernels.gramian(A, om, T),
                         kernels.phase_sum(w, times, om, F, T), kernels.commutator_matrix(chi, gco, n - 1))
        finally:
            kernels.set_backend(old)
    for a, b in zip(out["numba"], out["numpy"]):
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.abs(b).max())


def test_time_kernel_array_limits():
    v = kernels.time_kernel_array(np.array([0.0, 1e-14, 2 * np.pi]), 1.0)
    assert v[0] == 1.0 and v[1] == 1.0 and abs(v[2]) <= 1e-15


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_env_flag_selects_numpy():
    env = dict(os.environ, KPLAB_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", "from kplab import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")
def test_default_backend_is_numba():
    env = {k: v for k, v in os.environ.items() if k != "KPLAB_DISABLE_JIT"}
    out = subprocess.run([sys.executable, "-c", "from kplab import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
