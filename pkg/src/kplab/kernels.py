"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. ``KPLAB_DISABLE_JIT=1`` (or a missing numba)
selects the numpy path at import time; ``set_backend`` switches at runtime,
which is what the benchmark and the backend-parity tests use.

Summation orders in the Cholesky and triangular kernels are column oriented
(axpy updates only, no dot products) in both backends, so that solving a
block-diagonal system in one piece gives bitwise the same numbers as solving
the blocks one by one.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None

_ENV_FLAG = "KPLAB_DISABLE_JIT"


def _env_disables_jit():
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


HAVE_NUMBA = numba is not None


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)


# --------------------------------------------------------------------------
# cyclic Jacobi for Hermitian matrices


def _jacobi_loops(H, tol, max_sweeps):
    n = H.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += H[i, j].real ** 2 + H[i, j].imag ** 2
    scale = np.sqrt(scale)
    sweeps = 0
    if scale == 0.0:
        return H, V, sweeps
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += H[i, j].real ** 2 + H[i, j].imag ** 2
        if np.sqrt(2.0 * off) <= tol * scale:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = H[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                e = apq / r
                app = H[p, p].real
                aqq = H[q, q].real
                tau = (aqq - app) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ec = e.conjugate()
                # W = [[c, s], [-s*conj(e), c*conj(e)]] on (p, q)
                w_pp = c + 0j
                w_pq = s + 0j
                w_qp = -s * ec
                w_qq = c * ec
                for i in range(n):
                    hp = H[i, p]
                    hq = H[i, q]
                    H[i, p] = hp * w_pp + hq * w_qp
                    H[i, q] = hp * w_pq + hq * w_qq
                    vp = V[i, p]
                    vq = V[i, q]
                    V[i, p] = vp * w_pp + vq * w_qp
                    V[i, q] = vp * w_pq + vq * w_qq
                for j in range(n):
                    hp = H[p, j]
                    hq = H[q, j]
                    H[p, j] = w_pp.conjugate() * hp + w_qp.conjugate() * hq
                    H[q, j] = w_pq.conjugate() * hp + w_qq.conjugate() * hq
                H[p, q] = 0.0
                H[q, p] = 0.0
                H[p, p] = H[p, p].real
                H[q, q] = H[q, q].real
    return H, V, sweeps


def _jacobi_numpy(H, tol, max_sweeps):
    n = H.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(H)
    sweeps = 0
    if scale == 0.0:
        return H, V, sweeps
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        if np.sqrt(2.0 * np.sum(np.abs(H[iu]) ** 2)) <= tol * scale:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = H[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                e = apq / r
                tau = (H[q, q].real - H[p, p].real) / (2.0 * r)
                t = np.copysign(1.0, tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                W = np.array([[c, s], [-s * np.conj(e), c * np.conj(e)]])
                cols = [p, q]
                H[:, cols] = H[:, cols] @ W
                V[:, cols] = V[:, cols] @ W
                H[cols, :] = W.conj().T @ H[cols, :]
                H[p, q] = H[q, p] = 0.0
                H[p, p] = H[p, p].real
                H[q, q] = H[q, q].real
    return H, V, sweeps


# --------------------------------------------------------------------------
# Cholesky (right looking), triangular solves, matvec


def _cholesky_loops(A):
    n = A.shape[0]
    L = A.copy()
    for j in range(n):
        d = L[j, j].real
        if not d > 0.0:
            return L, j
        d = np.sqrt(d)
        L[j, j] = d
        for i in range(j + 1, n):
            L[i, j] = L[i, j] / d
        for k in range(j + 1, n):
            lkj = L[k, j].conjugate()
            for i in range(k, n):
                L[i, k] = L[i, k] - L[i, j] * lkj
    for j in range(n):
        for i in range(j):
            L[i, j] = 0.0
    return L, -1


def _cholesky_numpy(A):
    n = A.shape[0]
    L = A.copy()
    for j in range(n):
        d = L[j, j].real
        if not d > 0.0:
            return L, j
        d = np.sqrt(d)
        L[j, j] = d
        L[j + 1:, j] = L[j + 1:, j] / d
        col = L[j + 1:, j]
        # only the lower triangle is meaningful; the full update keeps it elementwise
        L[j + 1:, j + 1:] = L[j + 1:, j + 1:] - col[:, None] * col.conj()[None, :]
    return np.tril(L), -1


def _chol_solve_loops(L, b):
    n = L.shape[0]
    y = b.copy()
    for j in range(n):
        y[j] = y[j] / L[j, j]
        for i in range(j + 1, n):
            y[i] = y[i] - L[i, j] * y[j]
    # back substitution with L^H, column oriented on L^H means row oriented on L
    for j in range(n - 1, -1, -1):
        y[j] = y[j] / L[j, j].real
        yj = y[j]
        for i in range(j):
            y[i] = y[i] - L[j, i].conjugate() * yj
    return y


def _chol_solve_numpy(L, b):
    n = L.shape[0]
    y = b.copy()
    for j in range(n):
        y[j] = y[j] / L[j, j]
        y[j + 1:] = y[j + 1:] - L[j + 1:, j] * y[j]
    for j in range(n - 1, -1, -1):
        y[j] = y[j] / L[j, j].real
        y[:j] = y[:j] - L[j, :j].conj() * y[j]
    return y


def _matvec_loops(A, x):
    n, m = A.shape
    out = np.zeros(n, dtype=np.complex128)
    for j in range(m):
        xj = x[j]
        for i in range(n):
            out[i] = out[i] + A[i, j] * xj
    return out


def _matvec_numpy(A, x):
    out = np.zeros(A.shape[0], dtype=np.complex128)
    for j in range(A.shape[1]):
        out = out + A[:, j] * x[j]
    return out


# --------------------------------------------------------------------------
# Gramian assembly: G[k, k'] = A[k, k'] * int_0^T exp(i s (w_k - w_k')) ds


def _time_kernel_scalar(delta, T):
    if abs(delta) * T < 1e-12:
        return T + 0j
    half = 0.5 * delta * T
    return (2.0 * np.sin(half) / delta) * (np.cos(half) + 1j * np.sin(half))


def _gramian_loops(A, omega, T):
    n = A.shape[0]
    G = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            d = omega[i] - omega[j]
            if abs(d) * T < 1e-12:
                kern = T + 0j
            else:
                half = 0.5 * d * T
                kern = (2.0 * np.sin(half) / d) * (np.cos(half) + 1j * np.sin(half))
            G[i, j] = A[i, j] * kern
    return G


def time_kernel_array(delta, T):
    """Vectorised ``int_0^T exp(i s delta) ds``."""
    delta = np.asarray(delta, dtype=float)
    half = 0.5 * delta * T
    small = np.abs(delta) * T < 1e-12
    safe = np.where(small, 1.0, delta)
    out = (2.0 * np.sin(half) / safe) * np.exp(1j * half)
    return np.where(small, T + 0j, out)


def _gramian_numpy(A, omega, T):
    return A * time_kernel_array(omega[:, None] - omega[None, :], T)


# --------------------------------------------------------------------------
# weighted phase sum: sum_j w_j exp(i (T - t_j) omega) F_j


def _phase_sum_loops(weights, times, omega, F, T):
    nt = F.shape[0]
    m = F.shape[1]
    out = np.zeros(m, dtype=np.complex128)
    for j in range(nt):
        s = T - times[j]
        w = weights[j]
        for i in range(m):
            ph = s * omega[i]
            out[i] = out[i] + w * (np.cos(ph) + 1j * np.sin(ph)) * F[j, i]
    return out


def _phase_sum_numpy(weights, times, omega, F, T):
    phases = np.exp(1j * np.outer(T - times, omega))
    return np.einsum("j,ji,ji->i", weights, phases, F)


# --------------------------------------------------------------------------
# commutator [chi(hD), g] in Fourier: C[k, k1] = (chi_k - chi_k1) * ghat(k - k1)


def _commutator_loops(chi_vals, gcoef, offset):
    n = chi_vals.shape[0]
    C = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            C[i, j] = (chi_vals[i] - chi_vals[j]) * gcoef[offset + i - j]
    return C


def _commutator_numpy(chi_vals, gcoef, offset):
    n = chi_vals.shape[0]
    idx = np.arange(n)
    return (chi_vals[:, None] - chi_vals[None, :]) * gcoef[offset + idx[:, None] - idx[None, :]]


_NUMPY = {
    "jacobi": _jacobi_numpy,
    "cholesky": _cholesky_numpy,
    "chol_solve": _chol_solve_numpy,
    "matvec": _matvec_numpy,
    "gramian": _gramian_numpy,
    "phase_sum": _phase_sum_numpy,
    "commutator": _commutator_numpy,
}

_LOOPS = {
    "jacobi": _jacobi_loops,
    "cholesky": _cholesky_loops,
    "chol_solve": _chol_solve_loops,
    "matvec": _matvec_loops,
    "gramian": _gramian_loops,
    "phase_sum": _phase_sum_loops,
    "commutator": _commutator_loops,
}

_JIT = {name: _njit(fn) for name, fn in _LOOPS.items()} if HAVE_NUMBA else {}

_backend = "numpy" if (_env_disables_jit() or not HAVE_NUMBA) else "numba"


def backend():
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name):
    """Switch kernels between ``"numba"`` and ``"numpy"``; returns the old name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    old, _backend = _backend, name
    return old


def _table():
    return _JIT if _backend == "numba" else _NUMPY


def jacobi_eigh(H, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi on a Hermitian matrix; returns (diag, V, sweeps) unsorted."""
    H = np.array(H, dtype=np.complex128, copy=True)
    D, V, sweeps = _table()["jacobi"](H, float(tol), int(max_sweeps))
    return np.real(np.diag(D)).copy(), V, sweeps


def cholesky(A):
    """Lower Cholesky factor of a Hermitian positive definite matrix.

    Returns ``(L, failed_at)`` with ``failed_at == -1`` on success.
    """
    return _table()["cholesky"](np.ascontiguousarray(A, dtype=np.complex128))


def chol_solve(L, b):
    return _table()["chol_solve"](np.ascontiguousarray(L), np.asarray(b, dtype=np.complex128).copy())


def matvec(A, x):
    return _table()["matvec"](np.ascontiguousarray(A, dtype=np.complex128),
                              np.asarray(x, dtype=np.complex128))


def gramian(A, omega, T):
    return _table()["gramian"](np.ascontiguousarray(A, dtype=np.complex128),
                               np.asarray(omega, dtype=np.float64), float(T))


def phase_sum(weights, times, omega, F, T):
    """``sum_j weights[j] * exp(i (T - times[j]) omega) * F[j]`` over the first axis."""
    F = np.ascontiguousarray(F, dtype=np.complex128)
    return _table()["phase_sum"](np.asarray(weights, dtype=np.float64),
                                 np.asarray(times, dtype=np.float64),
                                 np.asarray(omega, dtype=np.float64), F, float(T))


def commutator_matrix(chi_vals, gcoef, offset):
    return _table()["commutator"](np.asarray(chi_vals, dtype=np.float64),
                                  np.ascontiguousarray(gcoef, dtype=np.complex128), int(offset))
