import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kplab.control import control_matrix, make_bump
from kplab.errors import ConfigurationError, DomainError, UnobservableError
from kplab.hum import (gramian_block, hermitian_eig, hum_solve, min_eig, simpson_weights, steer_verify,
                       time_kernel, zero_control)
from kplab import hum as hum_mod
from kplab.spectral import (Dispersion, ModeGrid1D, ModeGrid2D, Spectrum2D, frequencies, l2_norm,
                            propagate_linear, random_spectrum)

PI = math.pi


def simpson(f, a, b, n=20000):
    t = np.linspace(a, b, n + 1)
    return simpson_weights(n, b - a) @ f(t)


# time kernel

def test_time_kernel_examples():
    assert time_kernel(0.0, 2.0) == 2.0
    assert abs(time_kernel(2 * PI, 1.0)) <= 1e-14
    ref = simpson(lambda s: np.exp(1j * s), 0.0, 1.0)
    assert abs(time_kernel(1.0, 1.0) - ref) <= 1e-12
    assert abs(time_kernel(1.0, 1.0) - complex(math.sin(1), 1 - math.cos(1))) <= 1e-15
    assert abs(ref - (0.841471 + 0.459698j)) <= 1e-6


@given(d=st.floats(-1e3, 1e3), T=st.floats(1e-3, 10))
def test_time_kernel_closed_form(d, T):
    z = time_kernel(d, T)
    if abs(d) * T >= 1e-12:
        assert abs(z - (np.exp(1j * T * d) - 1) / (1j * d)) <= 1e-9 * max(1.0, T)
    assert abs(z) <= T * (1 + 1e-12)


def test_time_kernel_needs_positive_horizon():
    with pytest.raises(DomainError):
        time_kernel(1.0, 0.0)


# Hermitian eigen-data

def test_min_eig_examples():
    v, e = min_eig(np.eye(5))
    assert v == pytest.approx(1.0, abs=1e-14) and abs(np.linalg.norm(e) - 1) <= 1e-14
    v, e = min_eig(np.diag([3.0, 1.0, 2.0]))
    assert v == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(np.abs(e), [0, 1, 0], atol=1e-14)


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 24))
def test_eigen_trace_residual_and_reference(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = A + A.conj().T
    w, V = hermitian_eig(H)
    assert abs(np.sum(w) - np.trace(H).real) <= 1e-9 * max(1.0, np.abs(H).max())
    assert np.max(np.abs(w - np.linalg.eigvalsh(H))) <= 1e-10 * max(1.0, np.abs(w).max())
    lam, v = min_eig(H)
    assert np.linalg.norm(H @ v - lam * v) <= 1e-9 * np.linalg.norm(H, 2)


def test_min_eig_rejects_non_hermitian():
    with pytest.raises(DomainError):
        min_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


# Gramian

def test_gramian_diagonal_is_exact():
    M = control_matrix(make_bump(-PI / 2, PI / 2, 4), 4)
    blk = gramian_block(M, 3.0, 0.9)
    assert np.array_equal(np.diag(blk.matrix).real, (0.9 * np.diag(M.gram())).real)


def test_gramian_two_by_two_closed_form():
    M = control_matrix(make_bump(-PI / 2, PI / 2, 1), 1)
    blk = gramian_block(M, 0.0, 1.0)
    A = blk.matrix
    a, d, b = A[0, 0].real, A[1, 1].real, abs(A[0, 1])
    lo = 0.5 * (a + d) - math.sqrt(0.25 * (a - d) ** 2 + b * b)
    assert abs(blk.min_eig - lo) <= 1e-12


@pytest.mark.parametrize("lam", [0.0, 1.0, 5.0])
def test_gramian_matches_brute_force(lam):
    T = 0.7
    M = control_matrix(make_bump(-PI / 2, PI / 2, 2), 2)
    blk = gramian_block(M, lam, T)
    w = frequencies(ModeGrid1D(2), Dispersion.lambda1d(lam))
    n = 40000
    t = np.linspace(0, T, n + 1)
    E = np.exp(1j * np.multiply.outer(T - t, w))  # (nt, modes)
    X = E[:, :, None] * M.matrix[None]             # E(T-t) M
    integrand = X @ np.conj(np.transpose(X, (0, 2, 1)))
    brute = np.tensordot(simpson_weights(n, T), integrand, axes=1)
    assert np.max(np.abs(blk.matrix - brute)) <= 1e-8


@given(lam=st.floats(0, 30), T=st.floats(0.1, 3))
def test_gramian_psd_and_hermitian(lam, T):
    M = control_matrix(make_bump(-1.0, 1.3, 3), 3)
    blk = gramian_block(M, lam, T)
    assert np.max(np.abs(blk.matrix - blk.matrix.conj().T)) <= 1e-12
    assert blk.min_eig >= -1e-10


def test_gramian_argument_checks():
    M = control_matrix(make_bump(-1, 1, 1), 1)
    with pytest.raises(DomainError):
        gramian_block(M, -1.0, 1.0)
    with pytest.raises(DomainError):
        gramian_block(M, 1.0, 0.0)


# control synthesis

@pytest.fixture(scope="module")
def bump4():
    return make_bump(-PI / 2, PI / 2, 4)


def test_free_target_needs_no_control(bump4):
    g = ModeGrid2D(4, 2)
    u0 = random_spectrum(g, np.random.default_rng(1))
    u1 = propagate_linear(u0, 1.0, Dispersion.kp2d())
    sol = hum_solve(u0, u1, 1.0, bump4)
    assert not np.any(sol.phi) and not np.any(sol.control_coeffs)
    assert sol.residual <= 1e-10 and sol.control_norm == 0.0


def test_single_mode_two_by_two():
    g = ModeGrid2D(1, 0)
    bump = make_bump(-PI / 2, PI / 2, 1)
    u0 = Spectrum2D.zeros(g)
    c = np.zeros(g.shape, dtype=complex)
    c[0, 1] = 1.0  # (k, l) = (1, 0)
    u1 = Spectrum2D(g, c)
    sol = hum_solve(u0, u1, 1.0, bump)
    A = gramian_block(control_matrix(bump, 1), 0.0, 1.0).matrix
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det
    assert np.max(np.abs(sol.phi[0] - inv @ c[0])) <= 1e-12
    assert sol.residual <= 1e-8


def test_random_pair_residual_and_bound(bump4):
    g = ModeGrid2D(4, 2)
    rng = np.random.default_rng(7)
    u0, u1 = random_spectrum(g, rng), random_spectrum(g, rng)
    sol = hum_solve(u0, u1, 1.0, bump4)
    assert sol.residual <= 1e-6
    assert sol.control_norm <= sol.upsilon_bound * (1 + 1e-12)
    assert all(v > 0 for v in sol.min_eigs.values())
    assert sol.min_eigs[1] == sol.min_eigs[-1]


def test_control_norm_matches_quadrature(bump4):
    g = ModeGrid2D(4, 2)
    rng = np.random.default_rng(8)
    sol = hum_solve(random_spectrum(g, rng), random_spectrum(g, rng), 1.0, bump4, verify=False)
    n = 8192
    t = np.linspace(0, 1.0, n + 1)
    sq = 4 * PI ** 2 * np.sum(np.abs(sol.evaluate(t)) ** 2, axis=(1, 2))
    assert abs(math.sqrt(simpson_weights(n, 1.0) @ sq) - sol.control_norm) <= 1e-8 * sol.control_norm


def test_blocked_and_monolithic_paths_are_bitwise_equal(each_backend, bump4):
    g = ModeGrid2D(4, 2)
    rng = np.random.default_rng(9)
    u0, u1 = random_spectrum(g, rng), random_spectrum(g, rng)
    a = hum_solve(u0, u1, 1.0, bump4, verify=False)
    b = hum_solve(u0, u1, 1.0, bump4, verify=False, monolithic=True)
    assert np.array_equal(a.phi, b.phi)
    assert np.array_equal(a.control_coeffs, b.control_coeffs)


def test_cg_path_for_large_blocks():
    K = 33
    bump = make_bump(-PI / 2, PI / 2, K)
    g = ModeGrid2D(K, 0)
    rng = np.random.default_rng(10)
    u0, u1 = random_spectrum(g, rng, norm=1e-2), random_spectrum(g, rng, norm=1e-2)
    blk = gramian_block(control_matrix(bump, K), 0.0, 2.0)
    sol = hum_solve(u0, u1, 2.0, bump, verify=False)
    rhs = (u1 - propagate_linear(u0, 2.0, Dispersion.kp2d())).coeffs[0]
    assert np.linalg.norm(blk.matrix @ sol.phi[0] - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_unobservable_truncation_is_reported():
    # a strip of width 0.05 sees the high modes only through tiny Fourier weights
    bump = make_bump(-0.025, 0.025, 24)
    g = ModeGrid2D(24, 0)
    rng = np.random.default_rng(11)
    with pytest.raises(UnobservableError, match="numerically unobservable"):
        hum_solve(random_spectrum(g, rng), random_spectrum(g, rng), 0.01, bump)


def test_grid_mismatch(bump4):
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        hum_solve(random_spectrum(ModeGrid2D(4, 2), rng), random_spectrum(ModeGrid2D(4, 1), rng), 1.0, bump4)


def test_minimal_norm_against_kernel_perturbations():
    # one transverse frequency; controls spanned by exp(i nu t) per control mode
    K, T = 2, 1.0
    bump = make_bump(-PI / 2, PI / 2, K)
    g = ModeGrid2D(K, 0)
    rng = np.random.default_rng(12)
    u0, u1 = random_spectrum(g, rng), random_spectrum(g, rng)
    sol = hum_solve(u0, u1, T, bump, verify=False)
    nus = np.array([-9.0, -4.0, -1.0, 0.0, 2.0, 5.0, 11.0])
    n = 8192
    t = np.linspace(0, T, n + 1)
    w = simpson_weights(n, T)
    omega = frequencies(g, Dispersion.kp2d())[0]
    M = control_matrix(bump, K).matrix
    m = 2 * K
    # columns: control mode j times exp(i nu t); reachability image R[:, col]
    basis = []
    R = np.zeros((m, m * nus.size), dtype=complex)
    for j in range(m):
        for p, nu in enumerate(nus):
            col = j * nus.size + p
            e = np.zeros(m)
            e[j] = 1.0
            f = np.exp(1j * nu * t)[:, None] * e[None, :]
            basis.append(f)
            R[:, col] = w @ (np.exp(1j * np.multiply.outer(T - t, omega)) * (f @ M.T))
    _, s, Vh = np.linalg.svd(R)
    kernel = Vh[m:].conj().T
    h = sol.evaluate(t)[:, 0, :]
    base = w @ np.sum(np.abs(h) ** 2, axis=1)
    for _ in range(20):
        c = kernel @ (rng.standard_normal(kernel.shape[1]) + 1j * rng.standard_normal(kernel.shape[1]))
        psi = sum(ci * b for ci, b in zip(c, basis))
        assert np.linalg.norm(w @ (np.exp(1j * np.multiply.outer(T - t, omega)) * (psi @ M.T))) <= 1e-9
        assert w @ np.sum(np.abs(h + 0.1 * psi) ** 2, axis=1) >= base


# steering oracle

def test_zero_control_is_free_evolution(bump4):
    g = ModeGrid2D(4, 2)
    u0 = random_spectrum(g, np.random.default_rng(3))
    term, res = steer_verify(u0, zero_control(g, 1.0, bump4), 1.0, bump4)
    assert np.array_equal(term.coeffs, propagate_linear(u0, 1.0, Dispersion.kp2d()).coeffs)
    assert math.isnan(res)


def test_simpson_refinement_is_converged(centred_bump8):
    g = ModeGrid2D(8, 4)
    rng = np.random.default_rng(4)
    sol = hum_solve(random_spectrum(g, rng), random_spectrum(g, rng), 1.0, centred_bump8, verify=False)
    n = 1 << 14
    a = hum_mod._duhamel_simpson(sol, n)
    b = hum_mod._duhamel_simpson(sol, 2 * n)
    assert 2 * PI * np.linalg.norm(a - b) <= 1e-8


def test_steer_horizon_mismatch(bump4):
    g = ModeGrid2D(4, 2)
    with pytest.raises(ConfigurationError):
        steer_verify(Spectrum2D.zeros(g), zero_control(g, 1.0, bump4), 2.0, bump4)


def test_manifest_and_csv(bump4):
    g = ModeGrid2D(4, 2)
    rng = np.random.default_rng(5)
    sol = hum_solve(random_spectrum(g, rng), random_spectrum(g, rng), 1.0, bump4)
    man = sol.manifest()
    assert set(man) >= {"T", "K", "L", "residual", "control_norm", "condition", "min_eig"}
    assert set(man["min_eig"]) == {"-2", "-1", "0", "1", "2"}
    lines = sol.to_csv().splitlines()
    assert lines[0] == "t,k,l,re,im"
    assert len(lines) == 1 + len(sol.control_times) * g.size


def test_residual_is_relative(bump4):
    g = ModeGrid2D(4, 2)
    rng = np.random.default_rng(6)
    u0, u1 = random_spectrum(g, rng), random_spectrum(g, rng, norm=1e-3)
    sol = hum_solve(u0, u1, 1.0, bump4)
    term, res = steer_verify(u0, sol, 1.0, bump4, target=u1)
    assert res == pytest.approx(l2_norm(term - u1) / l2_norm(u1))
