"""Quick consistency checks covering every module, run by ``kplab selftest``."""

from __future__ import annotations

import math

import numpy as np

from . import control, counterexample, hum, nonlinear, observability, spectral
from .spectral import Dispersion, ModeGrid1D, ModeGrid2D, Spectrum1D, Spectrum2D

_PI = math.pi


def _rng():
    return np.random.default_rng(12345)


def _close(a, b, tol):
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0) <= tol)


# spectral_core

def _dispersion_cancels():
    return spectral.dispersion((1, 1), Dispersion.kp2d()) == 0.0


def _lambda_odd():
    return spectral.dispersion(-1, Dispersion.lambda1d(1.0)) == 0.0


def _propagate_identity():
    u = spectral.random_spectrum(ModeGrid2D(4, 2), _rng())
    return _close(spectral.propagate_linear(u, 0.0, Dispersion.kp2d()).coeffs, u.coeffs, 0.0)


def _propagate_unitary():
    u = spectral.random_spectrum(ModeGrid2D(6, 3), _rng())
    v = spectral.propagate_linear(u, 3.7, Dispersion.kp2d())
    return abs(spectral.l2_norm(v) - spectral.l2_norm(u)) <= 1e-12


def _mode_11_fixed():
    g = ModeGrid2D(2, 1)
    c = np.zeros(g.shape, dtype=complex)
    c[2, 2] = 1.0  # (k, l) = (1, 1)
    u = Spectrum2D(g, c)
    return _close(spectral.propagate_linear(u, 2.5, Dispersion.kp2d()).coeffs, c, 0.0)


def _roundtrip():
    u = spectral.random_spectrum(ModeGrid2D(5, 3), _rng(), real=False)
    back = spectral.from_physical(spectral.to_physical(u, 16, 12), u.grid)
    return _close(back.coeffs, u.coeffs, 1e-12)


def _single_mode_samples():
    g = ModeGrid1D(4)
    c = np.zeros(g.shape, dtype=complex)
    c[np.searchsorted(g.modes, 3)] = 1.0
    x = spectral.sample_points(12)
    return _close(spectral.to_physical(Spectrum1D(g, c), 12), np.exp(3j * x), 1e-13)


def _parseval():
    u = spectral.random_spectrum(ModeGrid1D(7), _rng())
    s = spectral.to_physical(u, 32)
    return abs(np.sum(np.abs(s) ** 2) * 2 * _PI / 32 - spectral.l2_norm(u) ** 2) <= 1e-10


def _norms_one_mode():
    g = ModeGrid1D(4)
    c = np.zeros(g.shape, dtype=complex)
    c[np.searchsorted(g.modes, 3)] = 1.0
    u = Spectrum1D(g, c)
    z = Spectrum1D.zeros(g)
    return (abs(spectral.l2_norm(u) - math.sqrt(2 * _PI)) <= 1e-14
            and abs(spectral.hminus1_norm(u) - math.sqrt(2 * _PI / 10)) <= 1e-14
            and spectral.l2_norm(z) == 0.0 and spectral.hminus1_norm(z) == 0.0)


def _ray_identity():
    s = spectral.RayState(0.3, 1.2, 0.5)
    r = spectral.ray_flow(s, 0.0, "P")
    later = spectral.ray_flow(s, 7.0, "Q")
    return r.x == s.x and r.xi == s.xi and later.xi == s.xi


# control_ops

def _bump_mean():
    b = control.make_bump(-_PI / 2, _PI / 2, 4)
    return abs(b.coeff(0) - 1 / (2 * _PI)) <= 1e-10 and np.max(np.abs(b.coeffs.imag)) <= 1e-14


def _bump_bounded():
    b = control.make_bump(0.0, 1.0, 8)
    return bool(np.all(np.abs(b.coeffs) <= 1 / (2 * _PI) + 1e-12))


def _control_kills_constants():
    b = control.make_bump(-1.0, 0.5, 4)
    y = spectral.sample_points(16)
    h = np.tile(np.cos(y)[:, None], (1, 32))
    v = control.apply_control_op(b, "vertical", h)
    hh = control.apply_control_op(b, "horizontal", h.T.copy())
    return np.max(np.abs(v)) <= 1e-10 and np.max(np.abs(hh)) <= 1e-10


def _zero_x_mean():
    b = control.make_bump(-1.0, 0.5, 4)
    h = _rng().standard_normal((16, 64))
    v = control.apply_control_op(b, "vertical", h)
    return np.max(np.abs(v.sum(axis=1) * 2 * _PI / 64)) <= 1e-10


def _gram_hermitian():
    M = control.control_matrix(control.make_bump(-0.4, 1.3, 5), 5)
    G = M.gram()
    return bool(np.array_equal(G, G.conj().T))


def _commutator_trivial():
    b = control.make_bump(-1.0, 1.0, 8)
    flat = control.commutator_scaling(b, [0.25], chi=lambda xi: np.full_like(xi, 0.7), pad=8)
    const = control.commutator_scaling(control.BumpProfile.constant(0.3, 4), [0.25], pad=8)
    return flat[0][1] <= 1e-14 and const[0][1] <= 1e-14


# hum_synthesis

def _time_kernel():
    return hum.time_kernel(0.0, 2.0) == 2.0 and abs(hum.time_kernel(2 * _PI, 1.0)) <= 1e-14


def _gramian_diagonal():
    M = control.control_matrix(control.make_bump(-_PI / 2, _PI / 2, 3), 3)
    blk = hum.gramian_block(M, 2.0, 0.8)
    return _close(np.diag(blk.matrix), 0.8 * np.diag(M.gram()), 1e-15)


def _min_eig_simple():
    v1, _ = hum.min_eig(np.eye(4))
    v2, e2 = hum.min_eig(np.diag([3.0, 1.0, 2.0]))
    return abs(v1 - 1) <= 1e-14 and abs(v2 - 1) <= 1e-14 and abs(abs(e2[1]) - 1) <= 1e-14


def _hum_free_target():
    g = ModeGrid2D(3, 1)
    b = control.make_bump(-_PI / 2, _PI / 2, 3)
    u0 = spectral.random_spectrum(g, _rng())
    u1 = spectral.propagate_linear(u0, 1.0, Dispersion.kp2d())
    sol = hum.hum_solve(u0, u1, 1.0, b)
    return not np.any(sol.phi) and not np.any(sol.control_coeffs) and sol.residual <= 1e-10


def _zero_control_free():
    g = ModeGrid2D(3, 1)
    b = control.make_bump(-_PI / 2, _PI / 2, 3)
    u0 = spectral.random_spectrum(g, _rng())
    term, _ = hum.steer_verify(u0, hum.zero_control(g, 1.0, b), 1.0, b)
    return _close(term.coeffs, spectral.propagate_linear(u0, 1.0, Dispersion.kp2d()).coeffs, 0.0)


# observability_lab

def _scan_deterministic():
    b = control.make_bump(-_PI / 2, _PI / 2, 3)
    r1 = observability.lambda_scan(b, 3, 1.0, [0.0])
    r2 = observability.lambda_scan(b, 3, 1.0, [0.0])
    return r1 == r2


def _ingham_trivial():
    one = observability.ingham_estimate([3.0], 2.0)
    orth = observability.ingham_estimate([0.0, 2 * _PI / 1.5], 1.5)
    return (abs(one.C1 - 2.0) <= 1e-14 and abs(one.C2 - 2.0) <= 1e-14
            and abs(orth.C1 - 1.5) <= 1e-12 and abs(orth.C2 - 1.5) <= 1e-12)


def _gap_progression():
    return abs(observability.gap([0.0, 0.7, 1.4]) - 0.7) <= 1e-15


def _transit_amgm():
    rows = observability.transit_report(-1.0, 1.0, [0.0, 1.0, 3.0, 10.0], 6)
    return all(v >= 2 * math.sqrt(3) * lam - 1e-12 for lam, v, _ in rows)


# counterexample

def _gaussian_even():
    k = np.arange(1, 12)
    return _close(counterexample.gaussian_coeff(0.25, k), counterexample.gaussian_coeff(0.25, -k), 0.0)


def _packet_support_and_reality():
    p = counterexample.build_packet(16, 0.45, 0.36, K_pkt=12)
    k = np.arange(-12, 13)
    u = p.spectrum
    return bool(np.all(p.coeffs[np.abs(k) >= 0.45 * 16] == 0)) and u.is_real()


def _schrodinger_trivial():
    p = counterexample.build_packet(8, 0.45, 0.36)
    same = counterexample.schrodinger_evolve(p, 0.0)
    later = counterexample.schrodinger_evolve(p, 0.9)
    return (_close(same.coeffs, p.coeffs, 0.0)
            and abs(spectral.l2_norm(later) - p.mass()) <= 1e-12)


def _lift_identity():
    p = counterexample.build_packet(4, 0.45, 0.36)
    u = counterexample.lift_packet(p, 5, 3)
    nz = np.flatnonzero(np.any(u.coeffs != 0, axis=0))
    t = 0.37
    v = spectral.propagate_linear(u, t, Dispersion.kp2d())
    col = v.coeffs[:, np.searchsorted(u.grid.k_modes, 4)]
    ref = counterexample.lift_phase(p, t) * counterexample.schrodinger_evolve(p, t).coeff(u.grid.l_modes)
    return nz.size == 1 and _close(col, ref, 1e-12)


# nonlinear_control

def _zero_stays_zero():
    g = ModeGrid2D(4, 2)
    tr = nonlinear.evolve_nonlinear(Spectrum2D.zeros(g), None, 0.1, nonlinear.SolverParams(dt=0.01))
    return not np.any(tr.coeffs) and not np.any(nonlinear.duhamel_tail(tr).coeffs)


def _linear_tail_zero():
    g = ModeGrid2D(4, 2)
    u0 = spectral.random_spectrum(g, _rng(), norm=1e-3)
    tr = nonlinear.evolve_nonlinear(u0, None, 0.1, nonlinear.SolverParams(dt=0.01, linear=True))
    return not np.any(nonlinear.duhamel_tail(tr).coeffs)


def _picard_zero():
    g = ModeGrid2D(3, 1)
    b = control.make_bump(-_PI / 2, _PI / 2, 3)
    z = Spectrum2D.zeros(g)
    res = nonlinear.picard_steer(z, z, 0.5, nonlinear.SolverParams(dt=0.01), b)
    return len(res.history) == 1 and not np.any(res.trajectory.coeffs)


CHECKS = (
    ("spectral_core", "dispersion (1,1) cancels", _dispersion_cancels),
    ("spectral_core", "Lambda1D odd with omega_1(1)=0", _lambda_odd),
    ("spectral_core", "propagation at t=0 is the identity", _propagate_identity),
    ("spectral_core", "propagation preserves L2", _propagate_unitary),
    ("spectral_core", "mode (1,1) is stationary", _mode_11_fixed),
    ("spectral_core", "transform round trip", _roundtrip),
    ("spectral_core", "single mode samples", _single_mode_samples),
    ("spectral_core", "Parseval", _parseval),
    ("spectral_core", "norms of one mode and of zero", _norms_one_mode),
    ("spectral_core", "ray flow identity and frozen xi", _ray_identity),
    ("control_ops", "bump mean and real coefficients", _bump_mean),
    ("control_ops", "bump coefficients bounded", _bump_bounded),
    ("control_ops", "control annihilates constants", _control_kills_constants),
    ("control_ops", "vertical output has zero x-mean", _zero_x_mean),
    ("control_ops", "M M* Hermitian", _gram_hermitian),
    ("control_ops", "trivial commutators vanish", _commutator_trivial),
    ("hum_synthesis", "time kernel values", _time_kernel),
    ("hum_synthesis", "Gramian diagonal is T (M M*)", _gramian_diagonal),
    ("hum_synthesis", "min_eig on diagonal matrices", _min_eig_simple),
    ("hum_synthesis", "free target needs no control", _hum_free_target),
    ("hum_synthesis", "zero control gives free evolution", _zero_control_free),
    ("observability_lab", "scan determinism", _scan_deterministic),
    ("observability_lab", "Ingham single and orthogonal", _ingham_trivial),
    ("observability_lab", "gap of a progression", _gap_progression),
    ("observability_lab", "transit speed AM-GM", _transit_amgm),
    ("counterexample", "Gaussian coefficients even", _gaussian_even),
    ("counterexample", "packet support and reality", _packet_support_and_reality),
    ("counterexample", "Schrodinger identity and unitarity", _schrodinger_trivial),
    ("counterexample", "lift support and profile identity", _lift_identity),
    ("nonlinear_control", "zero data stays zero", _zero_stays_zero),
    ("nonlinear_control", "linear trajectory has no tail", _linear_tail_zero),
    ("nonlinear_control", "Picard fixes zero", _picard_zero),
)


def run_selftest():
    """``[(module, check, passed, error)]`` for every check."""
    out = []
    for module, name, fn in CHECKS:
        try:
            ok, err = bool(fn()), ""
        except Exception as exc:  # a crashing check is a failed check
            ok, err = False, f"{type(exc).__name__}: {exc}"
        out.append((module, name, ok, err))
    return out
