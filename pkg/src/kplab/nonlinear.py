"""Pseudospectral KP-II solver with forcing and Picard iteration of the control map.

The state obeys ``u_t + u_xxx + d_x^{-1} u_yy + u u_x = G h`` with the linear
part integrated exactly. In Fourier::

    d/dt uhat = i omega uhat - (i k / 2) (u^2)^ + (G h)^

and the integral form reads ``u(t) = S(t) u0 - int S(t-s)(u u_x) ds + int S(t-s) G h ds``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractionError, DomainError, InstabilityError, NumericalRegimeError
from .hum import hum_solve, simpson_weights
from .spectral import Dispersion, Spectrum2D, frequencies, l2_norm

_BLOWUP = 1e8


@dataclass(frozen=True)
class SolverParams:
    dt: float = 1e-3
    dealias: float = 2.0 / 3.0
    max_picard: int = 20
    picard_tol: float = 1e-10
    R: float = 1.0
    linear: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not 0 < self.dealias <= 1:
            raise ConfigurationError(f"dealias must lie in (0, 1], got {self.dealias}")
        if not self.picard_tol > 0:
            raise ConfigurationError(f"picard_tol must be positive, got {self.picard_tol}")
        if int(self.max_picard) != self.max_picard or self.max_picard < 1:
            raise ConfigurationError(f"max_picard must be a positive integer, got {self.max_picard}")
        if not self.R > 0:
            raise ConfigurationError(f"R must be positive, got {self.R}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a uniform time grid. ``coeffs[j]`` is the state at ``times[j]``."""

    grid: object
    times: np.ndarray
    coeffs: np.ndarray
    control: object = None
    linear: bool = False
    dealias: float = 2.0 / 3.0
    warnings: tuple = ()

    @property
    def states(self):
        return [Spectrum2D(self.grid, c) for c in self.coeffs]

    @property
    def final(self):
        return Spectrum2D(self.grid, self.coeffs[-1])

    def norms(self):
        return np.sqrt(4.0 * np.pi ** 2 * np.sum(np.abs(self.coeffs) ** 2, axis=(1, 2)))

    def distance(self, other):
        """``sup_t ||u(t) - w(t)||_{L2}`` over the shared time grid."""
        if self.coeffs.shape != other.coeffs.shape:
            raise ConfigurationError("trajectories live on different grids")
        d = self.coeffs - other.coeffs
        return float(np.max(np.sqrt(4.0 * np.pi ** 2 * np.sum(np.abs(d) ** 2, axis=(1, 2)))))

    def to_csv(self, snapshot_times=None, path=None):
        idx = range(len(self.times)) if snapshot_times is None else sorted(
            {int(np.argmin(np.abs(self.times - t))) for t in snapshot_times})
        k, l = self.grid.mesh()
        kk, ll = k.ravel().tolist(), l.ravel().tolist()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "k", "l", "re", "im"])
        for j in idx:
            flat = self.coeffs[j].ravel()
            t = repr(float(self.times[j]))
            for i in range(flat.size):
                w.writerow([t, kk[i], ll[i], repr(float(flat[i].real)), repr(float(flat[i].imag))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# --------------------------------------------------------------------------
# dealiased products


def padded_size(n_modes, dealias):
    """Smallest grid size ``N >= n_modes / dealias``; 2/3 gives ``N >= 3K + 1``."""
    return int(math.ceil(n_modes / dealias - 1e-12))


class _Pad:
    """Scatter/gather between the mode grid and a zero-padded physical grid."""

    def __init__(self, grid, dealias):
        self.grid = grid
        self.ny = padded_size(2 * grid.L + 1, dealias)
        self.nx = padded_size(2 * grid.K + 1, dealias)
        self.rows = np.mod(grid.l_modes, self.ny)[:, None]
        self.cols = np.mod(grid.k_modes, self.nx)[None, :]
        self.k = grid.k_modes[None, :].astype(float)
        self.scale = self.nx * self.ny

    def physical(self, c):
        A = np.zeros((self.ny, self.nx), dtype=complex)
        A[self.rows, self.cols] = c
        return np.fft.ifft2(A) * self.scale

    def spectral(self, f):
        return np.fft.fft2(f) / self.scale

    def gather(self, F):
        return F[self.rows, self.cols]


def _burgers(pad, c):
    """``-(i k / 2) (u^2)^`` restricted to the mode grid."""
    u = pad.physical(c)
    return -0.5j * pad.k * pad.gather(pad.spectral(u * u))


def _convective(pad, c):
    """``(u u_x)^`` on the mode grid plus its discarded ``k = 0`` column."""
    u = pad.physical(c)
    ux = pad.physical(1j * pad.k * c)
    F = pad.spectral(u * ux)
    return pad.gather(F), F[np.mod(pad.grid.l_modes, pad.ny), 0]


# --------------------------------------------------------------------------
# time stepping


def _step_count(T, dt):
    n = max(2, int(round(T / dt)))
    return n + n % 2


def evolve_nonlinear(u0, control=None, T=1.0, params=SolverParams(), bump=None):
    """Integrating-factor RK4 from ``u0`` over ``[0, T]``, recording every step.

    The step is ``T / N`` with ``N`` the even integer nearest ``T / dt``, so the
    record is usable by Simpson's rule. ``bump`` is accepted for symmetry with
    the other entry points; the control already carries its Fourier matrix.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    grid = u0.grid
    if control is not None and control.grid != grid:
        raise ConfigurationError("control and initial state live on different grids")
    n = _step_count(T, params.dt)
    dt = T / n
    times = np.linspace(0.0, T, n + 1)
    warnings = []
    if dt * grid.K ** 3 > 10:
        warnings.append(f"dt*K^3 = {dt * grid.K ** 3:.3g} exceeds 10")
    omega = frequencies(grid, Dispersion.kp2d())
    E = np.exp(0.5j * dt * omega)
    E2 = E * E
    pad = _Pad(grid, params.dealias)
    if params.linear:
        def nl(c):
            return 0.0
    else:
        def nl(c):
            return _burgers(pad, c)
    if control is not None:
        half = np.linspace(0.0, T, 2 * n + 1)
        forcing = control.matrix.apply(control.evaluate(half))
    else:
        forcing = None

    out = np.empty((n + 1,) + grid.shape, dtype=complex)
    c = np.array(u0.coeffs, dtype=complex)
    out[0] = c
    start = max(1.0, l2_norm(u0))
    for j in range(n):
        if forcing is None:
            f0 = fh = f1 = 0.0
        else:
            f0, fh, f1 = forcing[2 * j], forcing[2 * j + 1], forcing[2 * j + 2]
        a = nl(c) + f0
        b = nl(E * (c + 0.5 * dt * a)) + fh
        cc = nl(E * c + 0.5 * dt * b) + fh
        d = nl(E2 * c + dt * E * cc) + f1
        c = E2 * c + (dt / 6.0) * (E2 * a + 2.0 * E * (b + cc) + d)
        if not np.all(np.isfinite(c)) or np.max(np.abs(c)) > _BLOWUP * start:
            raise InstabilityError(f"solution blew up at step {j + 1} (t = {times[j + 1]:.6g})", step=j + 1)
        out[j + 1] = c
    return Trajectory(grid, times, out, control, bool(params.linear), float(params.dealias), tuple(warnings))


def duhamel_tail(traj):
    """``-int_0^T S(T - t)(u u_x)(t) dt`` by Simpson over the recorded states.

    The product ``u u_x`` is formed directly (not as ``(u^2)_x / 2``) on the
    dealiased grid. A trajectory flagged linear has no nonlinear term and
    yields zero.
    """
    if len(traj.times) < 3:
        raise DomainError("duhamel_tail needs at least three recorded states")
    grid = traj.grid
    if traj.linear:
        return Spectrum2D.zeros(grid)
    n = len(traj.times) - 1
    T = float(traj.times[-1])
    if n % 2 or not np.allclose(np.diff(traj.times), T / n, rtol=1e-9, atol=1e-15):
        raise DomainError("duhamel_tail needs an even number of uniform steps")
    w = simpson_weights(n, T)
    omega = frequencies(grid, Dispersion.kp2d())
    pad = _Pad(grid, traj.dealias)
    total = np.zeros(grid.shape, dtype=complex)
    for j, t in enumerate(traj.times):
        prod, _ = _convective(pad, traj.coeffs[j])
        total += w[j] * np.exp(1j * (T - t) * omega) * prod
    return Spectrum2D(grid, -total)


def mean_leak(traj):
    """Largest ratio of the discarded ``k = 0`` part of ``u u_x`` to the retained part."""
    pad = _Pad(traj.grid, traj.dealias)
    worst = 0.0
    for c in traj.coeffs:
        kept, dropped = _convective(pad, c)
        total = float(np.sum(np.abs(kept) ** 2))
        if total > 0:
            worst = max(worst, float(np.sum(np.abs(dropped) ** 2)) / total)
    return worst


def linear_forcing_term(traj, n_sub=None):
    """``int_0^T S(T - t) G h(t) dt`` by Simpson on the trajectory's time grid."""
    grid = traj.grid
    T = float(traj.times[-1])
    if traj.control is None:
        return Spectrum2D.zeros(grid)
    n = len(traj.times) - 1 if n_sub is None else int(n_sub)
    times = np.linspace(0.0, T, n + 1)
    w = simpson_weights(n, T)
    omega = frequencies(grid, Dispersion.kp2d())
    F = traj.control.matrix.apply(traj.control.evaluate(times))
    total = np.einsum("j,jab->ab", w, np.exp(1j * np.multiply.outer(T - times, omega)) * F)
    return Spectrum2D(grid, total)


# --------------------------------------------------------------------------
# Picard iteration


@dataclass(frozen=True, eq=False)
class PicardResult:
    control: object
    trajectory: Trajectory
    history: tuple = field(default_factory=tuple)
    miss: float = float("nan")

    def __iter__(self):
        return iter((self.control, self.trajectory, list(self.history)))


def picard_steer(u0, u1, T, params, bump):
    """Fixed point of ``u -> solution driven by hum_solve(u0, u1 - tail(u))``.

    Raises :class:`ContractionError` when the iteration stalls, grows, blows up
    or exhausts ``max_picard``.
    """
    if u0.grid != u1.grid:
        raise ConfigurationError("u0 and u1 live on different grids")
    n0, n1 = l2_norm(u0), l2_norm(u1)
    if n0 > params.R * (1 + 1e-12) or n1 > params.R * (1 + 1e-12):
        raise ConfigurationError(f"data norms {n0:.3g}, {n1:.3g} exceed R = {params.R}")
    scale = max(n0, n1, 1e-300)
    history = []
    try:
        sol = hum_solve(u0, u1, T, bump, verify=False)
        lin = SolverParams(params.dt, params.dealias, params.max_picard, params.picard_tol, params.R, True)
        traj = evolve_nonlinear(u0, sol, T, lin)
        for _ in range(int(params.max_picard)):
            target = u1 - duhamel_tail(traj) if not params.linear else u1
            sol = hum_solve(u0, target, T, bump, verify=False)
            new = evolve_nonlinear(u0, sol, T, params)
            dist = new.distance(traj)
            history.append(dist)
            traj = new
            if dist <= params.picard_tol * scale:
                miss = l2_norm(traj.final - u1) / max(n1, 1e-30)
                return PicardResult(sol, traj, tuple(history), miss)
            if len(history) >= 3 and history[-1] > history[-2]:
                raise ContractionError("outside contraction regime: Picard distances increased", history)
    except InstabilityError as exc:
        raise ContractionError(f"outside contraction regime: {exc}", history) from exc
    except ContractionError:
        raise
    except NumericalRegimeError as exc:
        raise ContractionError(f"outside contraction regime: {exc}", history) from exc
    raise ContractionError(f"outside contraction regime: no convergence in {params.max_picard} iterations",
                           history)
