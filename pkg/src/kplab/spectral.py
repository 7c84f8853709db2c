"""Truncated Fourier spectra on the torus and the exact linear KP-II flows.

Fourier convention, used everywhere in kplab::

    f(x) = sum_k fhat(k) exp(i k x),    fhat(k) = (1/2pi) int_T f(x) exp(-i k x) dx

so ``||f||_{L2(T)}^2 = 2pi sum |fhat|^2`` and ``||f||_{L2(T^2)}^2 = 4pi^2 sum |fhat|^2``.

2D spectra live on the modes ``1 <= |k| <= K, |l| <= L`` (zero x-mean); their
coefficient array has shape ``(2L+1, 2K)``: rows are ``l = -L..L``, columns are
``k = -K..-1, 1..K``. Flattening in C order gives the documented enumeration
(row-major in l, then k ascending).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

TWO_PI = 2.0 * np.pi


def nonzero_modes(K):
    """``[-K, ..., -1, 1, ..., K]`` as an int array."""
    return np.concatenate([np.arange(-K, 0), np.arange(1, K + 1)])


@dataclass(frozen=True)
class ModeGrid1D:
    K: int
    include_zero: bool = False

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {self.K!r}")

    @property
    def modes(self):
        if self.include_zero:
            return np.arange(-self.K, self.K + 1)
        return nonzero_modes(self.K)

    @property
    def size(self):
        return 2 * self.K + (1 if self.include_zero else 0)

    @property
    def shape(self):
        return (self.size,)


@dataclass(frozen=True)
class ModeGrid2D:
    K: int
    L: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {self.K!r}")
        if int(self.L) != self.L or self.L < 0:
            raise ConfigurationError(f"L must be a non-negative integer, got {self.L!r}")

    @property
    def k_modes(self):
        return nonzero_modes(self.K)

    @property
    def l_modes(self):
        return np.arange(-self.L, self.L + 1)

    @property
    def shape(self):
        return (2 * self.L + 1, 2 * self.K)

    @property
    def size(self):
        return (2 * self.L + 1) * 2 * self.K

    def mesh(self):
        """``(k, l)`` integer arrays of shape ``self.shape``."""
        l, k = np.meshgrid(self.l_modes, self.k_modes, indexing="ij")
        return k, l

    def enumerate(self):
        """Modes ``(k, l)`` in the fixed enumeration order."""
        k, l = self.mesh()
        return list(zip(k.ravel().tolist(), l.ravel().tolist()))


@dataclass(frozen=True, eq=False)
class Spectrum1D:
    grid: ModeGrid1D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ConfigurationError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def modes(self):
        return self.grid.modes

    def with_coeffs(self, coeffs):
        return Spectrum1D(self.grid, coeffs)

    def coeff(self, k):
        """Coefficient of mode ``k`` (array-valued for arrays); zero off the grid."""
        k = np.asarray(k)
        modes = self.modes
        idx = np.clip(np.searchsorted(modes, k), 0, modes.size - 1)
        return np.where(modes[idx] == k, self.coeffs[idx], 0.0)

    def scale(self, factor):
        return self.with_coeffs(self.coeffs * factor)

    def is_real(self, tol=1e-12):
        return bool(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1])), initial=0.0) <= tol)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))


@dataclass(frozen=True, eq=False)
class Spectrum2D:
    grid: ModeGrid2D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ConfigurationError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs):
        return Spectrum2D(self.grid, coeffs)

    def is_real(self, tol=1e-12):
        # (k, l) -> (-k, -l) is a flip of both axes in this layout
        return bool(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1, ::-1])), initial=0.0) <= tol)

    def __add__(self, other):
        _same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scale(self, factor):
        return self.with_coeffs(self.coeffs * factor)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ConfigurationError(f"grid mismatch: {a.grid} vs {b.grid}")


def random_spectrum(grid, rng, norm=1.0, real=True):
    """Random spectrum with prescribed L2 norm; conjugate symmetric if ``real``."""
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if real:
        # mode order is symmetric about zero on every axis
        c = 0.5 * (c + np.conj(np.flip(c)))
    u = (Spectrum1D if isinstance(grid, ModeGrid1D) else Spectrum2D)(grid, c)
    return u.scale(norm / l2_norm(u))


# --------------------------------------------------------------------------
# dispersion relations


_KINDS = ("KP2D", "Lambda1D", "Semiclassical", "Schrodinger")


@dataclass(frozen=True)
class Dispersion:
    """One of the four linear flows; build it with the classmethods."""

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown dispersion kind {self.kind!r}")
        if self.kind == "Lambda1D" and not self.param >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.param}")
        if self.kind in ("Semiclassical", "Schrodinger") and not 0 < self.param < 1:
            raise DomainError(f"h must lie in (0, 1), got {self.param}")

    @classmethod
    def kp2d(cls):
        return cls("KP2D")

    @classmethod
    def lambda1d(cls, lam):
        return cls("Lambda1D", float(lam))

    @classmethod
    def semiclassical(cls, h):
        return cls("Semiclassical", float(h))

    @classmethod
    def schrodinger(cls, h):
        return cls("Schrodinger", float(h))

    @property
    def allows_zero_mode(self):
        return self.kind == "Schrodinger"

    @property
    def two_dimensional(self):
        return self.kind == "KP2D"


def dispersion(mode, variant):
    """Frequency ``omega`` such that ``uhat(t) = exp(i t omega) uhat(0)``.

    ``mode`` is ``k`` (1D variants) or ``(k, l)`` (KP2D); arrays broadcast.

    >>> float(dispersion((2, 1), Dispersion.kp2d()))
    7.5
    """
    if variant.two_dimensional:
        k, l = mode
        k = np.asarray(k, dtype=float)
        l = np.asarray(l, dtype=float)
    else:
        k = np.asarray(mode, dtype=float)
    if not variant.allows_zero_mode and np.any(k == 0):
        raise DomainError(f"k = 0 is not allowed for the {variant.kind} dispersion")
    p = variant.param
    with np.errstate(divide="ignore"):
        if variant.kind == "KP2D":
            w = k ** 3 - l ** 2 / k
        elif variant.kind == "Lambda1D":
            w = k ** 3 - p ** 2 / k
        elif variant.kind == "Semiclassical":
            w = p ** 2 * k ** 3 - 1.0 / (p ** 2 * k)
        else:
            w = -p * k ** 2
    return w[()] if isinstance(w, np.ndarray) and w.ndim == 0 else w


def frequencies(spectrum_or_grid, variant):
    """Dispersion evaluated on every mode of a grid, shaped like its coefficients."""
    grid = getattr(spectrum_or_grid, "grid", spectrum_or_grid)
    if isinstance(grid, ModeGrid2D):
        if not variant.two_dimensional:
            raise ConfigurationError(f"{variant.kind} acts on 1D spectra")
        k, l = grid.mesh()
        return dispersion((k, l), variant)
    if variant.two_dimensional:
        raise ConfigurationError("KP2D acts on 2D spectra")
    return np.asarray(dispersion(grid.modes, variant), dtype=float)


def propagate_linear(u, t, variant):
    """Exact linear flow: multiply every coefficient by ``exp(i t omega)``."""
    w = frequencies(u, variant)
    return u.with_coeffs(u.coeffs * np.exp(1j * t * w))


# --------------------------------------------------------------------------
# physical <-> spectral


def sample_points(n):
    """Uniform grid ``x_j = -pi + 2 pi j / n``."""
    return -np.pi + TWO_PI * np.arange(n) / n


def _fft_index(modes, n):
    return np.mod(modes, n)


def to_physical(u, nx, ny=None):
    """Evaluate ``u`` on the uniform grid; 2D output has shape ``(ny, nx)`` (rows are y)."""
    if isinstance(u, Spectrum1D):
        K = u.grid.K
        if nx < 2 * K + 2:
            raise ConfigurationError(f"need at least {2 * K + 2} samples, got {nx}")
        full = np.zeros(nx, dtype=complex)
        m = u.modes
        # x_j = -pi + ..., so exp(i k x_j) = (-1)^k exp(2 pi i k j / n)
        full[_fft_index(m, nx)] = u.coeffs * np.where(m % 2 == 0, 1.0, -1.0)
        return np.fft.ifft(full) * nx
    if ny is None:
        raise ConfigurationError("2D transform needs ny")
    K, L = u.grid.K, u.grid.L
    if nx < 2 * K + 2 or ny < 2 * L + 2:
        raise ConfigurationError(f"need at least ({2 * L + 2}, {2 * K + 2}) samples, got ({ny}, {nx})")
    k, l = u.grid.mesh()
    full = np.zeros((ny, nx), dtype=complex)
    sign = np.where((k + l) % 2 == 0, 1.0, -1.0)
    full[_fft_index(l, ny), _fft_index(k, nx)] = u.coeffs * sign
    return np.fft.ifft2(full) * (nx * ny)


def from_physical(samples, grid):
    """Coefficients of the represented modes from uniform samples (exact if band-limited)."""
    samples = np.asarray(samples)
    if isinstance(grid, ModeGrid1D):
        n = samples.shape[0]
        if n < 2 * grid.K + 2:
            raise ConfigurationError(f"need at least {2 * grid.K + 2} samples, got {n}")
        full = np.fft.fft(samples) / n
        m = grid.modes
        return Spectrum1D(grid, full[_fft_index(m, n)] * np.where(m % 2 == 0, 1.0, -1.0))
    ny, nx = samples.shape
    if nx < 2 * grid.K + 2 or ny < 2 * grid.L + 2:
        raise ConfigurationError(f"need at least ({2 * grid.L + 2}, {2 * grid.K + 2}) samples, got ({ny}, {nx})")
    full = np.fft.fft2(samples) / (nx * ny)
    k, l = grid.mesh()
    sign = np.where((k + l) % 2 == 0, 1.0, -1.0)
    return Spectrum2D(grid, full[_fft_index(l, ny), _fft_index(k, nx)] * sign)


# --------------------------------------------------------------------------
# norms


def l2_norm(u):
    weight = TWO_PI if isinstance(u, Spectrum1D) else TWO_PI ** 2
    return float(np.sqrt(weight * np.sum(np.abs(u.coeffs) ** 2)))


def hminus1_norm(u):
    if isinstance(u, Spectrum1D):
        w = 1.0 + u.modes.astype(float) ** 2
        return float(np.sqrt(TWO_PI * np.sum(np.abs(u.coeffs) ** 2 / w)))
    k, l = u.grid.mesh()
    w = 1.0 + k.astype(float) ** 2 + l.astype(float) ** 2
    return float(np.sqrt(TWO_PI ** 2 * np.sum(np.abs(u.coeffs) ** 2 / w)))


def norm(u, kind="L2"):
    if kind == "L2":
        return l2_norm(u)
    if kind == "Hminus1":
        return hminus1_norm(u)
    raise DomainError(f"unknown norm {kind!r}")


# --------------------------------------------------------------------------
# bicharacteristic flows of the P and Q symbols (cutoff identically 1)


@dataclass(frozen=True)
class RayState:
    x: float
    xi: float
    epsilon: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        object.__setattr__(self, "x", wrap_angle(self.x))


def wrap_angle(x):
    """Reduce to ``[-pi, pi)``."""
    r = math.fmod(x + math.pi, 2 * math.pi)
    if r < 0:
        r += 2 * math.pi
    out = r - math.pi
    return -math.pi if out >= math.pi else out


def ray_speed(xi, epsilon, branch):
    if xi == 0:
        raise DomainError("ray flow is singular at xi = 0")
    e4 = epsilon ** 4
    if branch == "P":
        return e4 / xi ** 2 + 3.0 * xi ** 2
    if branch == "Q":
        return 1.0 / xi ** 2 + 3.0 * e4 * xi ** 2
    raise DomainError(f"branch must be 'P' or 'Q', got {branch!r}")


def ray_flow(s, t, branch):
    """Transport ``x`` backwards at the group speed of the chosen symbol; ``xi`` is frozen."""
    v = ray_speed(s.xi, s.epsilon, branch)
    return RayState(s.x - v * t, s.xi, s.epsilon)


# --------------------------------------------------------------------------
# serialization


def spectrum_to_json(u):
    grid = u.grid
    if isinstance(grid, ModeGrid2D):
        g = {"K": grid.K, "L": grid.L, "include_zero": False}
    else:
        g = {"K": grid.K, "L": 0, "include_zero": grid.include_zero}
    flat = u.coeffs.ravel()
    return {"grid": g, "dim": 2 if isinstance(grid, ModeGrid2D) else 1,
            "coeffs": [[float(z.real), float(z.imag)] for z in flat]}


def spectrum_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    g = obj["grid"]
    c = np.array([complex(re, im) for re, im in obj["coeffs"]])
    if obj.get("dim", 2) == 2:
        grid = ModeGrid2D(int(g["K"]), int(g["L"]))
        return Spectrum2D(grid, c.reshape(grid.shape))
    grid = ModeGrid1D(int(g["K"]), bool(g.get("include_zero", False)))
    return Spectrum1D(grid, c)


def samples_to_csv(samples, path_or_buffer=None):
    """CSV ``x,y,re,im`` of 2D physical samples (``(ny, nx)`` array)."""
    samples = np.asarray(samples)
    ny, nx = samples.shape
    x, y = sample_points(nx), sample_points(ny)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "re", "im"])
    for j in range(ny):
        for i in range(nx):
            z = samples[j, i]
            w.writerow([repr(float(x[i])), repr(float(y[j])), repr(float(z.real)), repr(float(z.imag))])
    text = buf.getvalue()
    if path_or_buffer is None:
        return text
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        with open(path_or_buffer, "w", newline="") as fh:
            fh.write(text)
    return text


__all__ = [
    "ModeGrid1D", "ModeGrid2D", "Spectrum1D", "Spectrum2D", "Dispersion", "RayState",
    "nonzero_modes", "random_spectrum", "dispersion", "frequencies", "propagate_linear",
    "sample_points", "to_physical", "from_physical", "l2_norm", "hminus1_norm", "norm",
    "wrap_angle", "ray_speed", "ray_flow", "spectrum_to_json", "spectrum_from_json",
    "samples_to_csv",
]
