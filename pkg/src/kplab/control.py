"""Localisation profile ``g`` and the strip control operators.

For a vertical strip the control input is ``g(x) (h - int g(x') h(x', y) dx')``,
for a horizontal strip the same with the roles of ``x`` and ``y`` swapped. Both
subtract a ``g``-weighted mean so the input keeps zero mean along the
localised direction.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .spectral import TWO_PI, nonzero_modes, sample_points

# int_{-1}^{1} (1 - s^2)^3 ds
_BUMP_MASS = 32.0 / 35.0
_REFINE_TOL = 1e-12
_MAX_QUAD = 1 << 20


def _bump_piece(x, a, b):
    s = (2.0 * x - a - b) / (b - a)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    out[inside] = (1.0 - s[inside] ** 2) ** 3
    return out * (2.0 / ((b - a) * _BUMP_MASS))


@dataclass(frozen=True, eq=False)
class BumpProfile:
    """Non-negative C^2 profile with unit integral and its Fourier coefficients.

    ``coeffs[m + M]`` holds ``ghat(m)`` for ``|m| <= M``. ``pieces`` lists the
    ``(a, b, weight)`` polynomial bumps the profile is made of; an empty tuple
    means the profile is defined by its coefficients alone.
    """

    a: float
    b: float
    n_quad: int
    coeffs: np.ndarray
    pieces: tuple = ()

    @property
    def M(self):
        return (len(self.coeffs) - 1) // 2

    def coeff(self, m):
        m = np.asarray(m)
        if np.any(np.abs(m) > self.M):
            raise ConfigurationError(f"bump coefficients only known for |m| <= {self.M}")
        return self.coeffs[m + self.M]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.pieces:
            m = np.arange(-self.M, self.M + 1)
            return np.real(np.exp(1j * np.multiply.outer(x, m)) @ self.coeffs)
        xw = np.mod(x + np.pi, TWO_PI) - np.pi
        out = np.zeros_like(xw)
        for a, b, w in self.pieces:
            out = out + w * _bump_piece(xw, a, b)
        return out

    def with_bandwidth(self, M):
        """Same profile with coefficients for ``|m| <= M``."""
        if M <= self.M:
            return BumpProfile(self.a, self.b, self.n_quad,
                               self.coeffs[self.M - M:self.M + M + 1].copy(), self.pieces)
        if not self.pieces:
            pad = np.zeros(M - self.M, dtype=complex)
            return BumpProfile(self.a, self.b, self.n_quad,
                               np.concatenate([pad, self.coeffs, pad]), self.pieces)
        coeffs, n = _profile_coeffs(self, M, self.n_quad)
        return BumpProfile(self.a, self.b, n, coeffs, self.pieces)

    def l2_norm(self):
        return float(np.sqrt(TWO_PI * np.sum(np.abs(self.coeffs) ** 2)))

    def to_json(self):
        return {"a": self.a, "b": self.b, "n_quad": self.n_quad,
                "pieces": [list(p) for p in self.pieces],
                "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs]}

    @classmethod
    def constant(cls, value, M=0):
        """Constant profile (unnormalised); used to probe commutators."""
        c = np.zeros(2 * M + 1, dtype=complex)
        c[M] = value
        return cls(-np.pi, np.pi, 0, c, ())


def _fft_coeffs(func, M, n):
    x = sample_points(n)
    full = np.fft.fft(func(x)) / n
    m = np.arange(-M, M + 1)
    # x_j starts at -pi: ghat(m) = (1/n) sum g_j exp(-i m x_j) = (-1)^m fft[m]
    return full[np.mod(m, n)] * np.where(m % 2 == 0, 1.0, -1.0)


def _profile_coeffs(profile, M, n_quad):
    n = max(int(n_quad), 4 * M + 4)
    prev = _fft_coeffs(profile, M, n)
    while True:
        cur = _fft_coeffs(profile, M, 2 * n)
        if np.max(np.abs(cur - prev)) <= _REFINE_TOL:
            return cur, 2 * n
        n *= 2
        if n > _MAX_QUAD:
            raise ConfigurationError("bump quadrature did not reach the refinement tolerance")
        prev = cur


def _check_interval(a, b):
    if not (-np.pi <= a < b <= np.pi):
        raise ConfigurationError(f"need -pi <= a < b <= pi, got a={a}, b={b}")


def make_bump(a, b, K, n_quad=4096):
    """Normalised C^2 bump on ``[a, b]`` with coefficients for ``|m| <= 2K + 1``.

    The coefficients come from the periodic trapezoid rule (one FFT), doubled
    until two resolutions agree to 1e-12.
    """
    _check_interval(a, b)
    shell = BumpProfile(float(a), float(b), 0, np.zeros(1, dtype=complex), ((float(a), float(b), 1.0),))
    coeffs, n = _profile_coeffs(shell, 2 * int(K) + 1, n_quad)
    return BumpProfile(float(a), float(b), n, coeffs, shell.pieces)


def make_twin_bump(alpha, K, n_quad=4096):
    """Two mirrored bumps on ``[alpha, pi]`` and ``[-pi, -alpha]``, total integral 1.

    This is the profile of the band complement ``(-pi, -alpha) u (alpha, pi]``.
    """
    if not 0 < alpha < np.pi:
        raise ConfigurationError(f"alpha must lie in (0, pi), got {alpha}")
    pieces = ((float(alpha), float(np.pi), 0.5), (-float(np.pi), -float(alpha), 0.5))
    shell = BumpProfile(float(alpha), float(2 * np.pi - alpha), 0, np.zeros(1, dtype=complex), pieces)
    coeffs, n = _profile_coeffs(shell, 2 * int(K) + 1, n_quad)
    return BumpProfile(shell.a, shell.b, n, coeffs, pieces)


def vanishes_on(bump, lo, hi, n=4001):
    """True if the profile is identically zero on ``[lo, hi]``."""
    if bump.pieces:
        for a, b, _ in bump.pieces:
            if a < hi and b > lo:
                return False
        return True
    return bool(np.max(np.abs(bump(np.linspace(lo, hi, n)))) == 0.0)


# --------------------------------------------------------------------------
# physical-space operators


def apply_control_1d(bump, samples):
    """``g (h - int g h)`` on uniform 1D samples along the last axis.

    The inner integral is the trapezoid rule divided by the trapezoid mass of
    ``g``, so the discrete profile has unit integral exactly and constants are
    annihilated at any resolution.
    """
    samples = np.asarray(samples)
    n = samples.shape[-1]
    g = bump(sample_points(n))
    inner = np.sum(g * samples, axis=-1, keepdims=True) / np.sum(g)
    return g * (samples - inner)


def apply_control_op(bump, orientation, h, grid=None):
    """Apply the vertical (``g(x)``) or horizontal (``g(y)``) control operator.

    ``h`` holds samples of shape ``(ny, nx)``, rows indexed by ``y``.
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise ConfigurationError(f"expected 2D samples, got shape {h.shape}")
    ny, nx = h.shape
    if grid is not None and (nx < 2 * grid.K + 2 or ny < 2 * grid.L + 2):
        raise ConfigurationError(f"samples {h.shape} too coarse for grid K={grid.K}, L={grid.L}")
    if orientation == "vertical":
        return apply_control_1d(bump, h)
    if orientation == "horizontal":
        return apply_control_1d(bump, h.T).T
    raise ConfigurationError(f"orientation must be 'vertical' or 'horizontal', got {orientation!r}")


# --------------------------------------------------------------------------
# Fourier side


@dataclass(frozen=True, eq=False)
class ControlMatrix:
    """Fourier matrix of the vertical control operator on ``1 <= |k| <= K``.

    ``matrix[i, j]`` maps control mode ``k1 = modes[j]`` to state mode
    ``k = modes[i]``.
    """

    K: int
    matrix: np.ndarray

    @property
    def modes(self):
        return nonzero_modes(self.K)

    @property
    def adjoint(self):
        return self.matrix.conj().T

    def gram(self):
        """``M M^*``, Hermitian by construction."""
        A = self.matrix @ self.adjoint
        return 0.5 * (A + A.conj().T)

    def apply(self, coeffs):
        """Apply to a vector, or to every row of a ``(.., 2K)`` array."""
        return np.asarray(coeffs) @ self.matrix.T

    def opnorm(self):
        return float(np.linalg.norm(self.matrix, 2))

    def to_csv(self, path_or_buffer=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "k1", "re", "im"])
        modes = self.modes
        for i, k in enumerate(modes):
            for j, k1 in enumerate(modes):
                z = self.matrix[i, j]
                w.writerow([int(k), int(k1), repr(float(z.real)), repr(float(z.imag))])
        text = buf.getvalue()
        if path_or_buffer is not None:
            with open(path_or_buffer, "w", newline="") as fh:
                fh.write(text)
        return text


def control_matrix(bump, K):
    """``M[k, k1] = ghat(k - k1) - 2 pi ghat(k) ghat(-k1)``.

    The second term is the Fourier image of ``g(x) int g h``; for a profile
    centred at 0 (real ``ghat``) it reads ``2 pi ghat(k) ghat(k1)``.
    """
    if bump.M < 2 * K:
        raise ConfigurationError(f"bump has coefficients up to {bump.M}, need {2 * K}")
    k = nonzero_modes(K)
    toeplitz = bump.coeff(k[:, None] - k[None, :])
    rank_one = TWO_PI * np.outer(bump.coeff(k), bump.coeff(-k))
    return ControlMatrix(int(K), toeplitz - rank_one)


def smoothstep_cutoff(xi):
    """High-pass cutoff: 0 for ``|xi| <= 1``, 1 for ``|xi| >= 2``, cubic smoothstep between."""
    s = np.clip(np.abs(np.asarray(xi, dtype=float)) - 1.0, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _power_norm(C, tol=1e-12, max_iter=20000):
    n = C.shape[1]
    v = np.ones(n, dtype=complex) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = C.conj().T @ (C @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(np.real(np.vdot(v, w)))
        v = w / nw
        if abs(new - est) <= tol * max(new, 1e-300):
            est = new
            break
        est = new
    return math.sqrt(max(est, 0.0))


def commutator_scaling(bump, h_list, chi=smoothstep_cutoff, pad=64):
    """Spectral norm of ``[chi(hD), g]`` for each ``h``, by power iteration.

    The commutator is assembled on ``|k| <= ceil(2/h) + pad``, which contains
    the transition band of ``chi`` plus the effective bandwidth of ``g``.
    """
    rows = []
    for h in h_list:
        Kb = int(math.ceil(2.0 / h)) + pad
        prof = bump.with_bandwidth(2 * Kb)
        k = np.arange(-Kb, Kb + 1)
        C = kernels.commutator_matrix(chi(h * k), prof.coeffs, prof.M)
        rows.append((float(h), _power_norm(C)))
    return rows


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])
