"""Gaussian wave packets and the vanishing observability quotient of a horizontal strip.

A packet concentrated at frequency ``n`` along ``x`` and at semiclassical scale
``h = 1/n`` in ``y`` solves the linearised equation exactly as
``exp(i x / h) exp(i t / h^3) v(t, y)``, with ``v`` a 1D Schrodinger solution.
Its ``y``-frequencies are capped by ``B n``, so ``v`` travels at speed at most
``2B`` and stays away from ``|y| > alpha`` up to time ``T`` when ``2BT < alpha``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import polygamma

from .control import BumpProfile, apply_control_1d, make_twin_bump, vanishes_on
from .errors import ConfigurationError
from .hum import simpson_weights
from .spectral import (TWO_PI, Dispersion, ModeGrid1D, ModeGrid2D, Spectrum1D, Spectrum2D,
                       propagate_linear, sample_points)

# int_R |G'| for G(z) = exp(-z^2 / 2)
G_PRIME_L1 = 2.0
_Z_CAP = 40.0
_GL_NODES = 20


def gaussian_coeff(eps, k):
    """``(sqrt(eps) / 2 pi) int_{-pi/eps}^{pi/eps} exp(-z^2/2) cos(eps k z) dz``.

    Composite Gauss-Legendre on ``|z| <= min(pi/eps, 40)``; the Gaussian is
    below 1e-300 past 40. ``k`` may be an integer or an array.
    """
    if not 0 < eps <= 1:
        raise ConfigurationError(f"eps must lie in (0, 1], got {eps}")
    k = np.asarray(k, dtype=float)
    Z = min(math.pi / eps, _Z_CAP)
    freq = eps * float(np.max(np.abs(k), initial=0.0))
    panels = max(64, int(math.ceil(freq * Z)))
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    edges = np.linspace(-Z, Z, panels + 1)
    half = 0.5 * np.diff(edges)
    z = ((edges[:-1] + edges[1:]) * 0.5)[:, None] + half[:, None] * x[None, :]
    wz = (half[:, None] * w[None, :]).ravel()
    z = z.ravel()
    vals = np.cos(eps * np.multiply.outer(k, z)) @ (wz * np.exp(-0.5 * z * z))
    out = math.sqrt(eps) / TWO_PI * vals
    return float(out) if out.ndim == 0 else out


def gaussian_l2(eps):
    """``||G^eps||_{L2(T)}`` with ``G^eps(x) = eps^{-1/2} G(x / eps)`` on ``[-pi, pi]``."""
    return math.sqrt(math.sqrt(math.pi) * math.erf(math.pi / eps))


def plateau_cutoff(xi, b_small, B):
    """Even C^2 cutoff: 1 on ``|xi| <= b_small``, 0 on ``|xi| >= B``, quintic smoothstep between."""
    s = np.clip((np.abs(np.asarray(xi, dtype=float)) - b_small) / (B - b_small), 0.0, 1.0)
    return np.clip(1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class WavePacket:
    """Truncated Gaussian packet ``sum_k g^eps(k) psi(h k) e^{i k y}``."""

    n: int
    h: float
    eps: float
    B: float
    b_small: float
    K_pkt: int
    coeffs: np.ndarray
    offband_mass: float
    offband_bound: float

    @property
    def grid(self):
        return ModeGrid1D(self.K_pkt, include_zero=True)

    @property
    def spectrum(self):
        return Spectrum1D(self.grid, self.coeffs)

    def coeff(self, l):
        l = np.asarray(l)
        inside = np.abs(l) <= self.K_pkt
        return np.where(inside, self.coeffs[np.clip(l + self.K_pkt, 0, 2 * self.K_pkt)], 0.0)

    def mass(self):
        return float(np.sqrt(TWO_PI * np.sum(np.abs(self.coeffs) ** 2)))


def offband_bound(eps, b_small, h):
    """Upper bound for ``sum_{|k| > b_small/h} |g^eps(k)|^2`` from integrating by parts once."""
    m = math.floor(b_small / h) + 1
    tail = 2.0 * float(polygamma(1, m))
    return G_PRIME_L1 ** 2 / (4.0 * math.pi ** 2 * eps) * tail


def build_packet(n, B, b_small, K_pkt=None):
    """Packet with ``h = 1/n`` and ``eps = sqrt(h)``; ``K_pkt`` defaults to ``ceil(B n)``."""
    if int(n) != n or n < 2:
        raise ConfigurationError(f"n must be an integer >= 2, got {n}")
    if not 0 < b_small < B:
        raise ConfigurationError(f"need 0 < b_small < B, got b_small={b_small}, B={B}")
    n = int(n)
    need = int(math.ceil(B * n))
    K_pkt = need if K_pkt is None else int(K_pkt)
    if K_pkt < B * n:
        raise ConfigurationError(f"K_pkt={K_pkt} cannot hold the cutoff support |k| <= {B * n}")
    h = 1.0 / n
    eps = math.sqrt(h)
    k = np.arange(-K_pkt, K_pkt + 1)
    coeffs = gaussian_coeff(eps, k) * plateau_cutoff(h * k, b_small, B)
    # off-band mass of the untruncated Gaussian coefficients
    lo = math.floor(b_small / h) + 1
    hi = max(lo + 1, int(math.ceil(_Z_CAP * 2 / eps)) + lo)
    kk = np.arange(lo, hi)
    off = 2.0 * float(np.sum(gaussian_coeff(eps, kk) ** 2))
    return WavePacket(n, h, eps, float(B), float(b_small), K_pkt, coeffs.astype(complex),
                      off, offband_bound(eps, b_small, h))


def schrodinger_evolve(p, t):
    return propagate_linear(p.spectrum, t, Dispersion.schrodinger(p.h))


def lift_packet(p, K, L):
    """2D field with the packet on column ``k = n``: ``uhat(n, l) = p.coeff(l)``."""
    if p.n > K:
        raise ConfigurationError(f"packet column n={p.n} exceeds K={K}")
    if p.K_pkt > L:
        raise ConfigurationError(f"packet needs |l| <= {p.K_pkt}, grid has L={L}")
    grid = ModeGrid2D(K, L)
    c = np.zeros(grid.shape, dtype=complex)
    col = int(np.searchsorted(grid.k_modes, p.n))
    c[:, col] = p.coeff(grid.l_modes)
    return Spectrum2D(grid, c)


def lift_phase(p, t):
    """Global phase ``exp(i t / h^3)`` relating the lifted flow to the Schrodinger flow."""
    return np.exp(1j * t * p.n ** 3)


# --------------------------------------------------------------------------
# observability quotient


def _profile_samples(p, t, ny, with_phase):
    y = sample_points(ny)
    c = schrodinger_evolve(p, t).coeffs
    l = np.arange(-p.K_pkt, p.K_pkt + 1)
    v = np.exp(1j * np.multiply.outer(y, l)) @ c
    return v * lift_phase(p, t) if with_phase else v


def _x_factor_vertical(bump, n, nx):
    """``int |g(x)(e^{inx} - int g e^{inx'})|^2 dx`` by the trapezoid rule."""
    x = sample_points(nx)
    out = apply_control_1d(bump, np.exp(1j * n * x))
    return TWO_PI / nx * float(np.sum(np.abs(out) ** 2))


@dataclass(frozen=True)
class QuotientRow:
    n: int
    h: float
    eps: float
    mass: float
    Q: float
    Q_refined: float
    Q_vertical: float
    sup_omega: float


def observability_quotient(n_list, T, alpha, bump=None, *, B=None, b_small=None,
                           per_unit=128, ny=1024, with_phase=True):
    """``Q_n = int_0^T ||G u_n||^2 dt / ||u_n(0)||^2`` for the lifted packets.

    The lifted field is ``e^{inx} v(t, y)`` and ``G`` acts along ``y`` only, so
    ``||G u||^2 = 2 pi ||G_y v||^2``; the ``2 pi`` cancels against the mass. The
    vertical contrast applies the same profile along ``x`` instead, which
    factorises as ``||v||^2 times`` a fixed ``x``-integral.
    """
    if not 0 < alpha < math.pi:
        raise ConfigurationError(f"alpha must lie in (0, pi), got {alpha}")
    B = 0.45 * alpha / T if B is None else float(B)
    b_small = 0.8 * B if b_small is None else float(b_small)
    if bump is None:
        bump = make_twin_bump(alpha, 8)
    if not vanishes_on(bump, -alpha, alpha):
        raise ConfigurationError("bump must vanish on [-alpha, alpha]")
    ny = max(int(ny), 1024)
    y = sample_points(ny)
    outside = np.abs(y) > alpha
    rows = []
    for n in n_list:
        p = build_packet(n, B, b_small)
        if 2 * p.K_pkt + 2 > ny:
            raise ConfigurationError(f"ny={ny} too coarse for packet bandwidth {p.K_pkt}")
        mass2 = p.mass() ** 2
        q = []
        for density in (per_unit, 2 * per_unit):
            nt = max(2, int(math.ceil(density * T)))
            nt += nt % 2
            ts = np.linspace(0.0, T, nt + 1)
            vals = np.empty(ts.size)
            for j, t in enumerate(ts):
                v = _profile_samples(p, t, ny, with_phase)
                vals[j] = TWO_PI / ny * float(np.sum(np.abs(apply_control_1d(bump, v)) ** 2))
            q.append(float(simpson_weights(nt, T) @ vals) / mass2)
        # ||v(t)||^2 is conserved, so the vertical quotient is T times the x-factor
        xf = _x_factor_vertical(bump, p.n, max(ny, 8 * p.n))
        sup = float(np.max(np.abs(_profile_samples(p, T, ny, with_phase)[outside])))
        rows.append(QuotientRow(p.n, p.h, p.eps, p.mass(), q[0], q[1], T * xf / TWO_PI, sup))
    return rows


def vertical_quotient_direct(p, T, bump, nx=512, per_unit=64):
    """Vertical quotient by brute-force time quadrature (cross-check of the factorised form)."""
    nt = max(2, int(math.ceil(per_unit * T)))
    nt += nt % 2
    ts = np.linspace(0.0, T, nt + 1)
    x = sample_points(nx)
    ex = np.exp(1j * p.n * x)
    vals = np.empty(ts.size)
    ny = 2 * p.K_pkt + 2
    for j, t in enumerate(ts):
        v = _profile_samples(p, t, max(ny, 64), True)
        field = np.outer(v, ex)
        out = apply_control_1d(bump, field)
        vals[j] = (TWO_PI / nx) * (TWO_PI / v.size) * float(np.sum(np.abs(out) ** 2))
    return float(simpson_weights(nt, T) @ vals) / (TWO_PI * p.mass() ** 2)


def quotient_slope(rows):
    """Fitted exponent ``q`` in ``Q_n ~ h^q``."""
    h = np.array([r.h for r in rows])
    Q = np.array([r.Q for r in rows])
    return float(np.polyfit(np.log(h), np.log(Q), 1)[0])


def sup_slope(rows):
    """Fitted exponent ``s`` in ``sup_omega |v(T)| ~ eps^s``."""
    e = np.array([r.eps for r in rows])
    s = np.array([r.sup_omega for r in rows])
    return float(np.polyfit(np.log(e), np.log(s), 1)[0])


# --------------------------------------------------------------------------
# normalisation term


def normalization_term(p, bump, t):
    """``|int g(y) v(t, y) dy|`` evaluated in Fourier: ``2 pi |sum conj(ghat(k)) vhat(k)|``."""
    prof = bump.with_bandwidth(p.K_pkt)
    c = schrodinger_evolve(p, t).coeffs
    return float(abs(TWO_PI * np.vdot(prof.coeffs, c)))


def _profile_l2_sq(bump, n=1 << 16):
    g = bump(sample_points(n))
    return TWO_PI / n * float(np.sum(g * g))


def normalization_bound(p, bump, M):
    """``sqrt(eps) ||g|| sqrt(2M+1) + sqrt(2 pi) ||G^eps|| (sum_{|k|>M} |ghat(k)|^2)^{1/2}``.

    The first term bounds modes ``|k| <= M`` through ``sup |g^eps| <= sqrt(eps / 2 pi)``,
    the second the rest by Cauchy-Schwarz.
    """
    g2 = _profile_l2_sq(bump)
    head = bump.with_bandwidth(M)
    tail2 = max(g2 / TWO_PI - float(np.sum(np.abs(head.coeffs) ** 2)), 0.0)
    return (math.sqrt(p.eps) * math.sqrt(g2) * math.sqrt(2 * M + 1)
            + math.sqrt(TWO_PI) * gaussian_l2(p.eps) * math.sqrt(tail2))


def quotient_csv(rows, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "h", "eps", "mass", "Q", "sup_omega"])
    for r in rows:
        w.writerow([r.n, repr(r.h), repr(r.eps), repr(r.mass), repr(r.Q), repr(r.sup_omega)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


__all__ = [
    "gaussian_coeff", "gaussian_l2", "plateau_cutoff", "WavePacket", "build_packet",
    "schrodinger_evolve", "lift_packet", "lift_phase", "observability_quotient",
    "QuotientRow", "quotient_slope", "sup_slope", "normalization_term",
    "normalization_bound", "offband_bound", "vertical_quotient_direct", "quotient_csv",
    "BumpProfile",
]
