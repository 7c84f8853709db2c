"""Observability experiments: lambda scans, Ingham constants, gaps and transit times."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .control import control_matrix
from .errors import DomainError
from .hum import gramian_block, hermitian_eig, simpson_weights
from .spectral import Dispersion, ModeGrid1D, frequencies


@dataclass(frozen=True)
class ScanRow:
    lam: float
    min_eig: float
    condition: float
    gap: float


@dataclass(frozen=True)
class InghamReport:
    freqs: tuple
    T: float
    gamma: float
    C1: float
    C2: float


def gap(freqs):
    """Smallest difference between consecutive sorted frequencies.

    >>> gap([1, 8, 27])
    7.0
    """
    f = np.sort(np.asarray(freqs, dtype=float))
    if f.size < 2:
        raise DomainError("gap needs at least two frequencies")
    return float(np.min(np.diff(f)))


def lambda_frequencies(lam, K):
    return frequencies(ModeGrid1D(K), Dispersion.lambda1d(lam))


def weak_weight(K):
    """Diagonal of the discretised H^-1 remainder, ``1 / (1 + k^2)``."""
    k = ModeGrid1D(K).modes.astype(float)
    return 1.0 / (1.0 + k * k)


def lambda_scan(bump, K, T, lambdas, weak_kappa=None):
    """One row per ``lambda``: smallest Gramian eigenvalue, condition number and gap.

    With ``weak_kappa`` the eigen-data are those of ``Lambda + kappa W``.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise DomainError("lambda list is empty")
    if any(x < 0 for x in lambdas):
        raise DomainError("lambda values must be >= 0")
    M = control_matrix(bump, K)
    rows = []
    for lam in lambdas:
        blk = gramian_block(M, lam, T)
        lo, hi = blk.min_eig, blk.max_eig
        if weak_kappa is not None:
            w, _ = hermitian_eig(blk.matrix + float(weak_kappa) * np.diag(weak_weight(K)))
            lo, hi = float(w[0]), float(w[-1])
        cond = hi / lo if lo > 0 else float("inf")
        rows.append(ScanRow(lam, lo, cond, gap(blk.omega)))
    return rows


def resonant_lambdas(kmax=4):
    """Values ``lambda >= 0`` at which two modes with ``|k|, |k'| <= kmax`` share a frequency.

    ``omega_lam(k) = omega_lam(k')`` with ``k != k'`` forces
    ``lam^2 = -k k' (k^2 + k k' + k'^2)``, which is positive only when ``k k' < 0``.
    """
    out = set()
    for k in range(1, kmax + 1):
        for kp in range(-kmax, 0):
            lam2 = -k * kp * (k * k + k * kp + kp * kp)
            if lam2 > 0:
                out.add(math.sqrt(lam2))
    return sorted(out)


def ingham_estimate(freqs, T):
    """Extremal eigenvalues of the Gram matrix of ``exp(i t f)`` in ``L2(0, T)``."""
    f = np.asarray(freqs, dtype=float)
    if f.size == 0:
        raise DomainError("no frequencies")
    if f.size > 1 and np.min(np.diff(np.sort(f))) == 0.0:
        raise DomainError("frequencies must be distinct")
    # A[j, k] = int_0^T exp(i t (f_j - f_k)) dt: the Gramian kernel with unit weights
    A = kernels.gramian(np.ones((f.size, f.size), dtype=complex), f, float(T))
    w, _ = hermitian_eig(0.5 * (A + A.conj().T))
    gamma = gap(f) if f.size > 1 else float("inf")
    return InghamReport(tuple(float(x) for x in f), float(T), gamma, float(w[0]), float(w[-1]))


def exp_sum_energy(freqs, coeffs, T, tol=1e-12):
    """``int_0^T |sum_k a_k exp(i t f_k)|^2 dt`` by composite Simpson, refined to ``tol``.

    ``coeffs`` may hold one vector per row.
    """
    f = np.asarray(freqs, dtype=float)
    a = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    span = float(np.max(f) - np.min(f)) if f.size > 1 else 0.0
    n = max(64, 2 * int(math.ceil(4 * span * T)))
    prev = None
    while True:
        t = np.linspace(0.0, T, n + 1)
        vals = np.abs(np.exp(1j * np.outer(t, f)) @ a.T) ** 2
        cur = simpson_weights(n, T) @ vals
        if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, float(np.max(cur))):
            return cur
        if n >= 1 << 20:
            return cur
        prev, n = cur, 2 * n


def ingham_sandwich(report, coeffs):
    """Worst violations of ``C1 |a|^2 <= energy`` and ``energy <= C2 |a|^2``.

    Each entry is ``max(lower - energy)`` or ``max(energy - upper)``; values
    ``<= 0`` mean the inequality held for every vector.
    """
    a = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    mass = np.sum(np.abs(a) ** 2, axis=1)
    energy = exp_sum_energy(report.freqs, a, report.T)
    return float(np.max(report.C1 * mass - energy)), float(np.max(energy - report.C2 * mass))


def group_speed_min(lam, K):
    k = np.arange(1, K + 1, dtype=float)
    return float(np.min(3.0 * k * k + lam * lam / (k * k)))


def transit_report(a, b, lambdas, K):
    """Rows ``(lambda, v_min, t_max)``; ``t_max`` is the worst-case strip entry time."""
    if not (-np.pi <= a < b <= np.pi):
        raise DomainError(f"need -pi <= a < b <= pi, got a={a}, b={b}")
    dist = 2.0 * np.pi - (b - a)
    rows = []
    for lam in lambdas:
        v = group_speed_min(float(lam), K)
        rows.append((float(lam), v, dist / v))
    return rows


# --------------------------------------------------------------------------
# CSV


def _write_rows(header, rows, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) for x in r])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def scan_csv(rows, path=None):
    return _write_rows(["lambda", "min_eig", "condition", "gap"],
                       [(r.lam, r.min_eig, r.condition, r.gap) for r in rows], path)


def ingham_csv(reports, path=None):
    return _write_rows(["gamma", "T", "C1", "C2"], [(r.gamma, r.T, r.C1, r.C2) for r in reports], path)


def transit_csv(rows, path=None):
    return _write_rows(["lambda", "v_min", "t_max"], rows, path)
