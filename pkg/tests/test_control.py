import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import jv

from kplab.control import (BumpProfile, _fft_coeffs, apply_control_1d, apply_control_op, commutator_scaling,
                           control_matrix, loglog_slope, make_bump, make_twin_bump, smoothstep_cutoff,
                           vanishes_on)
from kplab.errors import ConfigurationError
from kplab.spectral import ModeGrid1D, ModeGrid2D, from_physical, random_spectrum, sample_points, to_physical

TWO_PI = 2 * math.pi


def bump_coeff_closed_form(a, b, m):
    """Independent oracle: ghat(m) from the Bessel form of int (1-s^2)^3 e^{i theta s} ds."""
    theta = m * (b - a) / 2
    if theta == 0:
        inner = 32 / 35
    else:
        inner = math.sqrt(math.pi) * 6 * (2 / abs(theta)) ** 3.5 * jv(3.5, abs(theta))
    mid = (a + b) / 2
    return (35 / 32) * inner * np.exp(-1j * m * mid) / TWO_PI


intervals = st.tuples(st.floats(-math.pi, math.pi - 0.2), st.floats(0.2, 2 * math.pi)).map(
    lambda p: (p[0], min(math.pi, p[0] + p[1])))


# the profile

def test_centred_bump_mean_and_reality():
    b = make_bump(-math.pi / 2, math.pi / 2, 6)
    assert abs(b.coeff(0) - 1 / TWO_PI) <= 1e-10
    assert abs(b.coeff(0) - 0.1591549) <= 1e-7
    assert np.max(np.abs(b.coeffs.imag)) <= 1e-14


def test_coefficients_bounded_by_mean():
    b = make_bump(0.0, 1.0, 10)
    assert np.all(np.abs(b.coeffs) <= 1 / TWO_PI + 1e-12)


@pytest.mark.parametrize("a,b", [(-1.0, 1.0), (-math.pi / 2, math.pi / 2), (0.0, 1.0), (-3.0, 2.5)])
def test_coefficients_match_bessel_oracle(a, b):
    bump = make_bump(a, b, 8)
    for m in range(-bump.M, bump.M + 1):
        assert abs(bump.coeff(m) - bump_coeff_closed_form(a, b, m)) <= 1e-12


def test_refinement_oracle():
    bump = make_bump(-1.0, 1.0, 4)
    coarse = _fft_coeffs(bump, 1, bump.n_quad)[2]
    fine = _fft_coeffs(bump, 1, 2 * bump.n_quad)[2]
    assert abs(coarse - fine) <= 1e-10
    assert abs(bump.coeff(1) - fine) <= 1e-10


@given(ab=intervals)
def test_profile_invariants(ab):
    a, b = ab
    bump = make_bump(a, b, 4)
    x = np.linspace(-math.pi, math.pi, 2001)
    g = bump(x)
    assert np.all(g >= 0)
    assert np.all(g[(x < a) | (x > b)] == 0)
    assert abs(bump.coeff(0) * TWO_PI - 1) <= 1e-10
    m = np.arange(-bump.M, bump.M + 1)
    centred = bump.coeffs * np.exp(1j * m * (a + b) / 2)
    assert np.max(np.abs(centred.imag)) <= 1e-12


def test_profile_is_c2_at_endpoints():
    # g'' vanishes linearly at the endpoints (about 52.5 |x - e| from inside)
    bump = make_bump(-1.0, 1.0, 4)
    d = 1e-5
    for e in (-1.0, 1.0):
        for off in (1e-3, 1e-2):
            for x0 in (e - off, e + off):
                second = (bump(x0 + d) - 2 * bump(x0) + bump(x0 - d)) / d ** 2
                assert abs(second) <= 60 * off


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.0, 0.5), (-4.0, 0.0), (0.0, 3.5)])
def test_make_bump_rejects_bad_intervals(a, b):
    with pytest.raises(ConfigurationError):
        make_bump(a, b, 4)


def test_bandwidth_is_checked():
    with pytest.raises(ConfigurationError):
        make_bump(-1, 1, 2).coeff(6)


def test_with_bandwidth_consistent():
    b = make_bump(-1.0, 1.5, 4)
    wide = b.with_bandwidth(20)
    assert np.max(np.abs(wide.coeffs[wide.M - b.M:wide.M + b.M + 1] - b.coeffs)) <= 1e-13
    assert np.array_equal(wide.with_bandwidth(3).coeffs, wide.coeffs[17:24])


def test_twin_bump():
    tb = make_twin_bump(1.0, 8)
    assert vanishes_on(tb, -1.0, 1.0)
    assert not vanishes_on(make_bump(-0.5, 0.5, 2), -1.0, 1.0)
    assert abs(tb.coeff(0) * TWO_PI - 1) <= 1e-10
    assert np.max(np.abs(tb.coeffs.imag)) <= 1e-14


def test_to_json_fields():
    obj = make_bump(-1.0, 1.0, 1).to_json()
    assert set(obj) >= {"a", "b", "coeffs"} and len(obj["coeffs"]) == 7


# physical operators

def test_vertical_kills_y_only_fields(rng):
    bump = make_bump(-1.0, 0.7, 4)
    h = np.tile(rng.standard_normal(12)[:, None], (1, 40))
    assert np.max(np.abs(apply_control_op(bump, "vertical", h))) <= 1e-10


def test_horizontal_kills_x_only_fields(rng):
    bump = make_bump(-1.0, 0.7, 4)
    h = np.tile(rng.standard_normal(40)[None, :], (12, 1))
    assert np.max(np.abs(apply_control_op(bump, "horizontal", h))) <= 1e-10


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_vertical_zero_x_mean_and_horizontal_identity(seed):
    rng = np.random.default_rng(seed)
    bump = make_bump(-1.2, 0.4, 4)
    h = rng.standard_normal((24, 32)) + 1j * rng.standard_normal((24, 32))
    v = apply_control_op(bump, "vertical", h)
    assert np.max(np.abs(v.sum(axis=1))) * TWO_PI / 32 <= 1e-10
    # horizontal: int g(y)(h - int g h dy') dy vanishes for every x
    hz = apply_control_op(bump, "horizontal", h)
    assert np.max(np.abs(hz.sum(axis=0))) * TWO_PI / 24 <= 1e-10


def test_control_of_profile_itself():
    bump = make_bump(-1.0, 1.0, 4)
    n = 4096
    x = sample_points(n)
    g = bump(x)
    out = apply_control_1d(bump, g)
    # independent quadrature of int g^2 on a finer grid
    xf = np.linspace(-1, 1, 200001)
    s = (1 - xf ** 2) ** 3 * (35 / 32)
    g2 = np.trapezoid(s * s, xf)
    assert np.max(np.abs(out - g * (g - g2))) <= 1e-9


def test_orientation_and_grid_checks(rng):
    bump = make_bump(-1.0, 1.0, 4)
    with pytest.raises(ConfigurationError):
        apply_control_op(bump, "diagonal", np.zeros((4, 4)))
    with pytest.raises(ConfigurationError):
        apply_control_op(bump, "vertical", np.zeros((10, 6)), grid=ModeGrid2D(3, 2))


# Fourier matrix

def test_matrix_entry_example():
    bump = make_bump(-math.pi / 2, math.pi / 2, 3)
    M = control_matrix(bump, 3)
    i = int(np.searchsorted(M.modes, 1))
    g0, g1 = bump.coeff(0), bump.coeff(1)
    assert M.matrix[i, i] == pytest.approx(g0 - TWO_PI * g1 * g1, abs=1e-15)


def test_matrix_needs_bandwidth():
    with pytest.raises(ConfigurationError):
        control_matrix(make_bump(-1, 1, 2), 4)


@pytest.mark.parametrize("a,b", [(-math.pi / 2, math.pi / 2), (0.3, 2.1)])
def test_matrix_matches_physical_operator(rng, a, b):
    K = 8
    bump = make_bump(a, b, K)
    M = control_matrix(bump, K)
    g1 = ModeGrid1D(K)
    for i in range(50):
        h = random_spectrum(g1, rng, real=(i % 2 == 0))
        out = apply_control_1d(bump, to_physical(h, 4096))
        ref = M.apply(h.coeffs)
        err = np.linalg.norm(from_physical(out, g1).coeffs - ref) / np.linalg.norm(ref)
        assert err <= 1e-8


def test_gram_hermitian_and_norm_ceiling():
    bump = make_bump(-1.0, 1.0, 4)
    M = control_matrix(bump, 4)
    G = M.gram()
    assert np.array_equal(G, G.conj().T)
    assert M.opnorm() <= (2 * 4 + 1) * np.max(np.abs(bump.coeffs))


def test_matrix_csv():
    M = control_matrix(make_bump(-1, 1, 1), 1)
    lines = M.to_csv().strip().splitlines()
    assert lines[0] == "k,k1,re,im" and len(lines) == 5


# commutator

def test_commutator_trivial_cases():
    bump = make_bump(-1.0, 1.0, 8)
    flat = commutator_scaling(bump, [0.25, 0.125], chi=lambda xi: np.full_like(xi, 0.3))
    assert all(v <= 1e-14 for _, v in flat)
    const = commutator_scaling(BumpProfile.constant(0.2, 3), [0.25, 0.125])
    assert all(v <= 1e-14 for _, v in const)


def test_commutator_halves_with_h():
    bump = make_bump(-math.pi / 2, math.pi / 2, 8)
    rows = commutator_scaling(bump, [2.0 ** -k for k in range(3, 8)])
    vals = [v for _, v in rows]
    for big, small in zip(vals, vals[1:]):
        assert 2 / 1.5 <= big / small <= 2 * 1.5
    assert 0.8 <= loglog_slope([h for h, _ in rows], vals) <= 1.2


def test_cutoff_shape():
    xi = np.array([0.0, 1.0, 1.5, 2.0, -3.0])
    assert np.allclose(smoothstep_cutoff(xi), [0.0, 0.0, 0.5, 1.0, 1.0])


def test_constant_column_vanishes():
    # the k1 = 0 column, absent from the state space, is ghat(k) - 2 pi ghat(k) ghat(0) = 0
    bump = make_bump(-0.8, 1.9, 5)
    k = np.arange(-5, 6)
    col = bump.coeff(k) - TWO_PI * bump.coeff(k) * bump.coeff(0)
    assert np.max(np.abs(col)) <= 1e-14
