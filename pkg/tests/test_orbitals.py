import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite as H
from scipy.special import lpmv, sph_harm_y

from conftest import basis, geom
from pauli_crystals.orbitals import (Geometry, GeometryKind, assoc_legendre, build_basis,
                                     closed_shell_count, hermite_eval, ho_orbital_eval,
                                     orbital_values, shell_sizes, ylm_eval)


def test_geometry_rejects_nonpositive_scale():
    with pytest.raises(ValueError):
        Geometry(GeometryKind.HARMONIC_2D, 0.0)
    with pytest.raises(ValueError):
        Geometry(GeometryKind.SPHERE, -1.0)


# -- Hermite ---------------------------------------------------------------

@pytest.mark.parametrize("n,x,expected", [(0, 3.7, 1.0), (1, 1.0, 2.0), (3, 0.5, -5.0)])
def test_hermite_examples(n, x, expected):
    assert hermite_eval(n, x) == pytest.approx(expected, abs=1e-14)


def test_hermite_matches_explicit_cubic():
    for x in np.linspace(-2, 2, 9):
        assert hermite_eval(3, x) == pytest.approx(8 * x**3 - 12 * x, abs=1e-12)


@given(st.integers(0, 12), st.floats(-5, 5))
def test_hermite_matches_numpy_series(n, x):
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    ref = H.hermval(x, coef)
    assert hermite_eval(n, x) == pytest.approx(ref, rel=1e-11, abs=1e-9)


@given(st.integers(1, 8), st.floats(-5, 5))
def test_hermite_recurrence_identity(n, x):
    hp, h, hm = hermite_eval(n + 1, x), hermite_eval(n, x), hermite_eval(n - 1, x)
    scale = max(abs(hp), abs(2 * x * h), abs(2 * n * hm), 1.0)
    assert abs(hp - 2 * x * h + 2 * n * hm) <= 1e-10 * scale


def test_hermite_rejects_negative_order():
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)


# -- harmonic orbitals -----------------------------------------------------

def test_ho_ground_state_at_origin():
    assert ho_orbital_eval(geom("1d"), (0,), 0.0) == pytest.approx(math.pi ** -0.25, rel=1e-12)
    assert ho_orbital_eval(geom("1d"), (1,), 0.0) == 0.0


def test_ho_2d_is_product_of_1d():
    g1 = geom("1d")
    expected = ho_orbital_eval(g1, (1,), 0.5) * ho_orbital_eval(g1, (0,), 0.3)
    assert ho_orbital_eval(geom("2d"), (1, 0), (0.5, 0.3)) == pytest.approx(expected, rel=1e-14)


def test_ho_dimension_mismatch():
    with pytest.raises(ValueError):
        ho_orbital_eval(geom("2d"), (1, 0), (0.5, 0.3, 0.1))
    with pytest.raises(ValueError):
        ho_orbital_eval(geom("3d"), (1, 0), (0.5, 0.3, 0.1))


def test_ho_scale_is_a_coordinate_rescaling():
    a = 1.7
    v = ho_orbital_eval(geom("1d", a), (2,), 0.9 * a)
    assert v == pytest.approx(ho_orbital_eval(geom("1d"), (2,), 0.9) / math.sqrt(a), rel=1e-13)


@pytest.mark.parametrize("kind", ["1d", "2d", "3d"])
def test_vectorized_harmonic_values_match_scalar(kind, rng):
    b = basis(kind, 4, scale=1.3)
    pts = rng.normal(size=(7, b.geometry.dim))
    table = orbital_values(b, pts)
    for j, p in enumerate(pts):
        for k, idx in enumerate(b.indices):
            assert table[j, k] == pytest.approx(ho_orbital_eval(b.geometry, idx, p), rel=1e-11, abs=1e-14)


@pytest.mark.parametrize("kind,shells", [("1d", 5), ("2d", 5), ("3d", 4)])
def test_harmonic_orthonormality_gauss_hermite(kind, shells):
    b = basis(kind, shells)
    x, w = H.hermgauss(30)
    d = b.geometry.dim
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    # divide out the Gauss-Hermite weight exp(-|x|^2)
    weights = weights * np.exp((pts**2).sum(-1))
    vals = orbital_values(b, pts)
    gram = (vals * weights[:, None]).T @ vals
    np.testing.assert_allclose(gram, np.eye(b.n), atol=1e-6)


# -- Legendre and spherical harmonics ---------------------------------------

@pytest.mark.parametrize("l,m,u,expected", [(0, 0, 0.3, 1.0), (2, 0, 0.5, -0.125), (1, 1, 0.0, -1.0)])
def test_assoc_legendre_examples(l, m, u, expected):
    assert assoc_legendre(l, m, u) == pytest.approx(expected, abs=1e-14)


@given(st.integers(0, 8).flatmap(lambda l: st.tuples(st.just(l), st.integers(0, l))),
       st.floats(-1, 1))
def test_assoc_legendre_matches_scipy(lm, u):
    l, m = lm
    assert assoc_legendre(l, m, u) == pytest.approx(lpmv(m, l, u), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("l,m,u", [(1, 2, 0.0), (2, -1, 0.0), (2, 0, 1.5)])
def test_assoc_legendre_domain(l, m, u):
    with pytest.raises(ValueError):
        assoc_legendre(l, m, u)


def test_ylm_examples():
    assert ylm_eval(0, 0, 1.1, 2.2) == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-14)
    assert ylm_eval(1, 0, 0.0, 0.0) == pytest.approx(math.sqrt(3 / (4 * math.pi)), rel=1e-14)
    assert ylm_eval(1, 1, math.pi / 2, 0.0) == pytest.approx(-math.sqrt(3 / (8 * math.pi)), rel=1e-14)


def test_ylm_rejects_bad_theta():
    with pytest.raises(ValueError):
        ylm_eval(1, 0, -0.1, 0.0)
    with pytest.raises(ValueError):
        ylm_eval(1, 0, 3.2, 0.0)


lm_pairs = st.integers(0, 7).flatmap(lambda l: st.tuples(st.just(l), st.integers(-l, l)))
angles = st.tuples(st.floats(0, math.pi), st.floats(-math.pi, math.pi))


@given(lm_pairs, angles)
def test_ylm_matches_scipy(lm, ang):
    l, m = lm
    th, ph = ang
    ref = complex(sph_harm_y(l, m, th, ph))
    assert abs(ylm_eval(l, m, th, ph) - ref) < 1e-11


@given(lm_pairs, angles)
def test_ylm_conjugation_symmetry(lm, ang):
    l, m = lm
    th, ph = ang
    lhs = ylm_eval(l, -m, th, ph)
    rhs = (-1) ** m * ylm_eval(l, m, th, ph).conjugate()
    assert abs(lhs - rhs) < 1e-12


@given(lm_pairs, angles)
def test_ylm_parity(lm, ang):
    l, m = lm
    th, ph = ang
    assert abs(ylm_eval(l, m, math.pi - th, ph + math.pi) - (-1) ** l * ylm_eval(l, m, th, ph)) < 1e-12


def test_vectorized_sphere_values_match_scalar(rng):
    b = basis("sphere", 5)
    v = rng.normal(size=(9, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    table = orbital_values(b, v)
    th = np.arccos(np.clip(v[:, 2], -1, 1))
    ph = np.arctan2(v[:, 1], v[:, 0])
    for j in range(len(v)):
        for k, (l, m) in enumerate(b.indices):
            assert abs(table[j, k] - ylm_eval(l, m, th[j], ph[j])) < 1e-11


def test_sphere_orthonormality_legendre_trapezoid():
    b = basis("sphere", 5)
    u, wu = np.polynomial.legendre.leggauss(24)
    nphi = 32
    phi = 2 * np.pi * np.arange(nphi) / nphi
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    s = np.sqrt(1 - uu**2)
    pts = np.stack([s * np.cos(pp), s * np.sin(pp), uu], axis=-1).reshape(-1, 3)
    w = (wu[:, None] * np.full(nphi, 2 * np.pi / nphi)[None, :]).ravel()
    vals = orbital_values(b, pts)
    gram = (vals.conj() * w[:, None]).T @ vals
    np.testing.assert_allclose(gram, np.eye(b.n), atol=1e-6)


# -- shells and bases ------------------------------------------------------

@pytest.mark.parametrize("shells", range(1, 6))
def test_basis_sizes_closed_form(shells):
    k = shells
    expected = {"1d": k, "2d": k * (k + 1) // 2, "3d": k * (k + 1) * (k + 2) // 6, "sphere": k * k}
    for kind, n in expected.items():
        assert build_basis(geom(kind), k).n == n
        assert closed_shell_count(GeometryKind(kind), k) == n


def test_basis_examples():
    assert basis("2d", 3).n == 6
    assert basis("2d", 5).n == 15
    assert basis("3d", 4).n == 20
    assert basis("sphere", 2).indices == ((0, 0), (1, -1), (1, 0), (1, 1))
    assert shell_sizes(GeometryKind.SPHERE, 4) == [1, 3, 5, 7]


@pytest.mark.parametrize("kind", ["1d", "2d", "3d", "sphere"])
def test_basis_contains_exactly_states_below_cutoff(kind):
    b = basis(kind, 4)
    energies = [b.shell_of(i) for i in b.indices]
    assert energies == sorted(energies)
    assert max(energies) == 3
    assert len(set(b.indices)) == b.n
    if kind == "sphere":
        assert all(-l <= m <= l for l, m in b.indices)


def test_build_basis_requires_a_shell():
    with pytest.raises(ValueError):
        build_basis(geom("2d"), 0)
