import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pauli_crystals.analysis.histogram import histogram, mollweide_edges
from pauli_crystals.analysis.mollweide import (angles_to_unit, mollweide_inverse, mollweide_project,
                                               unit_to_angles, wrap_angle)
from pauli_crystals.sampler import uniform_sphere_point


def test_center_and_poles():
    assert mollweide_project(math.pi / 2, 0.0) == pytest.approx((0.0, 0.0), abs=1e-15)
    for phi in (-2.0, 0.0, 1.0):
        assert mollweide_project(0.0, phi) == pytest.approx((0.0, math.sqrt(2)), abs=1e-12)
        assert mollweide_project(math.pi, phi) == pytest.approx((0.0, -math.sqrt(2)), abs=1e-12)


def test_equator_edge_reaches_ellipse_end():
    x, y = mollweide_project(math.pi / 2, math.pi)
    assert x == pytest.approx(2 * math.sqrt(2)) and y == pytest.approx(0.0, abs=1e-15)


@given(st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_auxiliary_equation_holds(theta, phi):
    x, y = mollweide_project(theta, phi)
    psi = math.asin(max(-1.0, min(1.0, y / math.sqrt(2))))
    assert 2 * psi + math.sin(2 * psi) == pytest.approx(math.pi * math.cos(theta), abs=1e-10)


def test_round_trip_random_points():
    rng = np.random.default_rng(0)
    theta = np.arccos(rng.uniform(-1, 1, 10_000))
    phi = rng.uniform(-np.pi, np.pi, 10_000)
    # stay off the poles, where azimuth is undefined
    keep = np.sin(theta) > 1e-6
    th2, ph2 = mollweide_inverse(*mollweide_project(theta[keep], phi[keep]))
    np.testing.assert_allclose(th2, theta[keep], atol=1e-9)
    np.testing.assert_allclose(wrap_angle(ph2 - phi[keep]), 0.0, atol=1e-9)


def test_wrap_angle_range():
    a = wrap_angle(np.array([-np.pi, np.pi, 3 * np.pi, -3.5 * np.pi, 0.1]))
    np.testing.assert_allclose(a, [np.pi, np.pi, np.pi, 0.5 * np.pi, 0.1])


@given(st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_unit_vector_angle_round_trip(theta, phi):
    v = angles_to_unit(theta, phi)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-15)
    w = angles_to_unit(*unit_to_angles(v))
    np.testing.assert_allclose(w, v, atol=1e-12)


def test_equal_area_cells_receive_equal_mass():
    pts = uniform_sphere_point(np.random.default_rng(1), 1_000_000)
    edges = mollweide_edges(24, 12)
    grid = histogram(pts, edges, "mollweide")
    xe, ye = edges
    cx, cy = np.meshgrid(xe, ye, indexing="ij")
    corner_in = (cx / 2) ** 2 + cy**2 <= 2.0
    inside = corner_in[:-1, :-1] & corner_in[1:, :-1] & corner_in[:-1, 1:] & corner_in[1:, 1:]
    area = np.diff(xe)[0] * np.diff(ye)[0]
    p = area / (4 * np.pi)
    n = len(pts)
    z = (grid.counts[inside] - n * p) / np.sqrt(n * p * (1 - p))
    assert inside.sum() > 100
    assert np.abs(z).max() < 4.0
    assert grid.out_of_range == 0
