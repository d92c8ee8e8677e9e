import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import basis, optimized, random_points
from pauli_crystals.analysis.shells import angular_gaps, shell_counts, shell_membership
from pauli_crystals.optimizer import AnnealSchedule, anneal, is_local_max, refine
from pauli_crystals.wavefunction import Configuration, log_prob

X_MAX = 1 / math.sqrt(2)


def test_schedule_validation_and_temperatures():
    with pytest.raises(ValueError):
        AnnealSchedule(t_start=1e-4, t_end=1.0)
    with pytest.raises(ValueError):
        AnnealSchedule(cooling=1.0)
    s = AnnealSchedule()
    t = s.temperatures()
    assert t[0] == 1.0 and t[-1] == pytest.approx(1e-4)
    assert np.all(np.diff(t) <= 0)
    assert AnnealSchedule(n_sweeps=5).temperatures().shape == (5,)


def test_1d_pair_maximum():
    pattern, seconds = optimized("1d", 2)
    np.testing.assert_allclose(np.sort(pattern.points.ravel()), [-X_MAX, X_MAX], atol=1e-3)
    assert seconds < 5.0


def test_2d_triangle():
    pattern, _ = optimized("2d", 2)
    p = pattern.points
    sides = [np.linalg.norm(p[i] - p[j]) for i, j in [(0, 1), (1, 2), (0, 2)]]
    np.testing.assert_allclose(np.array(sides) / np.mean(sides), 1.0, atol=1e-3)
    assert np.linalg.norm(p.mean(axis=0)) < 1e-3


def test_sphere_tetrahedron():
    pattern, _ = optimized("sphere", 2)
    g = pattern.points @ pattern.points.T
    off = g[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, -1 / 3, atol=1e-3)


@pytest.mark.parametrize("kind,shells,expected", [
    ("2d", 3, (1, 5)), ("2d", 4, (3, 7)), ("2d", 5, (1, 5, 9)), ("3d", 3, (1, 9)), ("3d", 4, (4, 16)),
])
def test_geometric_shells(kind, shells, expected):
    pattern, _ = optimized(kind, shells)
    assert shell_counts(pattern.points) == expected


@pytest.mark.parametrize("shells", [3, 4, 5])
def test_outer_2d_shell_is_regular_polygon(shells):
    pattern, _ = optimized("2d", shells)
    outer = pattern.points[shell_membership(pattern.points)[-1]]
    gaps = angular_gaps(outer)
    assert np.abs(gaps - 2 * np.pi / len(outer)).max() < 1e-2


@pytest.mark.parametrize("kind,shells", [("1d", 2), ("2d", 2), ("2d", 3), ("2d", 4), ("sphere", 2)])
def test_pattern_is_local_maximum(kind, shells):
    pattern, _ = optimized(kind, shells)
    assert is_local_max(basis(kind, shells), pattern.config, h=1e-4, slack=1e-8)


@pytest.mark.parametrize("kind,shells", [("1d", 2), ("2d", 2), ("2d", 3), ("2d", 4), ("2d", 5),
                                         ("3d", 3), ("sphere", 2)])
def test_global_maximum_reproduced_by_restarts(kind, shells):
    pattern, _ = optimized(kind, shells)
    assert pattern.restarts_at_best(1e-6) >= 0.25 * len(pattern.restart_log_probs)


def test_anneal_is_deterministic():
    b = basis("2d", 2)
    s = AnnealSchedule(restarts=4, n_sweeps=20, seed=3)
    assert anneal(b, s).points.tobytes() == anneal(b, s).points.tobytes()


def test_orientation_degeneracy_traps():
    a, _ = optimized("2d", 3, 0)
    b, _ = optimized("2d", 3, 1)
    np.testing.assert_allclose(np.sort(np.linalg.norm(a.points, axis=1)),
                               np.sort(np.linalg.norm(b.points, axis=1)), atol=1e-3)


def test_orientation_degeneracy_sphere():
    a, _ = optimized("sphere", 2, 0)
    b, _ = optimized("sphere", 2, 1)

    def pair_dists(p):
        d = np.linalg.norm(p[:, None] - p[None], axis=-1)
        return np.sort(d[np.triu_indices(len(p), 1)])

    np.testing.assert_allclose(pair_dists(a.points), pair_dists(b.points), atol=1e-3)


def test_refine_fixed_point():
    b = basis("1d", 2)
    c = Configuration(b.geometry, [X_MAX, -X_MAX])
    np.testing.assert_allclose(refine(b, c).points, c.points, atol=1e-7)


def test_refine_recovers_displaced_maximum():
    b = basis("1d", 2)
    c = Configuration(b.geometry, [X_MAX + 0.05, -X_MAX + 0.05])
    out = refine(b, c).points.ravel()
    np.testing.assert_allclose(np.sort(out), [-X_MAX, X_MAX], atol=1e-5)


@pytest.mark.parametrize("kind,shells", [("1d", 3), ("2d", 3), ("3d", 2), ("sphere", 2)])
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_refine_never_decreases(kind, shells, seed):
    rng = np.random.default_rng(seed)
    b = basis(kind, shells)
    pts = random_points(kind, b.n, rng)
    c = Configuration(b.geometry, pts)
    lp0 = log_prob(b, c)
    if not np.isfinite(lp0):
        return
    out = refine(b, c)
    assert log_prob(b, out) >= lp0
    if kind == "sphere":
        np.testing.assert_allclose(np.linalg.norm(out.points, axis=1), 1.0, atol=1e-12)
