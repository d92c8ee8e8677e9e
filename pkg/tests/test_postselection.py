import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import basis, geom, optimized, random_points
from pauli_crystals.analysis.postselection import (EmptyPostselectionError, PostselectState,
                                                   acceptance_probability, band_limit_for,
                                                   cap_density_ratio, fit_band_limited,
                                                   locate_maximum_band_limited, real_harmonics,
                                                   postselect_step, remaining_points,
                                                   run_postselection, start_postselection)
from pauli_crystals.sampler import SamplerParams, ShotSet, run_chains

EQUATOR = np.array([1.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def sphere_shots():
    b = basis("sphere", 2)
    return run_chains(b, SamplerParams(burn_in=2000, thin=10, n_steps=2000 + 10 * 500, seed=21), 200)


def test_kernel_values():
    assert acceptance_probability(0.0, 0.5) == pytest.approx(1 / math.sqrt(2 * math.pi * 0.25), rel=1e-12)
    assert acceptance_probability(0.0, 0.5) == pytest.approx(0.7979, abs=1e-4)
    assert acceptance_probability(10 * 0.5, 0.5) < 1e-21
    # narrow windows clamp at 1
    assert acceptance_probability(0.0, 0.2) == 1.0


@given(st.floats(0, 10), st.floats(0.01, 3))
def test_kernel_is_a_probability(d, sigma):
    p = float(acceptance_probability(d, sigma))
    assert 0.0 <= p <= 1.0


def test_pauli_hole_after_first_selection(sphere_shots):
    state = postselect_step(start_postselection(sphere_shots, 0.2, seed=1), EQUATOR)
    assert len(state) > 0
    assert cap_density_ratio(state, EQUATOR, 0.2) < 0.5


def test_consumption_is_injective_and_survivors_shrink(sphere_shots):
    state, grids = run_postselection(sphere_shots, 0.2, "first", seed=2)
    assert len(grids) == 4
    assert all(a >= b for a, b in zip(state.survivors_per_stage, state.survivors_per_stage[1:]))
    assert np.all(state.consumed.sum(axis=1) == 4)
    for k, g in enumerate(grids):
        assert g.particles_per_shot == 4 - k
        assert g.conserved()


def test_consumed_particle_is_nearest_to_maximum(sphere_shots):
    s0 = start_postselection(sphere_shots, 0.3, seed=3)
    s1 = postselect_step(s0, EQUATOR)
    pts = s1.shots.points
    d = np.arccos(np.clip(pts @ EQUATOR, -1, 1))
    np.testing.assert_array_equal(np.argmin(d, axis=1), np.argmax(s1.consumed, axis=1))
    assert remaining_points(s1).shape == (len(s1), 3, 3)


def test_noiseless_copies_keep_every_shot():
    pattern = optimized("sphere", 2)[0]
    pts = np.repeat(pattern.points[None], 300, axis=0)
    shots = ShotSet(geom("sphere"), pts)
    # four exact vertices are not a band-limited density, so use the histogram
    state, _ = run_postselection(shots, 0.2, "first", estimator="histogram")
    assert len(state) == 300
    found = np.array(state.selected_maxima)
    d = np.arccos(np.clip(found @ pattern.points.T, -1, 1))
    assert np.all(d.min(axis=1) < 1e-9)
    assert sorted(np.argmin(d, axis=1)) == [0, 1, 2, 3]


def test_noiseless_trap_copies():
    pattern = optimized("2d", 2)[0]
    shots = ShotSet(geom("2d"), np.repeat(pattern.points[None], 100, axis=0))
    state, _ = run_postselection(shots, 0.2, "first")
    assert len(state) == 100
    found = np.array(state.selected_maxima)
    d = np.linalg.norm(found[:, None] - pattern.points[None], axis=-1)
    assert np.all(d.min(axis=1) < 1e-9)


def test_band_limited_fit_of_tetrahedron_vertices_is_flat():
    # no tetrahedral invariant exists below degree 3, so the projection is constant
    pattern = optimized("sphere", 2)[0]
    fit = fit_band_limited(pattern.points[None], 2)
    v = random_points("sphere", 50, np.random.default_rng(0))
    np.testing.assert_allclose(fit(v), 4 / (4 * np.pi), atol=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
@settings(max_examples=25, deadline=None)
def test_band_limited_fit_integrates_to_particle_count(seed, lmax):
    rng = np.random.default_rng(seed)
    pts = random_points("sphere", 3, rng, size=40)
    fit = fit_band_limited(pts, lmax)
    assert fit.coef[0] * np.sqrt(4 * np.pi) == pytest.approx(3.0, rel=1e-12)
    u, wu = np.polynomial.legendre.leggauss(12)
    phi = 2 * np.pi * np.arange(24) / 24
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    s_ = np.sqrt(1 - uu**2)
    grid = np.stack([s_ * np.cos(pp), s_ * np.sin(pp), uu], axis=-1)
    total = (fit(grid) * wu[:, None]).sum() * 2 * np.pi / 24
    assert total == pytest.approx(3.0, rel=1e-9)


def test_real_harmonics_orthonormal():
    u, wu = np.polynomial.legendre.leggauss(16)
    phi = 2 * np.pi * np.arange(32) / 32
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    s_ = np.sqrt(1 - uu**2)
    grid = np.stack([s_ * np.cos(pp), s_ * np.sin(pp), uu], axis=-1).reshape(-1, 3)
    w = np.repeat(wu, 32) * 2 * np.pi / 32
    y = real_harmonics(grid, 4)
    assert y.shape == (len(grid), 25)
    np.testing.assert_allclose((y * w[:, None]).T @ y, np.eye(25), atol=1e-10)


def test_band_limited_maximum_of_a_cluster(rng):
    # a tight cluster projects to a peak centered on it
    center = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    pts = center + 0.05 * rng.normal(size=(2000, 1, 3))
    pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
    fit = fit_band_limited(pts, 4)
    from pauli_crystals.analysis.histogram import sphere_edges
    from pauli_crystals.analysis.mollweide import angles_to_unit
    th, ph = sphere_edges(24, 48)
    cth, cph = np.meshgrid(0.5 * (th[1:] + th[:-1]), 0.5 * (ph[1:] + ph[:-1]), indexing="ij")
    m = locate_maximum_band_limited(fit, angles_to_unit(cth, cph))
    mean = pts.reshape(-1, 3).mean(axis=0)
    assert np.arccos(np.clip(m @ (mean / np.linalg.norm(mean)), -1, 1)) < 1e-3


def test_band_limit_only_for_closed_sphere_shells():
    assert band_limit_for(geom("sphere"), 4) == 2
    assert band_limit_for(geom("sphere"), 9) == 4
    assert band_limit_for(geom("sphere"), 5) is None
    assert band_limit_for(geom("2d"), 4) is None
    shots = ShotSet(geom("sphere"), random_points("sphere", 3, np.random.default_rng(1), size=10))
    with pytest.raises(ValueError):
        run_postselection(shots, 0.2, estimator="band")


def test_tiny_window_empties_the_sample(sphere_shots):
    with pytest.raises(EmptyPostselectionError) as info:
        run_postselection(sphere_shots.subset(slice(0, 2000)), 1e-9, "first")
    assert info.value.stage == 0


def test_acceptance_draws_follow_original_shot_ids(sphere_shots):
    # deciding a subset must agree with deciding the whole set
    full = postselect_step(start_postselection(sphere_shots, 0.3, seed=4), EQUATOR)
    idx = np.arange(0, len(sphere_shots), 3)
    part = PostselectState(
        shots=sphere_shots.subset(idx), shot_ids=idx,
        consumed=np.zeros((len(idx), 4), dtype=bool), sigma_window=0.3, seed=4,
        n_original=len(sphere_shots), survivors_per_stage=[len(idx)],
    )
    part = postselect_step(part, EQUATOR)
    np.testing.assert_array_equal(part.shot_ids, np.intersect1d(full.shot_ids, idx))


def test_manual_hints_are_followed(sphere_shots):
    hint = np.array([0.0, 1.0, 0.0])
    state, _ = run_postselection(sphere_shots, 0.2, [hint], seed=5)
    assert np.arccos(state.selected_maxima[0] @ hint) < 0.3


def test_rejects_bad_inputs(sphere_shots):
    with pytest.raises(ValueError):
        start_postselection(sphere_shots, 0.0)
    with pytest.raises(ValueError):
        postselect_step(start_postselection(sphere_shots), [1.0, 0.0])
    with pytest.raises(ValueError):
        run_postselection(sphere_shots.subset(slice(0, 0)))
    with pytest.raises(ValueError):
        cap_density_ratio(start_postselection(ShotSet(geom("2d"), np.zeros((2, 3, 2)))), [0, 0], 0.1)
