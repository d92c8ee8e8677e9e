"""Post-selection: condition shots on particles found near successive maxima.

Each stage histograms the not-yet-consumed particles of the surviving shots,
picks a maximum of that conditional density (on the sphere from an exact
band-limited harmonic fit when one applies), and keeps a shot with
probability min(1, exp(-d^2 / 2 sigma^2) / sqrt(2 pi sigma^2)), where d is
the distance from the maximum to the shot's nearest unconsumed particle.
That particle is then consumed. Uniform draws are indexed by the original
shot number, so results do not depend on chunking or ordering.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, stats
from scipy.optimize import minimize

from ..orbitals import Geometry, GeometryKind, build_basis, orbital_values
from ..sampler import ShotSet
from .histogram import HistogramGrid, cartesian_edges, histogram, sphere_edges
from .mollweide import angles_to_unit

__all__ = [
    "EmptyPostselectionError",
    "PostselectState",
    "acceptance_probability",
    "start_postselection",
    "postselect_step",
    "locate_maximum",
    "run_postselection",
    "remaining_points",
    "cap_density_ratio",
    "find_modes",
    "BandLimitedFit",
    "real_harmonics",
    "fit_band_limited",
    "locate_maximum_band_limited",
    "band_limit_for",
]

log = logging.getLogger(__name__)

REFINE_FACTOR = 2.5
MEAN_SHIFT_ITERS = 50
MIN_SHOTS_PER_COEF = 10


class EmptyPostselectionError(RuntimeError):
    def __init__(self, stage: int, diagnostic: str = ""):
        self.stage = stage
        super().__init__(f"empty post-selection at stage {stage}" + (f": {diagnostic}" if diagnostic else ""))


def acceptance_probability(d, sigma: float):
    """Gaussian window clamped to 1 (the raw kernel exceeds 1 for sigma < 1/sqrt(2 pi))."""
    d = np.asarray(d, dtype=float)
    k = np.exp(-0.5 * (d / sigma) ** 2) / np.sqrt(2.0 * np.pi * sigma**2)
    return np.minimum(1.0, k)


@dataclass(eq=False)
class PostselectState:
    """Surviving shots, which of their particles are consumed, and the chosen maxima."""

    shots: ShotSet
    shot_ids: np.ndarray
    consumed: np.ndarray
    sigma_window: float
    seed: int = 0
    n_original: int = 0
    selected_maxima: list = field(default_factory=list)
    survivors_per_stage: list = field(default_factory=list)

    @property
    def geometry(self) -> Geometry:
        return self.shots.geometry

    @property
    def stage(self) -> int:
        return len(self.selected_maxima)

    def __len__(self):
        return len(self.shot_ids)


def start_postselection(shots: ShotSet, sigma_window: float = 0.2, seed: int = 0) -> PostselectState:
    if not sigma_window > 0:
        raise ValueError("sigma_window must be positive")
    n = len(shots)
    return PostselectState(
        shots=shots,
        shot_ids=np.arange(n),
        consumed=np.zeros((n, shots.n_particles), dtype=bool),
        sigma_window=float(sigma_window),
        seed=seed,
        n_original=n,
        survivors_per_stage=[n],
    )


def _distances(geometry: Geometry, pts: np.ndarray, point: np.ndarray) -> np.ndarray:
    if geometry.is_sphere:
        return np.arccos(np.clip(pts @ point, -1.0, 1.0))
    return np.linalg.norm(pts - point, axis=-1)


def postselect_step(state: PostselectState, maximum) -> PostselectState:
    """Keep shots with an unconsumed particle near ``maximum``; consume it."""
    geom = state.geometry
    maximum = np.asarray(maximum, dtype=float).reshape(-1)
    if geom.is_sphere:
        maximum = maximum / np.linalg.norm(maximum)
    if maximum.shape != (geom.dim,):
        raise ValueError(f"maximum must have {geom.dim} coordinates")
    if len(state) == 0:
        raise EmptyPostselectionError(state.stage, "no shots left")
    d = _distances(geom, state.shots.points, maximum)
    d = np.where(state.consumed, np.inf, d)
    nearest = np.argmin(d, axis=1)
    dmin = d[np.arange(len(d)), nearest]
    prob = acceptance_probability(dmin, state.sigma_window)
    stage = state.stage
    u_all = np.random.default_rng([state.seed, stage]).random(state.n_original)
    keep = u_all[state.shot_ids] < prob
    if not keep.any():
        qs = np.quantile(dmin, [0.0, 0.5, 1.0]) if len(dmin) else []
        raise EmptyPostselectionError(
            stage,
            f"{len(dmin)} shots, nearest-particle distance min/median/max = "
            + "/".join(f"{q:.3g}" for q in qs)
            + f", max acceptance {prob.max():.3g}",
        )
    consumed = state.consumed[keep].copy()
    consumed[np.arange(len(consumed)), nearest[keep]] = True
    return PostselectState(
        shots=state.shots.subset(keep),
        shot_ids=state.shot_ids[keep],
        consumed=consumed,
        sigma_window=state.sigma_window,
        seed=state.seed,
        n_original=state.n_original,
        selected_maxima=state.selected_maxima + [maximum],
        survivors_per_stage=state.survivors_per_stage + [int(keep.sum())],
    )


def remaining_points(state: PostselectState) -> np.ndarray:
    """Unconsumed particles of surviving shots as (shots, n - stage, d)."""
    pts = state.shots.points
    k = pts.shape[1] - state.stage
    if len(pts) == 0:
        return np.zeros((0, k, pts.shape[2]))
    order = np.argsort(state.consumed, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(pts, order[..., None], axis=1)


def default_edges(geometry: Geometry, extent: float = 3.0, bins: int = 60) -> tuple:
    if geometry.is_sphere:
        return sphere_edges(24, 48)
    return cartesian_edges(extent, bins, geometry.dim)


def _bin_points(grid: HistogramGrid) -> np.ndarray:
    """Bin centers as points in the geometry's coordinates, shape grid.shape + (d,)."""
    centers = grid.centers()
    if grid.projection == "spherical":
        th, ph = np.meshgrid(*centers, indexing="ij")
        return angles_to_unit(th, ph)
    mesh = np.meshgrid(*centers, indexing="ij")
    return np.stack(mesh, axis=-1)


def _box_counts(grid: HistogramGrid, half_width: int) -> np.ndarray:
    """Counts summed over the (2w+1)^d block of neighbouring bins.

    Azimuth wraps around on the sphere; polar angle is reflected at the
    poles. Cartesian grids see nothing beyond their edges.
    """
    counts = grid.counts.astype(float)
    if half_width == 0:
        return counts
    size = 2 * half_width + 1
    if grid.projection == "spherical":
        modes = ["reflect", "wrap"]
    else:
        modes = ["constant"] * counts.ndim
    return ndimage.uniform_filter(counts, size=size, mode=modes) * size**counts.ndim


def locate_maximum(grid: HistogramGrid, points: np.ndarray, geometry: Geometry,
                   rule: str = "first", hint=None, rng=None, tie_sigma: float = 2.0,
                   refine_radius: float | None = None, smooth_bins: int = 1) -> np.ndarray:
    """Global maximum of a conditional histogram.

    Ties are judged on neighbourhood counts, each bin's count summed with
    its neighbours within ``smooth_bins`` bins (all supported grids have
    equal-area bins). A single fine bin is too noisy once few shots
    survive: a noise bump would tie with the true peak. Non-empty bins that
    are local maxima of the neighbourhood count and lie within ``tie_sigma``
    Poisson standard deviations of the largest one count as tied, and
    ``rule`` picks among them: "first"
    takes the first in scan order, "random" draws one, "manual" takes the
    one nearest ``hint``. The rule thereby decides which peak (or which
    point of a ring or plateau) is meant. Starting from the chosen bin
    center, flat-kernel mean-shift steps of radius ``refine_radius`` (by
    default ``REFINE_FACTOR`` times the distance from the center to the
    bin's farthest corner) then climb to the top of that peak.
    """
    box = _box_counts(grid, smooth_bins)
    peak = box.max()
    threshold = peak - tie_sigma * np.sqrt(max(peak, 1.0))
    # only local maxima compete: the flank of one broad peak is not a tie
    modes = ["reflect", "wrap"] if grid.projection == "spherical" else "constant"
    local = box >= ndimage.maximum_filter(box, size=2 * smooth_bins + 1, mode=modes)
    # an empty bin is never a maximum, however noisy the peak
    tied = np.argwhere(local & (box >= threshold) & (grid.counts > 0))
    centers = _bin_points(grid)
    if rule == "first" or (rule == "manual" and hint is None):
        choice = tuple(tied[0])
    elif rule == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        choice = tuple(tied[rng.integers(len(tied))])
    elif rule == "manual":
        hint = np.asarray(hint, dtype=float)
        if geometry.is_sphere:
            hint = hint / np.linalg.norm(hint)
        cand = centers[tuple(tied.T)]
        choice = tuple(tied[int(np.argmin(_distances(geometry, cand, hint)))])
    else:
        raise ValueError(f"unknown choice rule {rule!r}")
    center = centers[choice]
    if refine_radius is None:
        refine_radius = REFINE_FACTOR * _bin_circumradius(grid, choice, center, geometry)
    flat = points.reshape(-1, points.shape[-1])
    for _ in range(MEAN_SHIFT_ITERS):
        near = flat[_distances(geometry, flat, center) < refine_radius]
        if len(near) == 0:
            break
        m = near.mean(axis=0)
        if geometry.is_sphere:
            norm = np.linalg.norm(m)
            if norm < 1e-12:
                break
            m = m / norm
        step = float(np.linalg.norm(m - center))
        center = m
        if step < 1e-9 * refine_radius:
            break
    return center


def _bin_circumradius(grid: HistogramGrid, index: tuple, center: np.ndarray, geometry: Geometry) -> float:
    """Largest distance from ``center`` to a corner of bin ``index``."""
    lo = [e[i] for e, i in zip(grid.edges, index)]
    hi = [e[i + 1] for e, i in zip(grid.edges, index)]
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(len(lo), -1).T
    if grid.projection == "spherical":
        corners = angles_to_unit(corners[:, 0], corners[:, 1])
    return float(_distances(geometry, corners, center).max())


@dataclass(frozen=True)
class BandLimitedFit:
    """Density on the sphere expanded in real spherical harmonics up to ``lmax``.

    With orbitals of degree at most L, the density of any one particle
    given the others (or given window conditions on them) is a sum of
    products of two such orbitals, so it contains harmonics of degree at
    most 2L and nothing else. Its projection onto that finite basis is an
    unbiased estimate with no smoothing bias: the coefficient of each
    harmonic is the sample mean of that harmonic summed over the particles
    of a shot. ``cov`` is the covariance of those means across shots.
    """

    lmax: int
    coef: np.ndarray
    cov: np.ndarray
    n_shots: int

    def __call__(self, v) -> np.ndarray:
        return real_harmonics(v, self.lmax) @ self.coef

    def stderr(self, v, relative_to=None) -> np.ndarray:
        """Standard error of the fit at ``v``, or of its difference from the value at ``relative_to``."""
        y = real_harmonics(v, self.lmax)
        if relative_to is not None:
            y = y - real_harmonics(relative_to, self.lmax)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", y, self.cov, y), 0.0))


def real_harmonics(v, lmax: int) -> np.ndarray:
    """Orthonormal real spherical harmonics of degree <= lmax at unit vectors, shape (..., (lmax+1)^2)."""
    v = np.asarray(v, dtype=float)
    basis = build_basis(Geometry(GeometryKind.SPHERE), lmax + 1)
    y = orbital_values(basis, v)
    cols = []
    for k, (l, m) in enumerate(basis.indices):
        if m == 0:
            cols.append(y[..., k].real)
        elif m > 0:
            cols.append(np.sqrt(2.0) * y[..., k].real)
            cols.append(np.sqrt(2.0) * y[..., k].imag)
    return np.stack(cols, axis=-1)


def fit_band_limited(points: np.ndarray, lmax: int, groups=None) -> BandLimitedFit:
    """Harmonic projection of a (shots, k, 3) sample of remaining particles.

    Shots from one Markov chain are correlated, so ``groups`` (one label
    per shot, e.g. a block of consecutive shots) gives a batch-means
    covariance. Without labels shots are taken as independent.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 3 or pts.shape[-1] != 3 or len(pts) == 0:
        raise ValueError("need a non-empty (shots, k, 3) array of unit vectors")
    per_shot = real_harmonics(pts, lmax).sum(axis=1)
    n = len(per_shot)
    coef = per_shot.mean(axis=0)
    resid = per_shot - coef
    if groups is not None:
        _, inv = np.unique(np.asarray(groups), return_inverse=True)
        resid = np.zeros((inv.max() + 1, resid.shape[1])) if n else resid
        np.add.at(resid, inv, per_shot - coef)
    g = len(resid)
    cov = resid.T @ resid / n**2 * (g / (g - 1)) if g > 1 else np.zeros((len(coef),) * 2)
    return BandLimitedFit(lmax, coef, cov, n)


def _batch_labels(state: PostselectState, min_batches: int = 30) -> np.ndarray:
    """Batch label per surviving shot: its chain, or a block of consecutive shots."""
    batches = max(state.shots.n_chains, min_batches)
    size = -(-state.n_original // batches)
    return state.shot_ids // size


def _climb(fit: BandLimitedFit, start: np.ndarray, max_angle: float | None) -> np.ndarray:
    """Local maximum of ``fit`` from ``start``, optionally within ``max_angle`` of it."""
    e1 = np.cross(start, [1.0, 0.0, 0.0] if abs(start[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(start, e1)

    def point(u):
        v = start + u[0] * e1 + u[1] * e2
        return v / np.linalg.norm(v)

    def objective(u):
        v = point(u)
        if max_angle is not None and np.arccos(np.clip(v @ start, -1.0, 1.0)) > max_angle:
            return np.inf
        return -float(fit(v))

    res = minimize(objective, np.zeros(2), method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-14, "initial_simplex": [[0, 0], [0.05, 0], [0, 0.05]]})
    return point(res.x)


def locate_maximum_band_limited(fit: BandLimitedFit, candidates: np.ndarray, rule: str = "first",
                                hint=None, rng=None, tie_sigma: float = 2.0,
                                hint_radius: float = 0.3) -> np.ndarray:
    """Global maximum of a band-limited density fit.

    ``candidates`` (..., 3) are scan points, e.g. histogram bin centers, in
    scan order. Points whose fitted density falls short of the best
    candidate by less than c standard errors of the difference are tied.
    The best candidate is itself selected from noise, so c is the
    simultaneous (Scheffe) bound sqrt(chi2 quantile on K-1 degrees of
    freedom) at the confidence of a two-sided ``tie_sigma`` normal interval,
    K being the number of harmonics. "first" and "random" choose among
    tied local maxima of the scan (distinct peaks), then climb to the
    continuous maximum. "manual" starts at the tied point nearest ``hint``
    and climbs at most ``hint_radius`` from it, so on a ring or a plateau
    the answer stays near the hint.
    """
    shape = candidates.shape[:-1]
    vals = fit(candidates)
    best = np.unravel_index(int(np.argmax(vals)), shape)
    level = 1.0 - 2.0 * stats.norm.sf(tie_sigma)
    crit = np.sqrt(stats.chi2.ppf(level, max(len(fit.coef) - 1, 1)))
    tied = vals >= vals[best] - crit * fit.stderr(candidates, candidates[best])
    if rule == "manual" and hint is not None:
        hint = np.asarray(hint, dtype=float)
        hint = hint / np.linalg.norm(hint)
        pts = candidates[tied]
        start = pts[int(np.argmax(pts @ hint))]
        return _climb(fit, start, hint_radius)
    if len(shape) == 2:
        local = vals >= ndimage.maximum_filter(vals, size=3, mode=["reflect", "wrap"])
    else:
        local = np.ones(shape, dtype=bool)
    idx = np.argwhere(tied & local)
    if len(idx) == 0:
        idx = np.argwhere(tied)
    if rule in ("first", "manual"):
        choice = tuple(idx[0])
    elif rule == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        choice = tuple(idx[rng.integers(len(idx))])
    else:
        raise ValueError(f"unknown choice rule {rule!r}")
    return _climb(fit, candidates[choice], None)


def band_limit_for(geometry: Geometry, n_particles: int) -> int | None:
    """Harmonic degree bound 2L for a closed-shell sphere state of n = (L+1)^2, else None."""
    if not geometry.is_sphere:
        return None
    k = int(round(np.sqrt(n_particles)))
    return 2 * (k - 1) if k * k == n_particles else None


def _hint_for(choice_rule, stage):
    if isinstance(choice_rule, str):
        return choice_rule, None
    hints = list(choice_rule)
    h = hints[stage] if stage < len(hints) else None
    return "manual", h


def run_postselection(shots: ShotSet, sigma_window: float = 0.2, choice_rule="first",
                      edges: tuple | None = None, seed: int = 0, tie_sigma: float = 2.0,
                      estimator: str = "auto"):
    """Full pipeline: as many stages as there are particles.

    ``choice_rule`` is "first", "random", or a sequence of hint points (one
    per stage, ``None`` entries fall back to "first"). Maxima come from the
    stage histogram (``estimator="histogram"``) or, on the sphere with a
    closed-shell particle number, from the band-limited harmonic fit
    (``"band"``); "auto" picks the latter whenever it applies. Stages with
    fewer than ``MIN_SHOTS_PER_COEF`` shots per fitted coefficient use the
    histogram either way. The fit
    assumes shots drawn from the closed-shell state, as sampler output is;
    for synthetic data use the histogram. Returns the
    final state and the conditional histogram seen at each stage; the first
    one is the one-particle histogram of the whole sample.
    """
    if len(shots) == 0:
        raise ValueError("no shots to post-select")
    geom = shots.geometry
    edges = edges or default_edges(geom)
    projection = "spherical" if geom.is_sphere else "cartesian"
    band = band_limit_for(geom, shots.n_particles)
    if estimator == "band" and band is None:
        raise ValueError("the band-limited estimator needs a closed-shell sphere sample")
    if estimator not in ("auto", "band", "histogram"):
        raise ValueError(f"unknown estimator {estimator!r}")
    use_band = band is not None and estimator != "histogram"
    state = start_postselection(shots, sigma_window, seed)
    rng = np.random.default_rng([seed, 10_000])
    grids = []
    for stage in range(shots.n_particles):
        pts = remaining_points(state)
        grid = histogram(pts, edges, projection)
        grids.append(grid)
        rule, hint = _hint_for(choice_rule, stage)
        # a fit with few shots per coefficient is noise; the histogram copes better
        if use_band and len(pts) >= MIN_SHOTS_PER_COEF * (band + 1) ** 2:
            fit = fit_band_limited(pts, band, _batch_labels(state))
            maximum = locate_maximum_band_limited(fit, _bin_points(grid), rule, hint, rng, tie_sigma)
        else:
            maximum = locate_maximum(grid, pts, geom, rule, hint, rng, tie_sigma)
        state = postselect_step(state, maximum)
        log.info("stage %d: maximum %s, %d shots survive", stage, np.round(maximum, 4), len(state))
    return state, grids


def cap_density_ratio(state: PostselectState, point, radius: float) -> float:
    """Density of unconsumed particles inside the cap of geodesic ``radius``
    around ``point``, relative to their mean density over the sphere."""
    if not state.geometry.is_sphere:
        raise ValueError("cap_density_ratio is defined on the sphere")
    point = np.asarray(point, dtype=float)
    point = point / np.linalg.norm(point)
    pts = remaining_points(state)
    if len(pts) == 0:
        return float("nan")
    inside = (_distances(state.geometry, pts.reshape(-1, 3), point) < radius).sum()
    cap_area = 2.0 * np.pi * (1.0 - np.cos(radius))
    local = inside / (len(pts) * cap_area)
    mean = pts.shape[1] / (4.0 * np.pi)
    return float(local / mean)


def find_modes(points: np.ndarray, geometry: Geometry, k: int, edges: tuple | None = None,
               exclusion: float = 0.6, refine_radius: float = 0.5) -> np.ndarray:
    """The k strongest separated peaks of the point density.

    Greedy: take the densest bin, suppress bins within ``exclusion`` of it,
    repeat. Each peak is then moved by flat-kernel mean-shift (radius
    ``refine_radius``, normalized on the sphere) until it stops moving. The
    radius should exceed the width of one cluster, so the cluster is not
    truncated, and stay below half the separation between clusters.
    """
    flat = np.asarray(points, dtype=float).reshape(-1, geometry.dim)
    edges = edges or default_edges(geometry)
    projection = "spherical" if geometry.is_sphere else "cartesian"
    grid = histogram(flat, edges, projection)
    dens = grid.density().copy()
    centers = _bin_points(grid)
    modes = []
    for _ in range(k):
        idx = np.unravel_index(int(np.argmax(dens)), dens.shape)
        c = centers[idx]
        m = c
        for _ in range(MEAN_SHIFT_ITERS):
            near = flat[_distances(geometry, flat, m) < refine_radius]
            if len(near) == 0:
                break
            new = near.mean(axis=0)
            if geometry.is_sphere:
                new = new / np.linalg.norm(new)
            done = np.linalg.norm(new - m) < 1e-12
            m = new
            if done:
                break
        modes.append(m)
        dens[_distances(geometry, centers.reshape(-1, geometry.dim), c).reshape(dens.shape) < exclusion] = -np.inf
    return np.array(modes)
