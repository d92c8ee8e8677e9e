"""Metropolis-Hastings sampling of single-shot configurations from |Psi|^2.

Chains are advanced in lock-step as a batch so that numpy evaluates all
determinants of one step at once. Each batch draws from a single seeded
``numpy.random.Generator``; the seed fixes every chain bit-for-bit.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .orbitals import Geometry, OrbitalBasis
from .wavefunction import Configuration, log_prob_batch

__all__ = [
    "SamplerParams",
    "ShotSet",
    "propose_trap",
    "propose_sphere",
    "uniform_sphere_point",
    "random_configuration",
    "metropolis_chain",
    "run_chains",
    "autocorrelation",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerParams:
    """Chain settings.

    step_sigma is the per-coordinate Gaussian step (units of a) in traps and
    the std of the rotation angle (radians) on the sphere.
    """

    step_sigma: float = 0.25
    burn_in: int = 10_000
    thin: int = 10
    n_steps: int = 20_000
    seed: int = 0
    single_particle: bool = False

    def __post_init__(self):
        if not self.step_sigma > 0:
            raise ValueError("step_sigma must be positive")
        if self.thin < 1 or self.n_steps < 1 or self.burn_in < 0:
            raise ValueError("need thin >= 1, n_steps >= 1, burn_in >= 0")

    @property
    def kept_per_chain(self) -> int:
        return max(0, (self.n_steps - self.burn_in) // self.thin)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class ShotSet:
    """Ordered single-shot sample. ``points`` has shape (shots, n, d)."""

    geometry: Geometry
    points: np.ndarray
    params: SamplerParams | None = None
    accept_rate: float = float("nan")
    n_chains: int = 1
    log_probs: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n_particles(self) -> int:
        return self.points.shape[1]

    @property
    def configs(self) -> list[Configuration]:
        return [Configuration(self.geometry, p) for p in self.points]

    def subset(self, mask_or_index) -> "ShotSet":
        lp = None if self.log_probs is None else self.log_probs[mask_or_index]
        return ShotSet(self.geometry, self.points[mask_or_index], self.params,
                       self.accept_rate, self.n_chains, lp)


def uniform_sphere_point(rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform point on the unit sphere from polar angle arccos(2u1 - 1), azimuth 2 pi u2."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    theta = np.arccos(2.0 * u1 - 1.0)
    phi = 2.0 * np.pi * u2
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _trap_step(points: np.ndarray, sigma, rng) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    while sigma.ndim < points.ndim:
        sigma = sigma[..., None]
    return points + sigma * rng.standard_normal(points.shape)


def _rotation_axes(r: np.ndarray, rng) -> np.ndarray:
    """Unit axes perpendicular to each r, from the tangential part of a uniform point."""
    u = uniform_sphere_point(rng, r.shape[:-1])
    axis = u - np.sum(u * r, axis=-1, keepdims=True) * r
    norm = np.linalg.norm(axis, axis=-1)
    bad = norm < 1e-12
    while bad.any():
        u_new = uniform_sphere_point(rng, int(bad.sum()))
        rb = r[bad]
        axis[bad] = u_new - np.sum(u_new * rb, axis=-1, keepdims=True) * rb
        norm[bad] = np.linalg.norm(axis[bad], axis=-1)
        bad = norm < 1e-12
    return axis / norm[..., None]


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis (np.cross carries heavy per-call overhead)."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def rotate_on_sphere(r: np.ndarray, axis: np.ndarray, angle) -> np.ndarray:
    """Rotate unit vectors r about axes perpendicular to them (great-circle move)."""
    angle = np.asarray(angle, dtype=float)[..., None]
    out = r * np.cos(angle) + cross(axis, r) * np.sin(angle)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def _sphere_step(points: np.ndarray, sigma, rng) -> np.ndarray:
    axes = _rotation_axes(points, rng)
    sigma = np.asarray(sigma, dtype=float)
    while sigma.ndim < points.ndim - 1:
        sigma = sigma[..., None]
    angles = sigma * rng.standard_normal(points.shape[:-1])
    return rotate_on_sphere(points, axes, angles)


def propose_trap(config: Configuration, step_sigma: float, rng) -> Configuration:
    if config.geometry.is_sphere:
        raise ValueError("propose_trap needs a trap geometry")
    return config.with_points(_trap_step(config.points, step_sigma, rng))


def propose_sphere(config: Configuration, step_sigma: float, rng) -> Configuration:
    if not config.geometry.is_sphere:
        raise ValueError("propose_sphere needs the sphere geometry")
    return config.with_points(_sphere_step(config.points, step_sigma, rng))


def _step(geometry: Geometry, points, sigma, rng, single_particle=False):
    if not single_particle:
        if geometry.is_sphere:
            return _sphere_step(points, sigma, rng)
        return _trap_step(points, sigma, rng)
    nb, n, _ = points.shape
    moved = (_sphere_step if geometry.is_sphere else _trap_step)(points, sigma, rng)
    which = rng.integers(0, n, size=nb)
    out = points.copy()
    out[np.arange(nb), which] = moved[np.arange(nb), which]
    return out


def _random_points(geometry: Geometry, n: int, size: int, rng) -> np.ndarray:
    if geometry.is_sphere:
        return uniform_sphere_point(rng, (size, n))
    d = geometry.dim
    direction = rng.standard_normal((size, n, d))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    radius = 3.0 * geometry.scale * rng.random((size, n, 1)) ** (1.0 / d)
    return direction * radius


def random_configuration(basis: OrbitalBasis, rng, size: int | None = None) -> np.ndarray:
    """Random start points with finite log density: ball of radius 3a, or uniform on the sphere."""
    nb = 1 if size is None else size
    pts = _random_points(basis.geometry, basis.n, nb, rng)
    lp = log_prob_batch(basis, pts)
    bad = ~np.isfinite(lp)
    while bad.any():
        pts[bad] = _random_points(basis.geometry, basis.n, int(bad.sum()), rng)
        lp[bad] = log_prob_batch(basis, pts[bad])
        bad = ~np.isfinite(lp)
    return pts[0] if size is None else pts


def _run(basis: OrbitalBasis, init: np.ndarray, params: SamplerParams, rng):
    x = np.array(init, dtype=float)
    lp = log_prob_batch(basis, x)
    bad = ~np.isfinite(lp)
    if bad.any():
        x[bad] = random_configuration(basis, rng, int(bad.sum()))
        lp = log_prob_batch(basis, x)
    nb = x.shape[0]
    geom = basis.geometry
    sigma = params.step_sigma * (1.0 if geom.is_sphere else geom.scale)
    kept = params.kept_per_chain
    out = np.empty((kept, nb) + x.shape[1:])
    out_lp = np.empty((kept, nb))
    accepted = 0
    k = 0
    for t in range(params.n_steps):
        prop = _step(geom, x, sigma, rng, params.single_particle)
        lp_new = log_prob_batch(basis, prop)
        u = rng.random(nb)
        with np.errstate(invalid="ignore"):
            gamma = np.exp(np.minimum(lp_new - lp, 0.0))
        acc = np.isfinite(lp_new) & (gamma >= u)
        x[acc] = prop[acc]
        lp[acc] = lp_new[acc]
        accepted += int(acc.sum())
        if t >= params.burn_in and (t - params.burn_in + 1) % params.thin == 0 and k < kept:
            out[k] = x
            out_lp[k] = lp
            k += 1
    rate = accepted / (params.n_steps * nb)
    # chain-major order: all shots of chain 0, then chain 1, ...
    pts = np.ascontiguousarray(out.swapaxes(0, 1)).reshape((nb * kept,) + x.shape[1:])
    lps = np.ascontiguousarray(out_lp.T).reshape(-1)
    return pts, lps, rate


def metropolis_chain(basis: OrbitalBasis, init: Configuration | None,
                     params: SamplerParams) -> ShotSet:
    """One Markov chain; rejected proposals repeat the current configuration."""
    rng = np.random.default_rng(params.seed)
    if init is None:
        start = random_configuration(basis, rng)[None]
    else:
        if init.geometry != basis.geometry or init.n != basis.n:
            raise ValueError("initial configuration does not match the basis")
        start = init.points[None]
    pts, lps, rate = _run(basis, start, params, rng)
    log.info("chain seed=%d accept_rate=%.3f shots=%d", params.seed, rate, len(pts))
    return ShotSet(basis.geometry, pts, params, rate, 1, lps)


def run_chains(basis: OrbitalBasis, params: SamplerParams, n_chains: int,
               init: np.ndarray | None = None) -> ShotSet:
    """``n_chains`` chains advanced together; shots ordered chain by chain."""
    rng = np.random.default_rng(params.seed)
    start = random_configuration(basis, rng, n_chains) if init is None else np.asarray(init)
    pts, lps, rate = _run(basis, start, params, rng)
    log.info("%d chains seed=%d accept_rate=%.3f shots=%d", n_chains, params.seed, rate, len(pts))
    return ShotSet(basis.geometry, pts, params, rate, n_chains, lps)


def autocorrelation(series: np.ndarray, lag: int) -> float:
    """Normalized autocorrelation of a 1D series (or mean over columns of a 2D one)."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x = x - x.mean(axis=0)
    var = np.mean(x * x, axis=0)
    if lag == 0:
        return 1.0
    cov = np.mean(x[lag:] * x[:-lag], axis=0)
    return float(np.mean(cov / var))
