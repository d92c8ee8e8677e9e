"""Most probable configuration by multistart simulated annealing plus pattern search."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from .orbitals import Geometry, OrbitalBasis
from .sampler import _step, cross, random_configuration
from .wavefunction import Configuration, log_prob_batch

__all__ = ["AnnealSchedule", "Pattern", "anneal", "refine", "refine_batch", "is_local_max"]

log = logging.getLogger(__name__)

_SPHERE_AXES = np.eye(3)


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling from t_start to t_end; temperatures divide log-density differences."""

    t_start: float = 1.0
    t_end: float = 1e-4
    cooling: float = 0.95
    steps_per_sweep: int = 200
    restarts: int = 32
    step0: float = 0.25
    seed: int = 0
    n_sweeps: int | None = None

    def __post_init__(self):
        if not self.t_start > self.t_end > 0:
            raise ValueError("need t_start > t_end > 0")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.restarts < 1 or self.steps_per_sweep < 1:
            raise ValueError("restarts and steps_per_sweep must be positive")

    @property
    def sweeps(self) -> int:
        if self.n_sweeps is not None:
            return self.n_sweeps
        return int(math.ceil(math.log(self.t_end / self.t_start) / math.log(self.cooling))) + 1

    def temperatures(self) -> np.ndarray:
        t = self.t_start * self.cooling ** np.arange(self.sweeps)
        return np.maximum(t, self.t_end)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class Pattern:
    """Reference most-probable configuration.

    ``restart_log_probs`` holds every restart's refined optimum so callers can
    judge how reproducible the reported maximum is.
    """

    geometry: Geometry
    points: np.ndarray
    log_density_at_max: float
    restart_log_probs: np.ndarray | None = None

    @property
    def config(self) -> Configuration:
        return Configuration(self.geometry, self.points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def restarts_at_best(self, tol: float = 1e-6) -> int:
        if self.restart_log_probs is None:
            return 1
        return int(np.sum(self.restart_log_probs >= self.log_density_at_max - tol))


def _coordinate_moves(geometry: Geometry, points: np.ndarray, particle: int, axis: int, h):
    """Move one coordinate of one particle by h (per batch member)."""
    out = points.copy()
    if geometry.is_sphere:
        r = points[:, particle]
        ax = np.broadcast_to(_SPHERE_AXES[axis], r.shape)
        # rotation about a fixed global axis; Rodrigues without the perpendicularity shortcut
        c, s = np.cos(h)[:, None], np.sin(h)[:, None]
        rot = r * c + cross(ax, r) * s + ax * np.sum(ax * r, axis=1, keepdims=True) * (1 - c)
        out[:, particle] = rot / np.linalg.norm(rot, axis=1, keepdims=True)
    else:
        out[:, particle, axis] += h
    return out


def _all_moves(geometry: Geometry, points: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Every +-h single-coordinate move: (B, n, d) -> (B, 2 * n * axes, n, d)."""
    nb, n, _ = points.shape
    n_axes = 3 if geometry.is_sphere else geometry.dim
    out = [
        _coordinate_moves(geometry, points, p, ax, sign * h)
        for p in range(n) for ax in range(n_axes) for sign in (1.0, -1.0)
    ]
    return np.stack(out, axis=1)


def _displace(geometry: Geometry, base: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Points moved by a flat local-coordinate vector z (..., n * k).

    Traps: Cartesian offsets. Sphere: a rotation vector per particle.
    """
    nb_shape = z.shape[:-1]
    if not geometry.is_sphere:
        return base + z.reshape(nb_shape + base.shape)
    w = z.reshape(nb_shape + base.shape)
    angle = np.linalg.norm(w, axis=-1, keepdims=True)
    safe = np.where(angle > 0, angle, 1.0)
    k = w / safe
    r = np.broadcast_to(base, w.shape)
    c, s = np.cos(angle), np.sin(angle)
    out = r * c + cross(k, r) * s + k * np.sum(k * r, axis=-1, keepdims=True) * (1 - c)
    out = np.where(angle > 0, out, r)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def _quasi_newton(basis: OrbitalBasis, x0: np.ndarray, fd_step: float = 1e-6) -> np.ndarray:
    """BFGS on -log_prob with central-difference gradients (one batched call each)."""
    geom = basis.geometry
    dim = x0.size
    eye = np.eye(dim) * fd_step

    def f(z):
        return -float(log_prob_batch(basis, _displace(geom, x0, z[None]))[0])

    def grad(z):
        trial = _displace(geom, x0, np.concatenate([z + eye, z - eye]))
        lp = log_prob_batch(basis, trial)
        return -(lp[:dim] - lp[dim:]) / (2.0 * fd_step)

    res = minimize(f, np.zeros(dim), jac=grad, method="BFGS",
                   options={"gtol": 1e-10, "maxiter": 50 * dim})
    return _displace(geom, x0, res.x[None])[0]


def refine_batch(basis: OrbitalBasis, points: np.ndarray, step: float = 0.1,
                 shrink: float = 0.5, tol: float = 1e-7, max_passes: int = 100_000,
                 min_gain: float = 1e-13, polish: bool = True):
    """Coordinate-wise pattern search on a stack of configurations.

    Each member keeps its own step; a full pass over all coordinates without
    improvement shrinks it. After an improving pass the search also tries the
    extrapolated move through the new point (Hooke-Jeeves). A move counts
    only if it gains more than ``min_gain * max(1, |log_prob|)``, so
    round-off along the flat rotation direction cannot stall the shrinking.
    Sphere coordinates are small rotations of one particle about the global
    x, y, z axes, which avoids the pole singularity of (theta, phi).

    With ``polish`` each member first gets a BFGS polish (kept only if it
    improves), which removes most of the zig-zag passes of plain coordinate
    search. Returns (points, log_probs); log_probs never decrease.
    """
    geom = basis.geometry
    x = np.array(points, dtype=float)
    nb, n, _ = x.shape
    lp = log_prob_batch(basis, x)
    if polish:
        for i in range(nb):
            if not np.isfinite(lp[i]):
                continue
            cand = _quasi_newton(basis, x[i])
            lp_c = log_prob_batch(basis, cand[None])[0]
            if lp_c > lp[i]:
                x[i], lp[i] = cand, lp_c
    h = np.full(nb, float(step) * (1.0 if geom.is_sphere else geom.scale))
    floor = tol * (1.0 if geom.is_sphere else geom.scale)
    n_axes = 3 if geom.is_sphere else geom.dim

    def gain(lp_new, lp_old):
        return lp_new > lp_old + min_gain * np.maximum(1.0, np.abs(lp_old))

    for _ in range(max_passes):
        active = np.flatnonzero(h >= floor)
        if len(active) == 0:
            break
        # probing every move at once is exact for passes that find nothing
        probes = _all_moves(geom, x[active], h[active])
        lp_probe = log_prob_batch(basis, probes.reshape((-1,) + x.shape[1:])).reshape(len(active), -1)
        hit = gain(lp_probe, lp[active][:, None]).any(axis=1)
        h[active[~hit]] *= shrink
        busy = active[hit]
        if len(busy) == 0:
            continue
        xb, lpb, hb = x[busy], lp[busy], h[busy]
        base = xb.copy()
        for p in range(n):
            for ax in range(n_axes):
                for sign in (1.0, -1.0):
                    trial = _coordinate_moves(geom, xb, p, ax, sign * hb)
                    lp_t = log_prob_batch(basis, trial)
                    better = gain(lp_t, lpb)
                    xb[better] = trial[better]
                    lpb[better] = lp_t[better]
        if not geom.is_sphere:
            trial = xb + (xb - base)
            lp_t = log_prob_batch(basis, trial)
            better = gain(lp_t, lpb)
            xb[better] = trial[better]
            lpb[better] = lp_t[better]
        x[busy], lp[busy] = xb, lpb
    return x, lp


def refine(basis: OrbitalBasis, config: Configuration, step: float = 0.1,
           shrink: float = 0.5, tol: float = 1e-7) -> Configuration:
    """Deterministic polish; the returned log_prob is never below the input's."""
    pts, _ = refine_batch(basis, config.points[None], step, shrink, tol)
    return config.with_points(pts[0])


def is_local_max(basis: OrbitalBasis, config: Configuration, h: float = 1e-4,
                 slack: float = 1e-8) -> bool:
    """No single-coordinate move of size h raises log_prob by more than slack."""
    geom = basis.geometry
    x = config.points[None]
    lp0 = log_prob_batch(basis, x)[0]
    n_axes = 3 if geom.is_sphere else geom.dim
    trials = [
        _coordinate_moves(geom, x, p, ax, np.array([s * h]))[0]
        for p in range(config.n) for ax in range(n_axes) for s in (1.0, -1.0)
    ]
    lp = log_prob_batch(basis, np.stack(trials))
    return bool(np.all(lp <= lp0 + slack))


def anneal(basis: OrbitalBasis, schedule: AnnealSchedule | None = None) -> Pattern:
    """Global maximum of |Psi|^2: annealed Metropolis restarts, refined, best kept.

    All restarts run as one batch. The proposal scale is ``step0 * sqrt(T)``
    times a per-restart factor nudged after each sweep toward 20-50%
    acceptance, which keeps the walk moving as n grows.
    """
    schedule = schedule or AnnealSchedule()
    rng = np.random.default_rng(schedule.seed)
    geom = basis.geometry
    nb = schedule.restarts
    x = random_configuration(basis, rng, nb)
    lp = log_prob_batch(basis, x)
    best_x, best_lp = x.copy(), lp.copy()
    factor = np.ones(nb)
    base = schedule.step0 * (1.0 if geom.is_sphere else geom.scale)
    for temp in schedule.temperatures():
        sigma = base * math.sqrt(temp) * factor
        acc_count = np.zeros(nb)
        for _ in range(schedule.steps_per_sweep):
            prop = _step(geom, x, sigma, rng)
            lp_new = log_prob_batch(basis, prop)
            u = rng.random(nb)
            with np.errstate(invalid="ignore", over="ignore"):
                gamma = np.exp(np.minimum((lp_new - lp) / temp, 0.0))
            acc = np.isfinite(lp_new) & (gamma >= u)
            x[acc] = prop[acc]
            lp[acc] = lp_new[acc]
            acc_count += acc
            up = lp > best_lp
            best_x[up] = x[up]
            best_lp[up] = lp[up]
        rate = acc_count / schedule.steps_per_sweep
        factor = np.where(rate < 0.2, factor * 0.7, np.where(rate > 0.5, factor * 1.3, factor))
        factor = np.clip(factor, 1e-3, 10.0)
    ref_x, ref_lp = refine_batch(basis, best_x)
    i = int(np.argmax(ref_lp))
    pattern = Pattern(geom, ref_x[i], float(ref_lp[i]), ref_lp)
    log.info("anneal n=%d best=%.8f restarts_at_best=%d/%d", basis.n, ref_lp[i],
             pattern.restarts_at_best(), nb)
    return pattern
