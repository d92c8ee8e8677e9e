"""Dense bin-count grids for shot data (Cartesian, sphere, Mollweide)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mollweide import mollweide_project, unit_to_angles

__all__ = [
    "HistogramGrid",
    "cartesian_edges",
    "sphere_edges",
    "mollweide_edges",
    "histogram",
    "PROJECTIONS",
]

PROJECTIONS = ("cartesian", "spherical", "mollweide")
_SQRT2 = np.sqrt(2.0)


@dataclass(eq=False)
class HistogramGrid:
    """Bin counts plus axis metadata.

    ``projection`` is "cartesian" (trap coordinates), "spherical" (polar angle
    x azimuth bins; equal-area when built by :func:`sphere_edges`) or
    "mollweide" (projected plane). Points falling outside the grid are counted
    in ``out_of_range`` so that counts + out_of_range = shots x particles.
    """

    edges: tuple
    projection: str
    counts: np.ndarray
    total_shots: int
    particles_per_shot: int
    out_of_range: int = 0

    @property
    def shape(self):
        return self.counts.shape

    def centers(self) -> list[np.ndarray]:
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def bin_areas(self) -> np.ndarray:
        """Bin measure: length/area/volume, or solid angle on the sphere."""
        if self.projection == "spherical":
            th, ph = self.edges
            band = np.cos(th[:-1]) - np.cos(th[1:])
            return band[:, None] * np.diff(ph)[None, :]
        widths = [np.diff(e) for e in self.edges]
        out = widths[0]
        for w in widths[1:]:
            out = np.multiply.outer(out, w)
        return out

    def density(self) -> np.ndarray:
        """Counts per shot per unit measure; integrates to the particles per shot."""
        if self.total_shots == 0:
            return np.zeros(self.counts.shape)
        return self.counts / (self.total_shots * self.bin_areas())

    def conserved(self) -> bool:
        return int(self.counts.sum()) + self.out_of_range == self.total_shots * self.particles_per_shot


def cartesian_edges(extent: float, bins: int, dim: int) -> tuple:
    e = np.linspace(-extent, extent, bins + 1)
    return tuple(e.copy() for _ in range(dim))


def sphere_edges(n_theta: int, n_phi: int) -> tuple:
    """Equal-area (theta, phi) bins: uniform in cos(theta) and phi."""
    theta = np.arccos(np.linspace(1.0, -1.0, n_theta + 1))
    theta[0], theta[-1] = 0.0, np.pi
    phi = np.linspace(-np.pi, np.pi, n_phi + 1)
    return theta, phi


def mollweide_edges(nx: int, ny: int) -> tuple:
    return np.linspace(-2 * _SQRT2, 2 * _SQRT2, nx + 1), np.linspace(-_SQRT2, _SQRT2, ny + 1)


def _bin(coords: np.ndarray, edges: tuple):
    """Bin (N, k) coordinates; the top edge of each axis is closed."""
    counts, _ = np.histogramdd(coords, bins=edges)
    inside = np.ones(len(coords), dtype=bool)
    for ax, e in enumerate(edges):
        inside &= (coords[:, ax] >= e[0]) & (coords[:, ax] <= e[-1])
    return counts.astype(np.int64), int((~inside).sum())


def histogram(points, edges: tuple, projection: str = "cartesian",
              total_shots: int | None = None) -> HistogramGrid:
    """Histogram of particle positions.

    points is (shots, particles, d) or (N, d); in the latter case each row is
    one shot of one particle unless ``total_shots`` says otherwise. Sphere
    points are unit vectors and are binned in (theta, phi) or projected.
    """
    if projection not in PROJECTIONS:
        raise ValueError(f"unknown projection {projection!r}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 3:
        shots, per_shot = pts.shape[0], pts.shape[1]
        flat = pts.reshape(-1, pts.shape[-1])
    else:
        flat = pts.reshape(-1, pts.shape[-1]) if pts.size else np.zeros((0, len(edges)))
        shots = len(flat) if total_shots is None else total_shots
        per_shot = 1 if total_shots is None else (len(flat) // total_shots if total_shots else 0)
    if projection == "cartesian":
        coords = flat
    else:
        theta, phi = unit_to_angles(flat)
        if projection == "spherical":
            coords = np.column_stack([theta, phi])
        else:
            coords = np.column_stack(mollweide_project(theta, phi)) if len(flat) else np.zeros((0, 2))
    if coords.shape[1] != len(edges):
        raise ValueError(f"{coords.shape[1]}-d coordinates but {len(edges)} axes")
    if len(coords):
        counts, out = _bin(coords, edges)
    else:
        counts, out = np.zeros(tuple(len(e) - 1 for e in edges), dtype=np.int64), 0
    if total_shots is not None:
        shots = total_shots
    return HistogramGrid(tuple(np.asarray(e) for e in edges), projection, counts, shots, per_shot, out)
