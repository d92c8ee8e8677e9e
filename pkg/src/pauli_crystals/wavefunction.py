"""Slater-determinant probability density and one-particle density.

The log density omits the configuration-independent ``log(1/n!)`` term of the
normalized determinant; all downstream uses (Metropolis ratios, maxima,
conditional densities) depend only on ratios.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .orbitals import Geometry, OrbitalBasis, orbital_values

__all__ = [
    "Configuration",
    "PIVOT_FLOOR",
    "slater_matrix",
    "log_prob",
    "log_prob_batch",
    "logabsdet",
    "one_particle_density",
]

PIVOT_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Configuration:
    """Positions of all n particles from one simultaneous measurement.

    Trap points are d-vectors in the same length units as ``geometry.scale``;
    sphere points are unit 3-vectors.
    """

    geometry: Geometry
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1 and self.geometry.dim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != self.geometry.dim:
            raise ValueError(
                f"{self.geometry.kind.value} configuration needs shape (n, {self.geometry.dim}), "
                f"got {pts.shape}"
            )
        if self.geometry.is_sphere:
            norms = np.linalg.norm(pts, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("sphere points must be unit vectors")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def with_points(self, points) -> "Configuration":
        return Configuration(self.geometry, points)


def _check(basis: OrbitalBasis, config: Configuration):
    if config.geometry != basis.geometry:
        raise ValueError(f"geometry mismatch: {config.geometry} vs {basis.geometry}")
    if config.n != basis.n:
        raise ValueError(f"basis has {basis.n} orbitals but configuration has {config.n} particles")


def slater_matrix(basis: OrbitalBasis, config: Configuration) -> np.ndarray:
    """Matrix with entry (k, j) = psi_k(x_j)."""
    _check(basis, config)
    return orbital_values(basis, config.points).T


@numba.njit(cache=True)
def _lu_logabsdet(a, out):
    nb, n, _ = a.shape
    for b in range(nb):
        m = a[b]
        acc = 0.0
        for k in range(n):
            p = k
            best = abs(m[k, k])
            for i in range(k + 1, n):
                v = abs(m[i, k])
                if v > best:
                    best = v
                    p = i
            if best < PIVOT_FLOOR:
                acc = -np.inf
                break
            if p != k:
                for j in range(k, n):
                    tmp = m[k, j]
                    m[k, j] = m[p, j]
                    m[p, j] = tmp
            acc += np.log(best)
            piv = m[k, k]
            for i in range(k + 1, n):
                if m[i, k] == piv:
                    # exact 1 so a duplicated row cancels exactly (complex a/a may not)
                    f = piv * 0 + 1
                else:
                    f = m[i, k] / piv
                if f != 0:
                    for j in range(k + 1, n):
                        m[i, j] -= f * m[k, j]
        out[b] = acc


def logabsdet(mats: np.ndarray) -> np.ndarray:
    """log|det| of a stack of square matrices by LU with partial pivoting.

    Log-magnitudes of the pivots are accumulated directly so the determinant
    itself never under- or overflows. A pivot below ``PIVOT_FLOOR`` gives -inf.
    """
    a = np.array(mats, copy=True)
    if not np.iscomplexobj(a):
        a = a.astype(np.float64)
    squeeze = a.ndim == 2
    if squeeze:
        a = a[None]
    a = np.ascontiguousarray(a)
    out = np.empty(a.shape[0])
    _lu_logabsdet(a, out)
    return out[0] if squeeze else out


def log_prob_batch(basis: OrbitalBasis, points: np.ndarray) -> np.ndarray:
    """log|Psi|^2 (up to the 1/n! constant) for a stack of configurations.

    points has shape (B, n, d). Rows of the factorized matrix are particles,
    so two coincident particles give two identical rows, which partial
    pivoting eliminates to an exact zero.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[-2] != basis.n:
        raise ValueError(f"basis has {basis.n} orbitals but got {points.shape[-2]} particles")
    if not np.all(np.isfinite(points)):
        raise FloatingPointError("non-finite coordinates")
    mats = orbital_values(basis, points)
    return 2.0 * logabsdet(mats)


def log_prob(basis: OrbitalBasis, config: Configuration) -> float:
    _check(basis, config)
    return float(log_prob_batch(basis, config.points[None])[0])


def one_particle_density(basis: OrbitalBasis, point) -> np.ndarray | float:
    """rho(x) = (1/n) sum_k |psi_k(x)|^2, normalized to unit integral.

    Accepts a single point or an array of points with trailing coordinate axis.
    On the sphere the density is per unit area of the sphere of radius R.
    """
    point = np.asarray(point, dtype=float)
    geom = basis.geometry
    if geom.dim == 1 and (point.ndim == 0 or point.shape[-1] != 1):
        point = point[..., None]
    vals = orbital_values(basis, point)
    rho = np.sum(np.abs(vals) ** 2, axis=-1) / basis.n
    return float(rho) if rho.ndim == 0 else rho
