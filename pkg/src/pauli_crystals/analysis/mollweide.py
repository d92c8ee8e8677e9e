"""Equal-area Mollweide projection of the unit sphere (polar angle convention)."""
from __future__ import annotations

import numpy as np

__all__ = ["mollweide_project", "mollweide_inverse", "unit_to_angles", "angles_to_unit", "wrap_angle"]

_SQRT2 = np.sqrt(2.0)


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def unit_to_angles(r: np.ndarray):
    """Unit vectors -> (theta in [0, pi], phi in (-pi, pi])."""
    r = np.asarray(r, dtype=float)
    theta = np.arccos(np.clip(r[..., 2], -1.0, 1.0))
    phi = wrap_angle(np.arctan2(r[..., 1], r[..., 0]))
    return theta, phi


def angles_to_unit(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _auxiliary_angle(theta: np.ndarray, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Solve 2 psi + sin(2 psi) = pi cos(theta) by Newton iteration."""
    target = np.pi * np.cos(theta)
    lat = np.pi / 2 - theta
    psi = lat.copy()
    for _ in range(max_iter):
        f = 2.0 * psi + np.sin(2.0 * psi) - target
        fp = 2.0 + 2.0 * np.cos(2.0 * psi)
        # near the poles fp -> 0; the root there is psi = +-pi/2 exactly
        safe = fp > 1e-15
        delta = np.where(safe, f / np.where(safe, fp, 1.0), 0.0)
        psi = np.clip(psi - delta, -np.pi / 2, np.pi / 2)
        if np.all(np.abs(delta) < tol):
            break
    return psi


def mollweide_project(theta, phi):
    """(theta, phi) -> (x, y) with x in [-2 sqrt2, 2 sqrt2], y in [-sqrt2, sqrt2].

    The ellipse has area 4 pi, so projected areas equal solid angles.
    """
    theta = np.asarray(theta, dtype=float)
    phi = wrap_angle(phi)
    psi = _auxiliary_angle(theta)
    x = (2.0 * _SQRT2 / np.pi) * phi * np.cos(psi)
    y = _SQRT2 * np.sin(psi)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def mollweide_inverse(x, y):
    """(x, y) -> (theta, phi); inverse of :func:`mollweide_project` inside the ellipse."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    psi = np.arcsin(np.clip(y / _SQRT2, -1.0, 1.0))
    cpsi = np.cos(psi)
    phi = np.where(cpsi > 0, np.pi * x / (2.0 * _SQRT2 * np.where(cpsi > 0, cpsi, 1.0)), 0.0)
    lat = np.arcsin(np.clip((2.0 * psi + np.sin(2.0 * psi)) / np.pi, -1.0, 1.0))
    theta = np.pi / 2 - lat
    if theta.ndim == 0:
        return float(theta), float(phi)
    return theta, phi
