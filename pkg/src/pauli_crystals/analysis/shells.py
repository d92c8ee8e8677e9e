"""Radial grouping of particles into geometric shells."""
from __future__ import annotations

import numpy as np

from ..wavefunction import Configuration

__all__ = ["detect_shells", "shell_counts", "shell_membership", "angular_gaps", "DEFAULT_GAP_FACTOR", "DEFAULT_MIN_GAP"]

DEFAULT_GAP_FACTOR = 3.0
DEFAULT_MIN_GAP = 0.25


def _radii(config) -> np.ndarray:
    if isinstance(config, Configuration):
        if config.geometry.is_sphere:
            raise ValueError("shell detection needs a trap geometry")
        pts = config.points
    else:
        pts = np.asarray(config, dtype=float)
    return np.linalg.norm(pts, axis=-1)


def _split(radii_sorted: np.ndarray, gap_factor: float, min_gap: float) -> list[int]:
    """Indices i where a new shell starts between sorted radii i-1 and i."""
    if len(radii_sorted) < 2:
        return []
    gaps = np.diff(radii_sorted)
    threshold = max(gap_factor * float(np.median(gaps)), min_gap)
    return [i + 1 for i, g in enumerate(gaps) if g > threshold]


def detect_shells(config, gap_factor: float = 3.0, min_gap: float = DEFAULT_MIN_GAP) -> list[tuple[float, int]]:
    """Per-shell (mean radius, count), innermost first.

    Sorted radii are split wherever the gap exceeds ``gap_factor`` times the
    median spacing. ``min_gap`` (units of a) is an absolute floor: outer
    shells of the 2D/3D crystals spread over ~0.08 a in radius, which a
    median-relative rule alone would split.
    The configuration is used as given; recenter it first if needed.
    """
    r = np.sort(_radii(config))
    cuts = [0] + _split(r, gap_factor, min_gap) + [len(r)]
    return [(float(r[a:b].mean()), b - a) for a, b in zip(cuts[:-1], cuts[1:])]


def shell_counts(config, gap_factor: float = 3.0, min_gap: float = DEFAULT_MIN_GAP) -> tuple[int, ...]:
    return tuple(c for _, c in detect_shells(config, gap_factor, min_gap))


def shell_membership(config, gap_factor: float = 3.0, min_gap: float = DEFAULT_MIN_GAP) -> list[np.ndarray]:
    """Particle indices of each shell, innermost first."""
    r = _radii(config)
    order = np.argsort(r, kind="stable")
    cuts = [0] + _split(r[order], gap_factor, min_gap) + [len(r)]
    return [order[a:b] for a, b in zip(cuts[:-1], cuts[1:])]


def angular_gaps(points) -> np.ndarray:
    """Gaps between consecutive polar angles of 2D points, going once around."""
    pts = np.asarray(points, dtype=float)
    ang = np.sort(np.arctan2(pts[:, 1], pts[:, 0]))
    return np.diff(np.append(ang, ang[0] + 2.0 * np.pi))
