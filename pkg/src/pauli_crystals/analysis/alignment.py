"""Pattern recovery: match single shots to a reference crystal.

In 2D a shot is recentered, each particle is assigned to a pattern vertex,
and a rigid rotation minimizes the summed squared angular differences
    d = sum_i wrap(phi_shot[sigma(i)] - phi_pattern[i] - alpha)^2 .
Angles near the trap center are ill-defined, so particles closer than
``r_min`` to the center are left out of the sum and matched by radius only.
The assignment search runs over cyclic, angle-order-preserving assignments
within each radial shell of the pattern.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..wavefunction import Configuration
from .histogram import HistogramGrid, cartesian_edges, histogram
from .mollweide import wrap_angle
from .shells import DEFAULT_MIN_GAP, shell_membership

__all__ = [
    "AlignmentResult",
    "recenter",
    "rotation_2d",
    "optimal_rotation_angle",
    "match_permutation_2d",
    "match_permutation_exhaustive",
    "align_batch_2d",
    "recover_pattern",
    "align_rigid",
]


@dataclass(eq=False)
class AlignmentResult:
    """``permutation[i]`` is the shot particle assigned to pattern vertex i.

    ``rotation`` is the angle (2D) or 3x3 matrix taking the pattern frame to
    the shot, so ``aligned`` = rotation^-1 applied to the recentered shot,
    reordered to pattern order.
    """

    permutation: np.ndarray
    rotation: float | np.ndarray
    distance: float
    aligned: Configuration


def recenter(config: Configuration) -> Configuration:
    """Shift so the center of mass sits at the trap center."""
    if config.geometry.is_sphere:
        raise ValueError("recentering is undefined on the sphere")
    pts = config.points - config.points.mean(axis=0)
    return config.with_points(pts)


def rotation_2d(alpha) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def _rotate_2d(points: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Rotate (S, n, 2) points by per-shot angles alpha (S,)."""
    c = np.cos(alpha)[:, None]
    s = np.sin(alpha)[:, None]
    x, y = points[..., 0], points[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def optimal_rotation_angle(diffs: np.ndarray, weights: np.ndarray | None = None,
                           n_iter: int = 50):
    """Minimize sum w * wrap(diffs - alpha)^2 over alpha, row-wise.

    diffs is (S, m). Starts at the circular mean and iterates the exact
    minimizer of the current wrapping branch, alpha += weighted mean of the
    wrapped residuals. Returns (alpha, distance).
    """
    diffs = np.atleast_2d(diffs)
    w = np.ones_like(diffs) if weights is None else np.broadcast_to(weights, diffs.shape)
    wsum = w.sum(axis=1)
    has = wsum > 0
    safe = np.where(has, wsum, 1.0)
    alpha = np.arctan2((w * np.sin(diffs)).sum(axis=1), (w * np.cos(diffs)).sum(axis=1))
    for _ in range(n_iter):
        res = wrap_angle(diffs - alpha[:, None])
        step = (w * res).sum(axis=1) / safe
        alpha = wrap_angle(alpha + step)
        if np.all(np.abs(step) < 1e-15):
            break
    res = wrap_angle(diffs - alpha[:, None])
    dist = (w * res * res).sum(axis=1)
    alpha = np.where(has, alpha, 0.0)
    return alpha, dist


def _pattern_layout(pattern: np.ndarray, gap_factor: float, min_gap: float):
    """Pattern vertices grouped by shell and sorted by angle within each shell."""
    shells = shell_membership(pattern, gap_factor, min_gap)
    ang = np.arctan2(pattern[:, 1], pattern[:, 0])
    return [s[np.argsort(ang[s], kind="stable")] for s in shells]


TIE_TOL = 1e-6


def _pick(dist: np.ndarray, alpha: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Per row, the candidate of smallest |alpha| among those within ``tol``
    of the smallest distance. ``dist`` and ``alpha`` are (S, candidates).

    A k-fold symmetric pattern always has k tied solutions differing by
    2 pi / k in alpha. Picking by search order would tie the labels to the
    shot's absolute angles and hence to its shape, which skews the lobes of
    the recovered density; |alpha| depends only on the shot's orientation.
    Choosing from the full candidate set also makes realignment of an
    aligned shot return alpha = 0.
    """
    lo = dist.min(axis=1, keepdims=True)
    near = dist <= lo + tol * np.maximum(1.0, lo)
    return np.argmin(np.where(near, np.abs(alpha), np.inf), axis=1)


def align_batch_2d(points: np.ndarray, pattern: np.ndarray, r_min: float = 0.05,
                   gap_factor: float = 3.0, min_gap: float = DEFAULT_MIN_GAP):
    """Vectorized 2D matching of many shots (S, n, 2) to one pattern (n, 2).

    Returns (perm (S, n), alpha (S,), distance (S,), centered points).
    """
    pts = np.asarray(points, dtype=float)
    pattern = np.asarray(pattern, dtype=float)
    pattern = pattern - pattern.mean(axis=0)
    nshot, n, _ = pts.shape
    pts = pts - pts.mean(axis=1, keepdims=True)
    layout = _pattern_layout(pattern, gap_factor, min_gap)
    sizes = [len(s) for s in layout]

    # shot particles split into shells by radius rank, then sorted by angle
    r = np.linalg.norm(pts, axis=-1)
    ang = np.arctan2(pts[..., 1], pts[..., 0])
    order = np.argsort(r, axis=1, kind="stable")
    shot_shells = []
    start = 0
    rows = np.arange(nshot)[:, None]
    for k in sizes:
        idx = order[:, start:start + k]
        by_angle = np.argsort(ang[rows, idx], axis=1, kind="stable")
        shot_shells.append(idx[rows, by_angle])
        start += k

    pat_r = np.linalg.norm(pattern, axis=-1)
    pat_ang = np.arctan2(pattern[:, 1], pattern[:, 0])
    pat_order = np.concatenate(layout)

    # a shell whose pattern vertices are all near the center needs no cyclic search
    shifts = [range(k) if np.any(pat_r[s] >= r_min) else range(1) for k, s in zip(sizes, layout)]
    combos = list(itertools.product(*shifts))

    def assignment(combo):
        # column j holds the shot particle for pattern vertex pat_order[j]
        return np.concatenate([np.roll(sh, -c, axis=1) for sh, c in zip(shot_shells, combo)], axis=1)

    all_dist = np.empty((nshot, len(combos)))
    all_alpha = np.empty((nshot, len(combos)))
    for c, combo in enumerate(combos):
        assigned = assignment(combo)
        diffs = ang[rows, assigned] - pat_ang[pat_order][None, :]
        weights = ((r[rows, assigned] >= r_min) & (pat_r[pat_order] >= r_min)[None, :]).astype(float)
        all_alpha[:, c], all_dist[:, c] = optimal_rotation_angle(diffs, weights)
    choice = _pick(all_dist, all_alpha)
    best_dist = all_dist[np.arange(nshot), choice]
    best_alpha = all_alpha[np.arange(nshot), choice]
    best_perm = np.zeros((nshot, n), dtype=int)
    for c in np.unique(choice):
        sel = choice == c
        perm = np.empty((int(sel.sum()), n), dtype=int)
        perm[:, pat_order] = assignment(combos[c])[sel]
        best_perm[sel] = perm
    return best_perm, best_alpha, best_dist, pts


def match_permutation_2d(config: Configuration, pattern: Configuration, r_min: float = 0.05,
                         gap_factor: float = 3.0, min_gap: float = DEFAULT_MIN_GAP) -> AlignmentResult:
    if config.geometry.dim != 2 or pattern.geometry.dim != 2 or config.geometry.is_sphere:
        raise ValueError("match_permutation_2d needs 2D trap configurations")
    if config.n != pattern.n:
        raise ValueError("particle counts differ")
    perm, alpha, dist, centered = align_batch_2d(
        config.points[None], pattern.points, r_min, gap_factor, min_gap
    )
    aligned = _rotate_2d(centered, -alpha)[0][perm[0]]
    return AlignmentResult(perm[0], float(alpha[0]), float(dist[0]), config.with_points(aligned))


def match_permutation_exhaustive(config: Configuration, pattern: Configuration,
                                 r_min: float = 0.05, within_shells: bool = False,
                                 gap_factor: float = 3.0, min_gap: float = DEFAULT_MIN_GAP) -> AlignmentResult:
    """Brute-force search over all n! assignments (n <= 8), or over all
    shell-preserving ones with ``within_shells``; each with the exact optimal
    rotation found by restarting the angle search from every residual."""
    n = config.n
    if n > 8 and not within_shells:
        raise ValueError("exhaustive search is limited to n <= 8")
    pts = config.points - config.points.mean(axis=0)
    pat = pattern.points - pattern.points.mean(axis=0)
    r, pr = np.linalg.norm(pts, axis=1), np.linalg.norm(pat, axis=1)
    ang, pang = np.arctan2(pts[:, 1], pts[:, 0]), np.arctan2(pat[:, 1], pat[:, 0])
    if within_shells:
        layout = shell_membership(pat, gap_factor, min_gap)
        order = np.argsort(r, kind="stable")
        groups, start = [], 0
        for s in layout:
            groups.append((s, order[start:start + len(s)]))
            start += len(s)
        perms = []
        for choice in itertools.product(*[itertools.permutations(g) for _, g in groups]):
            p = np.empty(n, dtype=int)
            for (s, _), c in zip(groups, choice):
                p[s] = c
            perms.append(p)
        perms = np.array(perms)
    else:
        perms = np.array(list(itertools.permutations(range(n))))
    diffs = ang[perms] - pang[None, :]
    w = ((r[perms] >= r_min) & (pr >= r_min)[None, :]).astype(float)
    # every local minimum of the piecewise quadratic is reached from some residual
    cand_d, cand_a, cand_p = [], [], []
    for j in range(n):
        alpha = diffs[:, j].copy()
        for _ in range(60):
            res = wrap_angle(diffs - alpha[:, None])
            step = (w * res).sum(1) / np.maximum(w.sum(1), 1e-300)
            alpha = wrap_angle(alpha + step)
        res = wrap_angle(diffs - alpha[:, None])
        cand_d.append((w * res * res).sum(1))
        cand_a.append(alpha)
        cand_p.append(np.arange(len(perms)))
    d_all, a_all = np.concatenate(cand_d)[None], np.concatenate(cand_a)[None]
    k = int(_pick(d_all, a_all)[0])
    best = (float(d_all[0, k]), float(a_all[0, k]), perms[np.concatenate(cand_p)[k]])
    dist, alpha, perm = best
    aligned = (pts @ rotation_2d(-alpha).T)[perm]
    return AlignmentResult(perm, alpha, dist, config.with_points(aligned))


def recover_pattern(shots, pattern: Configuration, extent: float = 3.0, bins: int = 120,
                    r_min: float = 0.05, gap_factor: float = 3.0,
                    min_gap: float = DEFAULT_MIN_GAP, return_aligned: bool = False):
    """Align every 2D shot to ``pattern`` and histogram the aligned positions."""
    pts = shots.points if hasattr(shots, "points") else np.asarray(shots, dtype=float)
    if pts.ndim != 3 or pts.shape[-1] != 2:
        raise ValueError("recover_pattern needs 2D shots of shape (shots, n, 2)")
    edges = cartesian_edges(extent, bins, 2)
    if len(pts) == 0:
        grid = histogram(np.zeros((0, pattern.n, 2)), edges)
        return (grid, pts) if return_aligned else grid
    aligned_all = []
    chunk = 20_000
    for a in range(0, len(pts), chunk):
        perm, alpha, _, centered = align_batch_2d(pts[a:a + chunk], pattern.points, r_min,
                                                  gap_factor, min_gap)
        rot = _rotate_2d(centered, -alpha)
        aligned_all.append(np.take_along_axis(rot, perm[..., None], axis=1))
    aligned = np.concatenate(aligned_all)
    grid = histogram(aligned, edges)
    return (grid, aligned) if return_aligned else grid


def _kabsch(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Proper rotation R minimizing sum |R src_i - dst_i|^2."""
    h = src.T @ dst
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    return vt.T @ np.diag([1.0] * (src.shape[1] - 1) + [d]) @ u.T


EXACT_RIGID_MAX_N = 6


def _rigid_exhaustive(pts: np.ndarray, pat: np.ndarray):
    """Optimal rotation for every assignment at once (batched Kabsch)."""
    n = len(pts)
    perms = np.array(list(itertools.permutations(range(n))))
    src = pat[None].repeat(len(perms), axis=0)
    dst = pts[perms]
    h = np.einsum("pni,pnj->pij", src, dst)
    u, _, vt = np.linalg.svd(h)
    v = np.swapaxes(vt, 1, 2)
    d = np.sign(np.linalg.det(v @ np.swapaxes(u, 1, 2)))
    fix = np.ones((len(perms), 3))
    fix[:, -1] = d
    rots = v @ (fix[:, :, None] * np.swapaxes(u, 1, 2))
    # rot maps pattern -> shot, so the shot is brought back by x @ rot
    back = np.einsum("pni,pij->pnj", dst, rots)
    dist = ((back - src) ** 2).sum(axis=(1, 2))
    k = int(np.argmin(dist))
    return float(dist[k]), rots[k], perms[k]


def align_rigid(config: Configuration, pattern: Configuration, n_starts: int = 24,
                seed: int = 0, max_iter: int = 50) -> AlignmentResult:
    """3D trap or sphere matching: summed squared distances minimized over
    rotations and assignments. Up to ``EXACT_RIGID_MAX_N`` particles every
    assignment gets its Kabsch rotation; beyond that Hungarian assignment and
    Kabsch alternate from several starting rotations. Trap shots are
    recentered first."""
    from scipy.spatial.transform import Rotation

    geom = config.geometry
    if geom.dim != 3:
        raise ValueError("align_rigid needs 3D trap or sphere configurations")
    pts = config.points if geom.is_sphere else config.points - config.points.mean(axis=0)
    pat = pattern.points if geom.is_sphere else pattern.points - pattern.points.mean(axis=0)
    if config.n <= EXACT_RIGID_MAX_N:
        best = _rigid_exhaustive(pts, pat)
        starts = []
    else:
        starts = [np.eye(3)] + list(Rotation.random(n_starts - 1, random_state=seed).as_matrix())
        best = (np.inf, None, None)
    for rot in starts:
        perm = None
        for _ in range(max_iter):
            moved = pts @ rot  # rot maps pattern frame -> shot frame; rot^T brings shot back
            cost = ((pat[:, None, :] - moved[None, :, :]) ** 2).sum(-1)
            _, new_perm = linear_sum_assignment(cost)
            if perm is not None and np.array_equal(new_perm, perm):
                break
            perm = new_perm
            rot = _kabsch(pat, pts[perm])
        moved = pts @ rot
        dist = float(((moved[perm] - pat) ** 2).sum())
        if dist < best[0]:
            best = (dist, rot, perm)
    dist, rot, perm = best
    aligned = (pts @ rot)[perm]
    if geom.is_sphere:
        aligned /= np.linalg.norm(aligned, axis=1, keepdims=True)
    return AlignmentResult(np.asarray(perm), rot, dist, config.with_points(aligned))
