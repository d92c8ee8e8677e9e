"""Most probable configurations for the reference systems: shells, regularity, timing.

    python scripts/crystals.py [--seed 0] [--out results/crystals.json]
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from pauli_crystals import AnnealSchedule, Geometry, GeometryKind, anneal, build_basis
from pauli_crystals.analysis import angular_gaps, detect_shells, shell_membership

SYSTEMS = [("1d", 2), ("2d", 2), ("2d", 3), ("2d", 4), ("2d", 5), ("3d", 3), ("3d", 4),
           ("sphere", 2), ("sphere", 3), ("sphere", 4)]


def describe(pattern) -> dict:
    pts = pattern.points
    row = {"n": pattern.n, "log_density": pattern.log_density_at_max,
           "restarts_at_best": pattern.restarts_at_best()}
    if pattern.geometry.is_sphere:
        dots = (pts @ pts.T)[np.triu_indices(len(pts), 1)]
        row["min_angle"] = float(np.arccos(dots.max()))
        row["max_angle"] = float(np.arccos(dots.min()))
    elif pattern.geometry.dim == 1:
        row["positions"] = np.sort(pts.ravel()).tolist()
    else:
        pts = pts - pts.mean(axis=0)
        row["shell_structure"] = [{"radius": r, "count": c} for r, c in detect_shells(pts)]
        if pattern.geometry.dim == 2:
            outer = pts[shell_membership(pts)[-1]]
            row["outer_gap_error"] = float(np.abs(angular_gaps(outer) - 2 * np.pi / len(outer)).max())
    return row


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("results/crystals.json"))
    args = parser.parse_args()
    rows = []
    for kind, shells in SYSTEMS:
        basis = build_basis(Geometry(GeometryKind(kind)), shells)
        t0 = time.perf_counter()
        pattern = anneal(basis, AnnealSchedule(seed=args.seed))
        row = {"geometry": kind, "shells": shells, "seconds": time.perf_counter() - t0, **describe(pattern)}
        rows.append(row)
        counts = [s["count"] for s in row.get("shell_structure", [])]
        print(f"{kind:6s} n={row['n']:2d}  shells {counts or '-'}  {row['seconds']:.1f} s")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
