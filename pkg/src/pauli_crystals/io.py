"""On-disk formats: patterns and manifests as JSON, shots and histograms as CSV.

Every file names its schema and version and the length unit (oscillator
length ``a`` or sphere radius ``R``). Loaders reject other versions. Writes go
to a temporary file in the target directory and are renamed into place.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .analysis.histogram import HistogramGrid
from .analysis.mollweide import angles_to_unit, unit_to_angles
from .optimizer import Pattern
from .orbitals import Geometry, GeometryKind
from .sampler import SamplerParams, ShotSet

__all__ = [
    "SCHEMA_VERSION",
    "SchemaError",
    "atomic_write",
    "git_blob_hash",
    "write_pattern",
    "read_pattern",
    "write_shots",
    "read_shots",
    "write_histogram",
    "read_histogram",
    "write_json",
    "write_field",
    "read_field",
]

SCHEMA_VERSION = 1
_PREFIX = "pauli-crystals/"


class SchemaError(ValueError):
    pass


def atomic_write(path: str | Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def git_blob_hash(path: str | Path) -> str:
    """Content hash as ``git hash-object`` computes it."""
    data = Path(path).read_bytes()
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def _check_schema(meta: dict, kind: str, path) -> None:
    if meta.get("schema") != _PREFIX + kind:
        raise SchemaError(f"{path}: expected schema {_PREFIX + kind}, found {meta.get('schema')!r}")
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema version {meta.get('schema_version')!r} is not supported "
            f"(this build reads version {SCHEMA_VERSION})"
        )


def _header(kind: str, geometry: Geometry) -> dict:
    return {
        "schema": _PREFIX + kind,
        "schema_version": SCHEMA_VERSION,
        "geometry": geometry.kind.value,
        "scale": geometry.scale,
        "units": geometry.unit_name,
    }


def write_json(path, obj: dict) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_pattern(path, pattern: Pattern, extra: dict | None = None) -> None:
    meta = _header("pattern", pattern.geometry)
    meta.update(
        n=pattern.n,
        points=[[float(v) for v in p] for p in pattern.points],
        log_density_at_max=float(pattern.log_density_at_max),
    )
    if pattern.restart_log_probs is not None:
        meta["restart_log_probs"] = [float(v) for v in pattern.restart_log_probs]
    if extra:
        meta.update(extra)
    write_json(path, meta)


def read_pattern(path) -> Pattern:
    meta = json.loads(Path(path).read_text(encoding="utf-8"))
    _check_schema(meta, "pattern", path)
    geom = Geometry(GeometryKind(meta["geometry"]), float(meta["scale"]))
    rl = meta.get("restart_log_probs")
    return Pattern(geom, np.array(meta["points"], dtype=float), float(meta["log_density_at_max"]),
                   None if rl is None else np.array(rl))


def _coord_names(geometry: Geometry) -> list[str]:
    if geometry.is_sphere:
        return ["theta", "phi"]
    return ["x", "y", "z"][: geometry.dim]


def write_shots(path, shots: ShotSet) -> None:
    """CSV: one '#' metadata line, a header row, then shot_id,particle_id,coords."""
    geom = shots.geometry
    meta = _header("shots", geom)
    meta.update(n_particles=shots.n_particles, n_shots=len(shots), n_chains=shots.n_chains,
                accept_rate=float(shots.accept_rate))
    if shots.params is not None:
        meta["sampler"] = shots.params.to_dict()
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write(",".join(["shot_id", "particle_id"] + _coord_names(geom)) + "\n")
    pts = shots.points
    if geom.is_sphere:
        theta, phi = unit_to_angles(pts)
        coords = np.stack([theta, phi], axis=-1)
    else:
        coords = pts
    s, n = pts.shape[:2]
    table = np.column_stack([
        np.repeat(np.arange(s), n), np.tile(np.arange(n), s), coords.reshape(s * n, -1)
    ])
    fmt = ["%d", "%d"] + ["%.17g"] * coords.shape[-1]
    np.savetxt(buf, table, fmt=fmt, delimiter=",", newline="\n")
    atomic_write(path, buf.getvalue())


def _read_meta_line(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise SchemaError(f"{path}: missing metadata line")
    return json.loads(first[2:])


def read_shots(path) -> ShotSet:
    meta = _read_meta_line(path)
    _check_schema(meta, "shots", path)
    geom = Geometry(GeometryKind(meta["geometry"]), float(meta["scale"]))
    n = int(meta["n_particles"])
    s = int(meta["n_shots"])
    ncoord = 2 if geom.is_sphere else geom.dim
    if s == 0:
        pts = np.zeros((0, n, geom.dim))
    else:
        table = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        coords = table[:, 2:2 + ncoord].reshape(s, n, ncoord)
        pts = angles_to_unit(coords[..., 0], coords[..., 1]) if geom.is_sphere else coords
    params = SamplerParams(**meta["sampler"]) if "sampler" in meta else None
    return ShotSet(geom, pts, params, float(meta.get("accept_rate", float("nan"))),
                   int(meta.get("n_chains", 1)))


def write_histogram(path, grid: HistogramGrid, geometry: Geometry, extra: dict | None = None) -> None:
    """Counts as a CSV grid (first axis down the rows) plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    counts = grid.counts.reshape(grid.counts.shape[0], -1) if grid.counts.ndim > 1 else grid.counts[None]
    buf = io.StringIO()
    np.savetxt(buf, counts, fmt="%d", delimiter=",", newline="\n")
    meta = _header("histogram", geometry)
    meta.update(
        projection=grid.projection,
        shape=list(grid.counts.shape),
        edges=[[float(v) for v in e] for e in grid.edges],
        total_shots=int(grid.total_shots),
        particles_per_shot=int(grid.particles_per_shot),
        out_of_range=int(grid.out_of_range),
    )
    if extra:
        meta.update(extra)
    atomic_write(path, buf.getvalue())
    write_json(path.with_name(path.name + ".json"), meta)


def read_histogram(path) -> HistogramGrid:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    _check_schema(meta, "histogram", path)
    counts = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2).reshape(meta["shape"])
    return HistogramGrid(tuple(np.array(e) for e in meta["edges"]), meta["projection"], counts,
                         meta["total_shots"], meta["particles_per_shot"], meta["out_of_range"])


def write_field(path, values: np.ndarray, edges: tuple, projection: str, geometry: Geometry,
                quantity: str, extra: dict | None = None) -> None:
    """A real-valued grid (e.g. an analytic density) in the histogram layout."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    rows = values.reshape(values.shape[0], -1) if values.ndim > 1 else values[None]
    buf = io.StringIO()
    np.savetxt(buf, rows, fmt="%.17g", delimiter=",", newline="\n")
    meta = _header("field", geometry)
    meta.update(quantity=quantity, projection=projection, shape=list(values.shape),
                edges=[[float(v) for v in e] for e in edges])
    if extra:
        meta.update(extra)
    atomic_write(path, buf.getvalue())
    write_json(path.with_name(path.name + ".json"), meta)


def read_field(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    _check_schema(meta, "field", path)
    values = np.loadtxt(path, delimiter=",", ndmin=2).reshape(meta["shape"])
    return values, meta
