"""Command-line front end.

    pauli [flags] basis-info | optimize | sample | recover | postselect | density

Every pipeline reads a JSON run config (``--config``) with flag overrides,
writes its files into ``--out`` and records a manifest with content hashes
of its inputs and outputs. Nothing time- or host-dependent is written, so
the same config and seed reproduce byte-identical files.

Exit codes: 0 ok, 2 config error, 3 missing or unreadable input,
4 empty post-selection, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis.alignment import align_rigid, recover_pattern
from .analysis.histogram import cartesian_edges, histogram, mollweide_edges, sphere_edges
from .analysis.mollweide import angles_to_unit, mollweide_inverse
from .analysis.postselection import EmptyPostselectionError, remaining_points, run_postselection
from .analysis.shells import detect_shells
from .config import ConfigError, RunConfig
from .io import (SchemaError, git_blob_hash, read_pattern, read_shots, write_field, write_histogram,
                 write_json, write_pattern, write_shots)
from .optimizer import anneal
from .orbitals import closed_shell_count, shell_sizes
from .sampler import ShotSet, run_chains
from .wavefunction import one_particle_density

log = logging.getLogger("pauli_crystals")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_EMPTY, EXIT_NUMERICAL = 0, 2, 3, 4, 5

PATTERN_FILE = "pattern.json"
SHOTS_FILE = "shots.csv"


class NumericalError(ArithmeticError):
    pass


class MissingInputError(FileNotFoundError):
    pass


# ---------------------------------------------------------------- config

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run config")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--geometry", choices=["1d", "2d", "3d", "sphere"])
    parser.add_argument("--shells", type=int, help="number of closed energy shells")
    parser.add_argument("--shots", type=int, help="number of single shots to sample")
    parser.add_argument("--sigma-window", type=float, help="post-selection window width")
    parser.add_argument("--choice-rule", help="first, random or manual:FILE")
    parser.add_argument("-v", "--verbose", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    """Flags are accepted before or after the subcommand."""
    parser = argparse.ArgumentParser(prog="pauli", description=__doc__.splitlines()[0])
    _add_common(parser)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    # subcommand copies must not overwrite values given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    _add_common(common)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "basis-info": "list orbitals, shell occupancies and closed-shell particle counts",
        "optimize": "find the most probable configuration (writes pattern.json)",
        "sample": "Metropolis single shots (writes shots.csv and the one-particle histogram)",
        "recover": "align shots to the pattern and histogram the aligned positions",
        "postselect": "successive post-selection on conditional maxima",
        "density": "analytic one-particle density on the histogram grid",
    }
    for name, text in helps.items():
        sub.add_parser(name, help=text, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        if not args.config.exists():
            raise MissingInputError(f"config file not found: {args.config}")
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig()
    top = {}
    for key in ("seed", "geometry", "shells"):
        if getattr(args, key) is not None:
            top[key] = getattr(args, key)
    if args.out is not None:
        top["out"] = str(args.out)
    if args.shots is not None:
        top["sampling"] = replace(cfg.sampling, shots=args.shots)
    analysis = {}
    if args.sigma_window is not None:
        analysis["sigma_window"] = args.sigma_window
    if args.choice_rule is not None:
        analysis["choice_rule"] = args.choice_rule
    if analysis:
        top["analysis"] = replace(cfg.analysis, **analysis)
    return replace(cfg, **top).validate()


# ---------------------------------------------------------------- helpers

class _Run:
    """Tracks inputs and outputs of one pipeline for the manifest."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out)
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def need(self, name: str) -> Path:
        path = self.out / name
        if not path.exists():
            raise MissingInputError(f"{path} not found; run the upstream subcommand first")
        self.inputs[name] = git_blob_hash(path)
        return path

    def wrote(self, *names: str) -> None:
        for name in names:
            self.outputs[name] = git_blob_hash(self.out / name)

    def wrote_grid(self, name: str) -> None:
        self.wrote(name, name + ".json")

    def finish(self, extra: dict | None = None) -> None:
        manifest = {
            "schema": "pauli-crystals/manifest",
            "schema_version": 1,
            "command": self.command,
            "package_version": __version__,
            "seed": self.cfg.seed,
            "config": self.cfg.to_dict(),
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        if extra:
            manifest.update(extra)
        write_json(self.out / f"manifest_{self.command}.json", manifest)


def _grid_edges(cfg: RunConfig):
    geom = cfg.geometry_obj
    if geom.is_sphere:
        return sphere_edges(cfg.analysis.n_theta, cfg.analysis.n_phi), "spherical"
    extent = cfg.analysis.extent * geom.scale
    return cartesian_edges(extent, cfg.analysis.bins, geom.dim), "cartesian"


def _write_mollweide(run: _Run, name: str, points: np.ndarray, geom) -> None:
    nx, ny = run.cfg.analysis.mollweide_bins
    grid = histogram(points, mollweide_edges(nx, ny), "mollweide")
    write_histogram(run.out / name, grid, geom)
    run.wrote_grid(name)


def _load_hints(rule: str, geom) -> list:
    path = Path(rule.split(":", 1)[1])
    if not path.exists():
        raise MissingInputError(f"manual choice file not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    raw = data["hints"] if isinstance(data, dict) else data
    hints = []
    for h in raw:
        if h is None:
            hints.append(None)
            continue
        h = np.asarray(h, dtype=float)
        if geom.is_sphere and h.shape == (2,):
            h = angles_to_unit(h[0], h[1])
        if h.shape != (geom.dim,):
            raise ConfigError(f"hint {h.tolist()} does not match a {geom.kind.value} point")
        hints.append(h)
    return hints


# ---------------------------------------------------------------- commands

def cmd_basis_info(cfg: RunConfig) -> int:
    basis = cfg.basis()
    kind = cfg.geometry_obj.kind
    sizes = shell_sizes(kind, cfg.shells)
    print(f"geometry: {kind.value} (scale {cfg.scale} {cfg.geometry_obj.unit_name})")
    print(f"closed shells: {cfg.shells}  particles: {basis.n}")
    print("shell occupancies: " + ", ".join(str(s) for s in sizes))
    print("closed-shell particle counts: "
          + ", ".join(str(closed_shell_count(kind, k)) for k in range(1, cfg.shells + 1)))
    label = "(l, m)" if cfg.geometry_obj.is_sphere else "quantum numbers"
    print(f"orbitals [{label}]:")
    for i, idx in enumerate(basis.indices):
        print(f"  {i:3d}  shell {basis.shell_of(idx)}  {tuple(idx)}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    run = _Run(cfg, "optimize")
    basis = cfg.basis()
    pattern = anneal(basis, cfg.schedule())
    if not np.isfinite(pattern.log_density_at_max):
        raise NumericalError("optimizer found no configuration with nonzero density")
    extra = {"restarts_at_best": pattern.restarts_at_best()}
    if not cfg.geometry_obj.is_sphere and cfg.geometry_obj.dim > 1:
        extra["shells"] = [{"radius": r, "count": c} for r, c in
                           detect_shells(pattern.points, cfg.analysis.gap_factor, cfg.analysis.min_gap)]
    write_pattern(run.out / PATTERN_FILE, pattern, extra)
    run.wrote(PATTERN_FILE)
    run.finish()
    print(f"log|Psi|^2 at maximum: {pattern.log_density_at_max:.10f}")
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    run = _Run(cfg, "sample")
    basis = cfg.basis()
    shots = run_chains(basis, cfg.sampler_params(), cfg.sampling.chains)
    shots = shots.subset(slice(0, cfg.sampling.shots))
    if not np.all(np.isfinite(shots.log_probs)):
        raise NumericalError("sampler produced configurations with zero density")
    write_shots(run.out / SHOTS_FILE, shots)
    run.wrote(SHOTS_FILE)
    edges, projection = _grid_edges(cfg)
    write_histogram(run.out / "hist_1p.csv", histogram(shots.points, edges, projection), basis.geometry)
    run.wrote_grid("hist_1p.csv")
    if basis.geometry.is_sphere:
        _write_mollweide(run, "hist_1p_mollweide.csv", shots.points, basis.geometry)
    run.finish({"accept_rate": shots.accept_rate})
    print(f"{len(shots)} shots, acceptance rate {shots.accept_rate:.3f}")
    return EXIT_OK


def _check_inputs(cfg: RunConfig, shots: ShotSet, pattern=None) -> None:
    geom = cfg.geometry_obj
    if shots.geometry != geom or shots.n_particles != cfg.basis().n:
        raise ConfigError("shots file does not match the configured geometry and shells")
    if pattern is not None and (pattern.geometry != geom or pattern.n != shots.n_particles):
        raise ConfigError("pattern file does not match the shots")


def cmd_recover(cfg: RunConfig) -> int:
    run = _Run(cfg, "recover")
    pattern = read_pattern(run.need(PATTERN_FILE))
    shots = read_shots(run.need(SHOTS_FILE))
    _check_inputs(cfg, shots, pattern)
    geom = shots.geometry
    a = cfg.analysis
    if geom.kind.value == "2d":
        grid, aligned = recover_pattern(shots, pattern.config, a.extent * geom.scale, a.recover_bins,
                                        a.r_min * geom.scale, a.gap_factor, a.min_gap * geom.scale,
                                        return_aligned=True)
    else:
        if geom.kind.value == "1d":
            # no continuous symmetry: ordering the particles is the alignment
            aligned = np.sort(shots.points, axis=1)
        else:
            aligned = np.array([
                align_rigid(c, pattern.config, a.rigid_starts, cfg.seed).aligned.points
                for c in shots.configs
            ]).reshape(shots.points.shape)
        edges, projection = _grid_edges(cfg)
        grid = histogram(aligned, edges, projection)
    write_histogram(run.out / "recovered.csv", grid, geom)
    run.wrote_grid("recovered.csv")
    if geom.is_sphere:
        _write_mollweide(run, "recovered_mollweide.csv", aligned, geom)
    # per-vertex centroids of the aligned positions
    centroids = aligned.mean(axis=0)
    if geom.is_sphere:
        centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    run.finish({"vertex_centroids": centroids.tolist()})
    return EXIT_OK


def cmd_postselect(cfg: RunConfig) -> int:
    run = _Run(cfg, "postselect")
    shots = read_shots(run.need(SHOTS_FILE))
    _check_inputs(cfg, shots)
    geom = shots.geometry
    rule = cfg.analysis.choice_rule
    choice = _load_hints(rule, geom) if rule.startswith("manual:") else rule
    edges, projection = _grid_edges(cfg)
    state, grids = run_postselection(shots, cfg.analysis.sigma_window, choice, edges, cfg.seed)
    for k, grid in enumerate(grids):
        name = f"stage_{k}.csv"
        write_histogram(run.out / name, grid, geom, {"stage": k, "shots": grid.total_shots})
        run.wrote_grid(name)
    if geom.is_sphere:
        _write_mollweide(run, "stage_0_mollweide.csv", shots.points, geom)
    survivors = histogram(state.shots.points, edges, projection)
    write_histogram(run.out / "survivors.csv", survivors, geom)
    run.wrote_grid("survivors.csv")
    if geom.is_sphere:
        _write_mollweide(run, "survivors_mollweide.csv", state.shots.points, geom)
    assert remaining_points(state).shape[1] == 0
    run.finish({
        "selected_maxima": [m.tolist() for m in state.selected_maxima],
        "survivors_per_stage": state.survivors_per_stage,
    })
    print("survivors per stage: " + " ".join(str(s) for s in state.survivors_per_stage))
    return EXIT_OK


def cmd_density(cfg: RunConfig) -> int:
    run = _Run(cfg, "density")
    basis = cfg.basis()
    geom = basis.geometry
    edges, projection = _grid_edges(cfg)
    centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
    mesh = np.meshgrid(*centers, indexing="ij")
    if geom.is_sphere:
        pts = angles_to_unit(mesh[0], mesh[1])
    else:
        pts = np.stack(mesh, axis=-1)
    dens = one_particle_density(basis, pts)
    write_field(run.out / "density.csv", dens, edges, projection, geom, "one_particle_density")
    run.wrote_grid("density.csv")
    if geom.is_sphere:
        nx, ny = cfg.analysis.mollweide_bins
        medges = mollweide_edges(nx, ny)
        mx, my = np.meshgrid(*[0.5 * (e[1:] + e[:-1]) for e in medges], indexing="ij")
        inside = (mx / 2.0) ** 2 + my**2 <= 2.0
        th, ph = mollweide_inverse(np.where(inside, mx, 0.0), np.where(inside, my, 0.0))
        mdens = np.where(inside, one_particle_density(basis, angles_to_unit(th, ph)), 0.0)
        write_field(run.out / "density_mollweide.csv", mdens, medges, "mollweide", geom,
                    "one_particle_density")
        run.wrote_grid("density_mollweide.csv")
    run.finish()
    return EXIT_OK


COMMANDS = {
    "basis-info": cmd_basis_info,
    "optimize": cmd_optimize,
    "sample": cmd_sample,
    "recover": cmd_recover,
    "postselect": cmd_postselect,
    "density": cmd_density,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            cfg = resolve_config(args)
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err)) from None
        return COMMANDS[args.command](cfg)
    except SchemaError as err:
        print(f"unreadable input: {err}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"missing input: {err}", file=sys.stderr)
        return EXIT_MISSING
    except EmptyPostselectionError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_EMPTY
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
