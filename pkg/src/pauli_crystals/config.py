"""Run configuration shared by the CLI pipelines and the scripts."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .optimizer import AnnealSchedule
from .orbitals import Geometry, GeometryKind, build_basis
from .sampler import SamplerParams

__all__ = ["SamplingConfig", "AnalysisConfig", "RunConfig", "ConfigError"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    shots: int = 100_000
    chains: int = 100
    step_sigma: float = 0.25
    burn_in: int = 10_000
    thin: int = 10
    single_particle: bool = False

    def params(self, seed: int) -> SamplerParams:
        per_chain = math.ceil(self.shots / self.chains)
        return SamplerParams(
            step_sigma=self.step_sigma,
            burn_in=self.burn_in,
            thin=self.thin,
            n_steps=self.burn_in + per_chain * self.thin,
            seed=seed,
            single_particle=self.single_particle,
        )


@dataclass(frozen=True)
class AnalysisConfig:
    sigma_window: float = 0.2
    choice_rule: str = "first"
    gap_factor: float = 3.0
    min_gap: float = 0.25
    r_min: float = 0.05
    extent: float = 3.0
    bins: int = 60
    n_theta: int = 24
    n_phi: int = 48
    mollweide_bins: tuple = (96, 48)
    recover_bins: int = 120
    rigid_starts: int = 8


@dataclass(frozen=True)
class RunConfig:
    geometry: str = "2d"
    scale: float = 1.0
    shells: int = 2
    seed: int = 0
    out: str = "out"
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def validate(self) -> "RunConfig":
        try:
            GeometryKind(self.geometry)
        except ValueError:
            raise ConfigError(f"unknown geometry {self.geometry!r}; use 1d, 2d, 3d or sphere") from None
        if not self.scale > 0:
            raise ConfigError("scale must be positive")
        if not isinstance(self.shells, int) or not 1 <= self.shells <= 8:
            raise ConfigError(f"shells must be an integer in 1..8, got {self.shells!r}")
        if self.sampling.shots < 1 or self.sampling.chains < 1:
            raise ConfigError("shots and chains must be positive")
        if not self.analysis.sigma_window > 0:
            raise ConfigError("sigma_window must be positive")
        rule = self.analysis.choice_rule
        if rule not in ("first", "random") and not rule.startswith("manual:"):
            raise ConfigError(f"choice rule must be first, random or manual:FILE, got {rule!r}")
        return self

    @property
    def geometry_obj(self) -> Geometry:
        return Geometry(GeometryKind(self.geometry), self.scale)

    def basis(self):
        return build_basis(self.geometry_obj, self.shells)

    def schedule(self) -> AnnealSchedule:
        return replace(self.anneal, seed=self.seed)

    def sampler_params(self) -> SamplerParams:
        return self.sampling.params(self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["analysis"]["mollweide_bins"] = list(self.analysis.mollweide_bins)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        parts = {"sampling": SamplingConfig, "anneal": AnnealSchedule, "analysis": AnalysisConfig}
        for key, typ in parts.items():
            if key in data:
                sub = dict(data[key])
                bad = set(sub) - {f.name for f in fields(typ)}
                if bad:
                    raise ConfigError(f"unknown {key} keys: {sorted(bad)}")
                if key == "analysis" and "mollweide_bins" in sub:
                    sub["mollweide_bins"] = tuple(sub["mollweide_bins"])
                try:
                    data[key] = typ(**sub)
                except (TypeError, ValueError) as err:
                    raise ConfigError(f"bad {key} section: {err}") from None
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
        return cls.from_dict(data)
