"""Experiment configuration: a flat INI file with sections.

The config is the complete provenance of a run: model, deviation level,
grids, budgets, series depths, seed, worker count.  It round-trips through
text losslessly and its content hash is embedded in every output file.
Only the seed may be overridden from outside the file (CLI flag).
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import PhiSpec
from .offspring import EnvironmentModel, make_family
from .stable import StableParams


class ConfigError(ValueError):
    pass


def _geometric_grid(z_min: float, z_max: float, per_octave: int) -> np.ndarray:
    n_oct = math.log2(z_max / z_min)
    count = int(round(n_oct * per_octave)) + 1
    return np.concatenate([[0.0], np.geomspace(z_min, z_max, count)])


@dataclass(frozen=True)
class ExperimentConfig:
    # model
    alpha: float = 1.5
    beta: float = 0.0
    c: float = 1.0
    family: str = "geometric"
    family_shape: float | None = None
    # deviation level
    phi_form: str = "power"
    phi_gamma: float = 1.0
    phi_eta: float = 0.4
    # experiment
    n_list: tuple = (64, 128, 256)
    # renewal-table grids
    v_grid_min: float = 0.0625
    v_grid_max: float = 128.0
    v_points_per_octave: int = 4
    u_grid_min: float = 0.0625
    u_grid_max: float = 512.0
    u_points_per_octave: int = 4
    n_max: int = 512
    slope_n_max: int = 32768
    # budgets (paths)
    paths_tables: int = 1_000_000
    paths_joint: int = 10_000_000
    paths_walk: int = 10_000_000
    paths_survival: int = 1_000_000
    paths_conditioned: int = 2_000_000
    paths_tower: int = 1_000_000
    paths_theta_population: int = 1_000_000
    paths_theta_plus: int = 300_000
    paths_selfcheck: int = 200_000
    # series depths
    theta_j_max: int = 8
    theta_k_max: int = 32
    theta_m_max: int = 512
    theta_m_tol: float = 1e-3
    population_cap: int = 10**12
    # gates
    flatness_tolerance: float = 1.3
    survival_flatness_tolerance: float = 1.15
    ratio_variation_tolerance: float = 0.15
    gate_z: float = 3.0
    # run
    seed: int = 20240801
    workers: int = 1

    # ------------------------------------------------------------------
    def stable_params(self) -> StableParams:
        return StableParams(self.alpha, self.beta, self.c)

    def model(self) -> EnvironmentModel:
        return EnvironmentModel(stable=self.stable_params(),
                                family_name=self.family,
                                family_shape=self.family_shape)

    def phi(self) -> PhiSpec:
        return PhiSpec(self.phi_form, self.phi_gamma, self.phi_eta)

    def v_grid(self) -> np.ndarray:
        return _geometric_grid(self.v_grid_min, self.v_grid_max, self.v_points_per_octave)

    def u_grid(self) -> np.ndarray:
        return _geometric_grid(self.u_grid_min, self.u_grid_max, self.u_points_per_octave)

    def validate(self) -> None:
        params = self.stable_params()  # admissibility of (alpha, beta), c > 0
        if not params.b1_strict:
            raise ConfigError("environment driver requires |beta| < 1")
        make_family(self.family, self.family_shape)
        phi = self.phi()
        try:
            phi.validate_for(self.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.n_list:
            raise ConfigError("n_list must be nonempty")
        if any(n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be >= 1")
        phi_max = max(phi(n) for n in self.n_list)
        if phi_max > self.v_grid_max:
            raise ConfigError(
                f"V grid must cover phi(max n) = {phi_max:.3f} > v_grid_max = {self.v_grid_max}"
            )
        for name in ("paths_tables", "paths_joint", "paths_walk", "paths_survival",
                     "paths_conditioned", "paths_tower", "paths_theta_population",
                     "paths_theta_plus", "paths_selfcheck"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_max < 1 or self.slope_n_max < 1:
            raise ConfigError("series depths must be >= 1")
        if self.theta_j_max < 0 or self.theta_k_max < 1:
            raise ConfigError("theta depths invalid")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    # ------------------------------------------------------------------
    _SECTIONS = {
        "model": ("alpha", "beta", "c", "family", "family_shape"),
        "phi": ("phi_form", "phi_gamma", "phi_eta"),
        "experiment": ("n_list",),
        "tables": ("v_grid_min", "v_grid_max", "v_points_per_octave",
                    "u_grid_min", "u_grid_max", "u_points_per_octave",
                    "n_max", "slope_n_max"),
        "budgets": ("paths_tables", "paths_joint", "paths_walk", "paths_survival",
                     "paths_conditioned", "paths_tower", "paths_theta_population",
                     "paths_theta_plus", "paths_selfcheck"),
        "theta": ("theta_j_max", "theta_k_max", "theta_m_max", "theta_m_tol",
                   "population_cap"),
        "gates": ("flatness_tolerance", "survival_flatness_tolerance",
                   "ratio_variation_tolerance", "gate_z"),
        "run": ("seed", "workers"),
    }

    def to_text(self) -> str:
        lines = []
        for section, keys in self._SECTIONS.items():
            lines.append(f"[{section}]")
            for key in keys:
                val = getattr(self, key)
                if key == "n_list":
                    val = ",".join(str(n) for n in val)
                elif val is None:
                    val = "none"
                lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        kwargs = {}
        hints = cls.__dataclass_fields__
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in cls._SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                if key == "n_list":
                    kwargs[key] = tuple(int(v) for v in raw.split(",") if v.strip())
                elif key in ("family", "phi_form"):
                    kwargs[key] = raw
                elif key == "family_shape":
                    kwargs[key] = None if raw == "none" else float(raw)
                elif hints[key].type in ("int", int):
                    kwargs[key] = int(raw)
                else:
                    kwargs[key] = float(raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def with_workers(self, workers: int) -> "ExperimentConfig":
        return replace(self, workers=workers)
