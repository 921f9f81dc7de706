"""Configuration models and loading for fracspde-lab experiments."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

from fracspde_lab.bernstein import BernsteinName, BernsteinSpec, catalog

logger = logging.getLogger(__name__)

SEED_MAX = 2**64 - 1


class BernsteinConfig(BaseModel):
    name: BernsteinName = BernsteinName.STABLE
    params: dict[str, float] = Field(default_factory=lambda: {"beta": 0.5})

    @model_validator(mode="after")
    def validate_catalog_entry(self) -> BernsteinConfig:
        # construction runs the catalog range checks
        catalog(self.name, self.params)
        return self

    def build(self) -> BernsteinSpec:
        return catalog(self.name, self.params)


class FracParamsConfig(BaseModel):
    alpha: float = 0.8
    beta: float = 0.7
    gamma: float = 0.0
    kappa: float = 0.05

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        return v

    @field_validator("kappa")
    @classmethod
    def validate_kappa(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        return v


class GridConfig(BaseModel):
    dim: int = 1
    box_length: float = 20.0
    points: int = 64
    t_end: float = 1.0
    n_steps: int = 32

    @field_validator("dim")
    @classmethod
    def validate_dim(cls, v: int) -> int:
        if v not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        return v

    @field_validator("points")
    @classmethod
    def validate_points(cls, v: int) -> int:
        if v < 2 or v & (v - 1):
            raise ValueError("points must be a power of two >= 2")
        return v

    @field_validator("box_length", "t_end")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("n_steps")
    @classmethod
    def validate_n_steps(cls, v: int) -> int:
        if v < 2:
            raise ValueError("n_steps must be >= 2")
        return v


class NoiseConfig(BaseModel):
    modes: int = 4
    seed: int = 42
    n_samples: int = 1000
    replicas_per_batch: int = 100

    @field_validator("seed")
    @classmethod
    def validate_seed(cls, v: int) -> int:
        if not 0 <= v <= SEED_MAX:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return v

    @field_validator("modes", "n_samples", "replicas_per_batch")
    @classmethod
    def validate_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v


class SweepConfig(BaseModel):
    t_min: float = 1e-2
    t_max: float = 1e2
    x_min: float = 1e-2
    x_max: float = 1e2
    points_t: int = 5
    points_x: int = 9
    orders: list[int] = Field(default_factory=lambda: [0, 1, 2])
    gammas: list[float] = Field(default_factory=lambda: [0.0])
    include_half_c1: bool = True

    @field_validator("t_min", "t_max", "x_min", "x_max")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("sweep bounds must be positive")
        return v

    @field_validator("points_t", "points_x")
    @classmethod
    def validate_points(cls, v: int) -> int:
        if v < 2:
            raise ValueError("sweep needs at least 2 points per axis")
        return v

    @field_validator("orders")
    @classmethod
    def validate_orders(cls, v: list[int]) -> list[int]:
        if any(m not in (0, 1, 2) for m in v):
            raise ValueError("derivative orders must be in {0, 1, 2}")
        return v

    @field_validator("gammas")
    @classmethod
    def validate_gammas(cls, v: list[float]) -> list[float]:
        if any(not 0.0 <= g < 1.0 for g in v):
            raise ValueError("kernel gammas must be in [0, 1)")
        return v

    @model_validator(mode="after")
    def validate_ranges(self) -> SweepConfig:
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be < t_max")
        if self.x_min >= self.x_max:
            raise ValueError("x_min must be < x_max")
        return self


class ToleranceConfig(BaseModel):
    refinement_drift: float = 0.10
    truncation_drift: float = 0.05
    standard_errors: float = 3.0
    mass_rtol: float = 1e-4
    route_rtol: float = 1e-3
    kernel_cross_rtol: float = 0.05

    @field_validator("*")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tolerances must be positive")
        return v


class ExperimentConfig(BaseModel):
    bernstein: BernsteinConfig = BernsteinConfig()
    frac_params: FracParamsConfig = FracParamsConfig()
    grid: GridConfig = GridConfig()
    noise: NoiseConfig = NoiseConfig()
    sweep: SweepConfig = SweepConfig()
    tolerances: ToleranceConfig = ToleranceConfig()
    suites: list[str] = Field(default_factory=list)
    output_dir: str = "out"
    threads: int = 1

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("threads must be >= 1")
        return v

    @field_validator("suites")
    @classmethod
    def validate_suites(cls, v: list[str]) -> list[str]:
        from fracspde_lab.suites import SUITES  # avoid circular import

        unknown = [s for s in v if s not in SUITES]
        if unknown:
            raise ValueError(f"Unknown suites: {unknown}. Available: {', '.join(SUITES)}")
        return v


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON dump of the normalized config."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _parse_env_int(env_var: str, min_val: int, max_val: int) -> int | None:
    """Parse an integer environment variable with range validation."""
    raw = os.environ.get(env_var)
    if raw is None:
        return None
    try:
        val = int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {env_var} must be an integer, got: {raw!r}")
    if not min_val <= val <= max_val:
        raise ValueError(f"Environment variable {env_var} must be {min_val}-{max_val}, got: {val}")
    return val


def _apply_env_overrides(config: ExperimentConfig) -> None:
    """Apply environment variable overrides to the config (mutates in place)."""
    if (seed := _parse_env_int("FRACSPDE_SEED", 0, SEED_MAX)) is not None:
        config.noise.seed = seed
    if (threads := _parse_env_int("FRACSPDE_THREADS", 1, 1024)) is not None:
        config.threads = threads
    if output_dir := os.environ.get("FRACSPDE_OUTPUT_DIR"):
        config.output_dir = output_dir


def load_config(config_path: str | Path | None = None) -> ExperimentConfig:
    """Load an experiment config from YAML with env var overrides.

    Priority: env vars > YAML config > built-in defaults.
    """
    if config_path is None:
        config_path = os.environ.get("CONFIG_FILE")

    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        with open(path) as f:
            raw = yaml.safe_load(f)

        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ValueError(f"Config file {path} must contain a mapping at top level")

        config = ExperimentConfig.model_validate(raw)
        logger.debug("Loaded config from %s", path)
    else:
        from fracspde_lab.defaults import default_config  # avoid circular import

        config = default_config()

    _apply_env_overrides(config)
    return config
