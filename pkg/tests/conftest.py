"""Shared test fixtures."""

import pytest

from fracspde_lab.bernstein import BernsteinName, catalog
from fracspde_lab.fraccalc import TimeGrid
from fracspde_lab.kernel_engine import FracParams
from fracspde_lab.lattice import SpectralGrid


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep host environment overrides out of config loading."""
    for var in ("CONFIG_FILE", "FRACSPDE_SEED", "FRACSPDE_THREADS", "FRACSPDE_OUTPUT_DIR"):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def heat():
    """phi(lam) = lam."""
    return catalog(BernsteinName.STABLE, {"beta": 1.0})


@pytest.fixture
def half_stable():
    """phi(lam) = lam^(1/2)."""
    return catalog(BernsteinName.STABLE, {"beta": 0.5})


@pytest.fixture
def params():
    return FracParams(alpha=0.8, beta=0.7)


@pytest.fixture
def small_grid():
    return SpectralGrid(dim=1, box_length=8.0, points=32)


@pytest.fixture
def short_tgrid():
    return TimeGrid(t_end=1.0, n_steps=16)


@pytest.fixture
def sample_config_yaml(tmp_path):
    """Create a small experiment config YAML file."""
    config = tmp_path / "config.yaml"
    config.write_text(
        f"""\
bernstein:
  name: stable
  params:
    beta: 0.5
frac_params:
  alpha: 0.8
  beta: 0.7
grid:
  dim: 1
  box_length: 8.0
  points: 32
  t_end: 1.0
  n_steps: 16
noise:
  modes: 2
  seed: 7
  n_samples: 200
output_dir: {tmp_path / "out"}
threads: 1
"""
    )
    return config


@pytest.fixture
def window_violation_yaml(tmp_path):
    """beta >= alpha + 1/2: the stochastic term is not defined."""
    config = tmp_path / "bad_window.yaml"
    config.write_text(
        f"""\
frac_params:
  alpha: 0.3
  beta: 0.9
output_dir: {tmp_path / "out"}
"""
    )
    return config
