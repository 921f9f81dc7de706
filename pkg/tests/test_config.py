"""Tests for configuration loading and validation."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from fracspde_lab.bernstein import BernsteinName
from fracspde_lab.config import (
    BernsteinConfig,
    ExperimentConfig,
    FracParamsConfig,
    GridConfig,
    NoiseConfig,
    SweepConfig,
    ToleranceConfig,
    config_hash,
    load_config,
)
from fracspde_lab.defaults import default_config


class TestBernsteinConfig:
    def test_default_is_half_stable(self):
        phi = BernsteinConfig().build()
        assert phi.name == BernsteinName.STABLE
        assert phi.delta0 == 0.5

    def test_unknown_name_rejected(self):
        with pytest.raises(ValidationError):
            BernsteinConfig(name="gamma_subordinator", params={})

    def test_missing_parameter_rejected(self):
        with pytest.raises(ValidationError, match="missing"):
            BernsteinConfig(name="relativistic", params={"beta": 0.5})

    def test_out_of_range_parameter_rejected(self):
        with pytest.raises(ValidationError, match="beta must be in"):
            BernsteinConfig(name="stable", params={"beta": 1.5})


class TestFracParamsConfig:
    def test_alpha_range(self):
        with pytest.raises(ValidationError, match="alpha must be in"):
            FracParamsConfig(alpha=1.0)

    def test_kappa_range(self):
        with pytest.raises(ValidationError, match="kappa must be in"):
            FracParamsConfig(kappa=0.0)

    def test_window_is_not_a_model_check(self):
        # checked where the inequality can be reported by name
        cfg = FracParamsConfig(alpha=0.3, beta=0.9)
        assert cfg.beta == 0.9


class TestGridConfig:
    def test_points_power_of_two(self):
        with pytest.raises(ValidationError, match="power of two"):
            GridConfig(points=48)

    def test_dim_range(self):
        with pytest.raises(ValidationError, match="dim must be"):
            GridConfig(dim=4)

    def test_n_steps(self):
        with pytest.raises(ValidationError, match="n_steps"):
            GridConfig(n_steps=1)


class TestNoiseConfig:
    def test_seed_range(self):
        with pytest.raises(ValidationError, match="64-bit"):
            NoiseConfig(seed=-1)
        assert NoiseConfig(seed=2**64 - 1).seed == 2**64 - 1


class TestSweepConfig:
    def test_ranges_ordered(self):
        with pytest.raises(ValidationError, match="t_min must be < t_max"):
            SweepConfig(t_min=2.0, t_max=1.0)

    def test_orders(self):
        with pytest.raises(ValidationError, match="derivative orders"):
            SweepConfig(orders=[3])

    def test_gammas(self):
        with pytest.raises(ValidationError, match="kernel gammas"):
            SweepConfig(gammas=[1.0])


class TestToleranceConfig:
    def test_defaults(self):
        tol = ToleranceConfig()
        assert tol.refinement_drift == 0.10
        assert tol.truncation_drift == 0.05
        assert tol.standard_errors == 3.0
        assert tol.kernel_cross_rtol == 0.05

    def test_positive(self):
        with pytest.raises(ValidationError, match="positive"):
            ToleranceConfig(mass_rtol=0.0)


class TestExperimentConfig:
    def test_unknown_suite_rejected(self):
        with pytest.raises(ValidationError, match="Unknown suites"):
            ExperimentConfig(suites=["not-a-suite"])

    def test_known_suite_accepted(self):
        assert ExperimentConfig(suites=["picard-contraction"]).suites == ["picard-contraction"]

    def test_threads(self):
        with pytest.raises(ValidationError, match="threads"):
            ExperimentConfig(threads=0)

    def test_defaults_match_builtin(self):
        assert config_hash(ExperimentConfig()) == config_hash(default_config())


class TestConfigHash:
    def test_stable(self):
        assert config_hash(default_config()) == config_hash(default_config())

    def test_changes_with_seed(self):
        a = default_config()
        b = default_config()
        b.noise.seed = 43
        assert config_hash(a) != config_hash(b)

    def test_hex_digest(self):
        digest = config_hash(default_config())
        assert len(digest) == 64
        int(digest, 16)


class TestLoadConfig:
    def test_defaults_without_file(self):
        config = load_config()
        assert config.frac_params.alpha == 0.8
        assert config.frac_params.beta == 0.7

    def test_load_yaml(self, sample_config_yaml):
        config = load_config(sample_config_yaml)
        assert config.grid.points == 32
        assert config.noise.seed == 7
        # unspecified sections keep their defaults
        assert config.tolerances.mass_rtol == 1e-4

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.yaml")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path).grid.points == 64

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="mapping"):
            load_config(path)

    def test_invalid_field_reports_location(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("grid:\n  points: 100\n")
        with pytest.raises(ValidationError) as excinfo:
            load_config(path)
        assert excinfo.value.errors()[0]["loc"] == ("grid", "points")

    def test_config_file_env(self, monkeypatch, sample_config_yaml):
        monkeypatch.setenv("CONFIG_FILE", str(sample_config_yaml))
        assert load_config().noise.seed == 7


class TestEnvOverrides:
    def test_seed_override(self, monkeypatch, sample_config_yaml):
        monkeypatch.setenv("FRACSPDE_SEED", "99")
        assert load_config(sample_config_yaml).noise.seed == 99

    def test_threads_override(self, monkeypatch):
        monkeypatch.setenv("FRACSPDE_THREADS", "4")
        assert load_config().threads == 4

    def test_output_dir_override(self, monkeypatch, tmp_path):
        monkeypatch.setenv("FRACSPDE_OUTPUT_DIR", str(tmp_path))
        assert load_config().output_dir == str(tmp_path)

    def test_non_integer_rejected(self, monkeypatch):
        monkeypatch.setenv("FRACSPDE_SEED", "abc")
        with pytest.raises(ValueError, match="FRACSPDE_SEED must be an integer"):
            load_config()

    def test_out_of_range_rejected(self, monkeypatch):
        monkeypatch.setenv("FRACSPDE_THREADS", "0")
        with pytest.raises(ValueError, match="FRACSPDE_THREADS must be 1-1024"):
            load_config()


class TestShippedConfigs:
    CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"

    def test_default_yaml_matches_builtin(self):
        config = load_config(self.CONFIG_DIR / "default.yaml")
        assert config_hash(config) == config_hash(default_config())

    def test_whitenoise_example(self):
        config = load_config(self.CONFIG_DIR / "example-whitenoise.yaml")
        assert config.bernstein.params == {"beta": 1.0}
        assert config.noise.modes == 64
        assert config.grid.points == 256
