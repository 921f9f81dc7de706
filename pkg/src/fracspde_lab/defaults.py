"""Default experiment configuration: stable phi = lam^(1/2), alpha = 0.8, beta = 0.7."""

from fracspde_lab.bernstein import BernsteinName
from fracspde_lab.config import (
    BernsteinConfig,
    ExperimentConfig,
    FracParamsConfig,
    GridConfig,
    NoiseConfig,
    SweepConfig,
    ToleranceConfig,
)


def default_config() -> ExperimentConfig:
    """Return the built-in desk-scale config used when no YAML file is given."""
    return ExperimentConfig(
        bernstein=BernsteinConfig(name=BernsteinName.STABLE, params={"beta": 0.5}),
        frac_params=FracParamsConfig(alpha=0.8, beta=0.7, gamma=0.0, kappa=0.05),
        grid=GridConfig(dim=1, box_length=20.0, points=64, t_end=1.0, n_steps=32),
        noise=NoiseConfig(modes=4, seed=42, n_samples=1000, replicas_per_batch=100),
        sweep=SweepConfig(
            t_min=1e-2,
            t_max=1e2,
            x_min=1e-2,
            x_max=1e2,
            points_t=5,
            points_x=9,
            orders=[0, 1, 2],
            gammas=[0.0],
            include_half_c1=True,
        ),
        tolerances=ToleranceConfig(),
        suites=[],
        output_dir="out",
        threads=1,
    )
