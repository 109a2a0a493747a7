import numpy as np
import pytest

from chemobayes import build_velocity_grid
from chemobayes.experiments import ExperimentConfig, default_config, run_posterior_sweep


@pytest.fixture(scope="session")
def two_velocity_grid():
    return build_velocity_grid(1, 2)


@pytest.fixture(scope="session")
def circle_grid():
    return build_velocity_grid(2, 8)


def make_mini_config(**overrides) -> ExperimentConfig:
    """Small, fast configuration for unit tests (not the acceptance runs)."""
    base = dict(
        n_cells=96,
        domain_length=14.0,
        lam_range=(0.8, 1.6),
        lam_count=7,
        beta_range=(-0.3, 0.3),
        beta_count=5,
        truth_lam=1.2,
        truth_beta=0.15,
        eps_list=(0.2, 0.1),
        t_final=0.4,
        measurement_times=(0.1, 0.25, 0.4),
        blob_centers=(-0.8, 0.4),
        blob_radius=0.8,
        c_rho=1.5,
        initial_profiles=(
            {"kind": "gauss", "center": -0.6, "sigma": 0.3, "truncation": 6.0},
            {"kind": "gauss", "center": 0.4, "sigma": 0.3, "truncation": 6.0},
        ),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="session")
def mini_config():
    return make_mini_config()


@pytest.fixture(scope="session")
def default_sweep():
    """One full sweep of the default configuration, shared by the acceptance
    criteria that audit it."""
    return run_posterior_sweep(default_config())
