"""Shared fixtures: the benchmark parameter set and cached optimizations.

The benchmark configuration (dx=0.5, dt=0.05 on [-15, 20], T=1, u=(2,1),
gamma=1.5, D=1, x0=5, delta=sqrt(0.5), sigma=1, l_c=5, K=1e4) is used across
the Monte Carlo and constrained-optimization tests; optimizations that feed
several tests are session-scoped so they run once.
"""

import math
import warnings

import pytest

from shockld.grid import SpaceTimeGrid, WaveSpec
from shockld.noise import build_noise_model
from shockld.optimize import RareEventSpec, minimize_ball, minimize_pinned

warnings.filterwarnings("ignore", category=RuntimeWarning,
                        message="explicit Euler stability heuristic")

DELTA = math.sqrt(0.5)
K_FULL = 10_000


@pytest.fixture(scope="session")
def wave():
    return WaveSpec(u_minus=2.0, u_plus=1.0, D=1.0, gamma=1.5)


@pytest.fixture(scope="session")
def table1_grid():
    return SpaceTimeGrid.from_spacing(-15.0, 20.0, 0.5, 1.0, 0.05)


@pytest.fixture(scope="session")
def identity_model(table1_grid):
    return build_noise_model("identity", table1_grid)


@pytest.fixture(scope="session")
def exp_model(table1_grid):
    return build_noise_model("exponential", table1_grid, sigma=1.0, l_c=5.0)


@pytest.fixture(scope="session")
def displacement_scen(wave):
    return RareEventSpec("displacement", wave, x0=5.0)


@pytest.fixture(scope="session")
def ball_scen(wave):
    return RareEventSpec("displacement", wave, x0=5.0, delta=DELTA)


@pytest.fixture(scope="session")
def pinned_identity_opt(displacement_scen, identity_model):
    return minimize_pinned(displacement_scen, identity_model)


@pytest.fixture(scope="session")
def pinned_exp_opt(displacement_scen, exp_model):
    return minimize_pinned(displacement_scen, exp_model)


@pytest.fixture(scope="session")
def ball_exp_opt(ball_scen, exp_model):
    return minimize_ball(ball_scen, exp_model)
