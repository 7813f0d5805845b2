"""Shared fixtures: the three synthetic parameter sets and a cached fit."""

import numpy as np
import pytest

from jpsn import JpsnParams
from jpsn.dists import NiwParams
from jpsn.mcmc import ChainConfig, PriorSpec, run_gibbs
from jpsn.model import simulate_jpsn

MU_1 = np.array([0.5, -1.0, -0.1, 0.1, -5.0])
MU_2 = np.array([0.2, 0.2, 0.0, 0.1, -5.0])
MU_3 = np.array([0.5, 0.5, 0.0, 0.5, 5.0])
LAM_1, LAM_2, LAM_3 = -5.0, 5.0, 6.0

SIGMA_1 = np.diag([2.0, 1.0, 0.2, 1.0, 2.0])
SIGMA_2 = np.array(
    [
        [3.000, 0.000, 0.551, 0.779, 0.857],
        [0.000, 1.000, -0.318, 0.450, 0.495],
        [0.551, -0.318, 0.500, 0.000, -0.318],
        [0.779, 0.450, 0.000, 1.000, 0.450],
        [0.857, 0.495, -0.318, 0.450, 1.000],
    ]
)
SIGMA_3 = np.array(
    [
        [3.000, -0.783, 0.377, 0.684, 0.781],
        [-0.783, 1.000, 0.214, 0.335, -0.092],
        [0.377, 0.214, 0.200, 0.231, 0.209],
        [0.684, 0.335, 0.231, 1.000, -0.382],
        [0.781, -0.092, 0.209, -0.382, 1.000],
    ]
)


def example_params(k):
    mu = (MU_1, MU_2, MU_3)[k - 1]
    sigma = (SIGMA_1, SIGMA_2, SIGMA_3)[k - 1]
    lam = (LAM_1, LAM_2, LAM_3)[k - 1]
    return JpsnParams(2, 1, mu, sigma, [lam], constrained=True)


def recovery_prior():
    return PriorSpec(
        NiwParams(np.zeros(5), 0.001, 15.0, np.eye(5)), np.zeros(1), 100.0 * np.eye(1)
    )


@pytest.fixture(scope="session")
def example1_fit():
    """Shared desk-scale fit of the first synthetic example (T=1000)."""
    rng = np.random.default_rng(101)
    data, _ = simulate_jpsn(example_params(1), 1000, rng)
    draws = run_gibbs(
        data, recovery_prior(), ChainConfig(iterations=12000, burnin=8000, thin=2, seed=5)
    )
    return data, draws


@pytest.fixture(scope="session")
def example2_fit():
    """Shared desk-scale fit of the second synthetic example (T=1000)."""
    rng = np.random.default_rng(7)
    data, _ = simulate_jpsn(example_params(2), 1000, rng)
    draws = run_gibbs(
        data, recovery_prior(), ChainConfig(iterations=12000, burnin=8000, thin=2, seed=3)
    )
    return data, draws
