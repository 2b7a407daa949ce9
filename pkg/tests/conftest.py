import numpy as np
import pytest
from hypothesis import settings

from ptcircuit.model import build_state_space, params_from_targets

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

C_REF = 0.33473
GAMMA_L_REF = 0.0738
GAMMA_C_REF = float(np.sqrt(1 + 2 * C_REF) - 1)


def state_space(c, gamma, gamma_l=0.0):
    return build_state_space(params_from_targets(c, gamma, gamma_l))


def direct_blocks(c, gamma, gamma_l, k):
    """Ma, Mb typed in straight from the closed-form expressions."""
    d = 1 + 2 * c
    Ma = np.array([[(1 + c) * (k - 1), -c * (k + 1)],
                   [c * (k - 1), -(1 + c) * (k + 1)]]) / d
    Mb = np.array([[(1 + c) * gamma - d * gamma_l, -c * gamma],
                   [c * gamma, -(1 + c) * gamma - d * gamma_l]]) / d
    return Ma, Mb


def direct_generator(c, gamma, gamma_l):
    Ma, Mb = direct_blocks(c, gamma, gamma_l, gamma * gamma_l)
    return np.block([[np.zeros((2, 2)), np.eye(2)], [Ma, Mb]])


@pytest.fixture
def unit_oscillator():
    return state_space(0.0, 0.0, 0.0)


def max_growth_oracle(c, gamma, gamma_l):
    return float(np.max((1j * np.linalg.eigvals(direct_generator(c, gamma, gamma_l))).imag))


def threshold_scan_oracle(c, gamma_l, step=1e-4):
    """First gamma on a ``step`` grid over [0.5, 2] * gamma_c where some mode grows.

    Returns the midpoint of the bracketing grid cell, so it sits within
    ``step / 2`` of the true onset.
    """
    gc = np.sqrt(1 + 2 * c) - 1
    grid = np.arange(0.5 * gc, 2 * gc, step)
    rates = np.array([max_growth_oracle(c, g, gamma_l) for g in grid])
    j = int(np.argmax(rates > 0))
    assert j > 0 and rates[j] > 0
    return 0.5 * (grid[j - 1] + grid[j])
