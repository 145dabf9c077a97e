import numpy as np
import pytest

from isacsim import (ClutterObject, LinkBudgetParams, Scenario, Target,
                     default_params)
from isacsim.scene import default_dl_mask


@pytest.fixture(scope="session")
def params() -> LinkBudgetParams:
    return default_params()


def small_params(n_subcarriers=128, m_symbols=832) -> LinkBudgetParams:
    """FR2 parameter set shrunk in subcarriers for fast synthesis tests.

    Keeps the numerology (120 kHz, 1/14 CP, 1120-symbol frames) so the
    default TDD mask and Doppler geometry stay identical to the full
    configuration.
    """
    return default_params().replace(n_subcarriers=n_subcarriers,
                                    m_symbols=m_symbols)


def single_target_scenario(range_m=450.0, velocity_mps=-8.0,
                           n_subcarriers=128, rcs_dbsm=-17.0, seed=5,
                           clutter=(), noise=True, leakage=True,
                           duration_s=1.0) -> Scenario:
    """One constant-radial-velocity target on the beam axis."""
    p = small_params(n_subcarriers)
    x1 = range_m + velocity_mps * duration_s
    if x1 <= 1.0:  # keep the trajectory on the positive axis
        raise ValueError("trajectory would cross the radar")
    tgt = Target("t0", [(0.0, range_m, 0.0), (duration_s, x1, 0.0)],
                 rcs_mean_m2=10.0 ** (rcs_dbsm / 10.0))
    return Scenario(params=p, targets=[tgt], clutter=list(clutter),
                    duration_s=duration_s, rng_seed=seed,
                    include_noise=noise, include_leakage=leakage)


@pytest.fixture
def default_mask():
    return default_dl_mask()


def make_full_dl_mask(symbols=1120):
    return np.ones(symbols, dtype=bool)
