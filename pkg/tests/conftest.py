import numpy as np
import pytest

from wpcn import FadingModel, GridSpec, build_channel_pmf, default_system


@pytest.fixture(scope="session")
def tiny_setup():
    """Small deterministic-fading instance for exact cross-checks."""
    params = default_system()
    grid = GridSpec(b_max1=4, b_max2=4, n_fading_bins=1,
                    n_tauap_grid=7, n_q1_grid=7)
    pmf = build_channel_pmf(params, grid, FadingModel("deterministic"))
    return params, grid, pmf


@pytest.fixture(scope="session")
def small_rayleigh_setup():
    params = default_system()
    grid = GridSpec(b_max1=5, b_max2=5, n_fading_bins=2,
                    n_tauap_grid=9, n_q1_grid=9)
    pmf = build_channel_pmf(params, grid, FadingModel("rayleigh"))
    return params, grid, pmf


def make_setup(seed, b_max=(4, 4), n_bins=2, n_tauap=7, n_q1=7,
               kind="rayleigh"):
    rng = np.random.default_rng(seed)
    params = default_system(d1=float(rng.uniform(0.5, 2.0)),
                            d2=float(rng.uniform(2.0, 4.0)),
                            battery_j=float(rng.uniform(0.5e-4, 2e-4)))
    grid = GridSpec(b_max1=b_max[0], b_max2=b_max[1], n_fading_bins=n_bins,
                    n_tauap_grid=n_tauap, n_q1_grid=n_q1)
    pmf = build_channel_pmf(params, grid, FadingModel(kind))
    return params, grid, pmf
