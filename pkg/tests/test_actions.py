import dataclasses

import numpy as np
import pytest

from wpcn import (GridSpec, InfeasibleSplitError, default_system,
                  low_snr_fast_path, optimize_state, prune_bounds, rate,
                  solve_tau1)
from wpcn.actions import _phi, reward_for_budgets

PARAMS = default_system()
WIDE = default_system(p_min_w=1e-9, p_max_w=1e3)


def _objective(tau1, e1, e2, tau_ap, h1, h2, alpha, params):
    tau2 = params.t_slot - tau_ap - tau1
    return (alpha * tau1 * np.asarray(rate(e1 / tau1, h1, params))
            + (1 - alpha) * tau2 * np.asarray(rate(e2 / tau2, h2, params)))


def test_symmetric_budgets_split_time_evenly():
    e = 2e-5
    h = 1.25e-3
    tau1, _ = solve_tau1(e, e, 0.2, h, h, 0.5, WIDE)
    assert tau1 == pytest.approx((WIDE.t_slot - 0.2) / 2, rel=1e-9)


def _feasible_tau_ap(e1, e2, params, frac, rng=None):
    """Transfer time leaving an airtime the budgets can exactly fill."""
    dev1, dev2 = params.devices
    avail_lo = e1 / dev1.p_max_w + e2 / dev2.p_max_w
    avail_hi = min(e1 / dev1.p_min_w + e2 / dev2.p_min_w, params.t_slot)
    avail = avail_lo + frac * (avail_hi - avail_lo)
    return params.t_slot - avail


def test_full_weight_on_device1_takes_max_airtime():
    e1, e2 = 3e-5, 1e-5
    tau_ap = _feasible_tau_ap(e1, e2, PARAMS, 0.5)
    h = 1.25e-3
    tau1, obj = solve_tau1(e1, e2, tau_ap, h, h, 1.0, PARAMS)
    tau1_max = min(e1 / PARAMS.devices[0].p_min_w,
                   PARAMS.t_slot - tau_ap - e2 / PARAMS.devices[1].p_max_w)
    assert tau1 == pytest.approx(tau1_max, rel=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_split_beats_dense_grid(seed):
    rng = np.random.default_rng(seed)
    e1 = float(rng.uniform(0.2, 1.0) * 1e-4)
    e2 = float(rng.uniform(0.2, 1.0) * 1e-4)
    tau_ap = _feasible_tau_ap(e1, e2, PARAMS, float(rng.uniform(0.1, 0.9)))
    h1 = float(1.25e-3 * rng.uniform(0.2, 2.0))
    h2 = float(1.25e-4 * rng.uniform(0.2, 2.0))
    alpha = float(rng.uniform(0.05, 0.95))
    tau1, obj = solve_tau1(e1, e2, tau_ap, h1, h2, alpha, PARAMS)
    lo = max(e1 / PARAMS.devices[0].p_max_w,
             PARAMS.t_slot - tau_ap - e2 / PARAMS.devices[1].p_min_w, 1e-12)
    hi = min(e1 / PARAMS.devices[0].p_min_w,
             PARAMS.t_slot - tau_ap - e2 / PARAMS.devices[1].p_max_w)
    taus = np.linspace(lo, hi, 10_000)
    best_grid = _objective(taus, e1, e2, tau_ap, h1, h2, alpha, PARAMS).max()
    assert obj >= best_grid - 1e-12
    assert lo - 1e-15 <= tau1 <= hi + 1e-15


def test_interior_root_zeroes_the_derivative():
    e1 = e2 = 5e-5
    tau_ap = 0.1     # wide power bounds keep the whole interval feasible
    h1, h2 = 1.25e-3, 1.25e-4
    alpha = 0.6
    tau1, _ = solve_tau1(e1, e2, tau_ap, h1, h2, alpha, WIDE)
    avail = WIDE.t_slot - tau_ap
    a1 = e1 * h1 / WIDE.noise_w
    a2 = e2 * h2 / WIDE.noise_w
    resid = float(_phi(np.asarray(tau1), avail, a1, a2, alpha))
    scale = abs(float(_phi(np.asarray(avail / 4), avail, a1, a2, alpha)))
    assert abs(resid) <= 1e-9 * max(scale, 1.0)


def test_derivative_changes_sign_exactly_once():
    e1, e2, tau_ap, alpha = 4e-5, 7e-5, 0.15, 0.4
    h1, h2 = 1.25e-3, 2e-4
    avail = PARAMS.t_slot - tau_ap
    taus = np.linspace(avail * 1e-6, avail * (1 - 1e-6), 1000)
    a1, a2 = e1 * h1 / PARAMS.noise_w, e2 * h2 / PARAMS.noise_w
    signs = np.sign(_phi(taus, avail, a1, a2, alpha))
    assert int(np.sum(np.diff(signs) != 0)) == 1


def test_infeasible_window_raises():
    # Budgets too big for the remaining airtime at maximum power.
    with pytest.raises(InfeasibleSplitError):
        solve_tau1(4e-3, 4e-3, 0.45, 1e-3, 1e-3, 0.5, PARAMS)


def test_single_device_budget_dispatch():
    r, tau1, tau2 = reward_for_budgets(4e-5, 0.0, 0.2, 1.25e-3, 1e-4, 0.7, PARAMS)
    assert tau2 == 0.0
    assert tau1 == pytest.approx(min(PARAMS.t_slot - 0.2,
                                     4e-5 / PARAMS.devices[0].p_min_w))
    assert r > 0
    assert reward_for_budgets(0.0, 0.0, 0.3, 1e-3, 1e-3, 0.5, PARAMS)[0] == 0.0


GRID = GridSpec(b_max1=3, b_max2=3, n_fading_bins=1, n_tauap_grid=5, n_q1_grid=5)


def test_empty_batteries_force_pure_transfer(tiny_setup):
    params, grid, pmf = tiny_setup
    rng = np.random.default_rng(1)
    K = rng.uniform(size=(grid.b_max1 + 1, grid.b_max2 + 1))
    g = (pmf.g1[0], pmf.g2[0])
    h = (pmf.h1[0], pmf.h2[0])
    action, value = optimize_state((0, 0), g, h, 0.5, K, params, grid)
    assert action.tau1 == action.tau2 == 0.0
    assert action.tau_ap == params.t_slot      # ties prefer the longest transfer
    from wpcn.physics import battery_step, harvested_energy
    best = max(K[battery_step(0, 0, harvested_energy(params.t_slot, q, g[0], params), grid, params, 0),
                 battery_step(0, 0, harvested_energy(params.t_slot, params.q_max - q, g[1], params), grid, params, 1)]
               for q in np.linspace(0, params.q_max, grid.n_tauap_grid))
    assert value == pytest.approx(best, abs=1e-12)


def test_myopic_matches_brute_force_grid():
    params = default_system()
    grid = GRID
    K = np.zeros((4, 4))
    g = (1.25e-3, 1.25e-3 / 9)
    h = g
    action, value = optimize_state((3, 2), g, h, 0.5, K, params, grid)

    # Independent 7-variable grid search at matching resolution, with a
    # dense airtime axis standing in for the closed-form split.
    quantum1 = grid.quantum_j(params, 0)
    quantum2 = grid.quantum_j(params, 1)
    best = 0.0
    for e1 in range(4):
        for e2 in range(3):
            for tau_ap in np.linspace(0, params.t_slot, grid.n_tauap_grid):
                avail = params.t_slot - tau_ap
                if avail <= 0:
                    if e1 == e2 == 0:
                        best = max(best, 0.0)
                    continue
                for tau1 in np.linspace(1e-9, avail - 1e-9, 400):
                    tau2 = avail - tau1
                    rho1 = e1 * quantum1 / tau1 if e1 else 0.0
                    rho2 = e2 * quantum2 / tau2 if e2 else 0.0
                    ok1 = e1 == 0 or (params.devices[0].p_min_w <= rho1 <= params.devices[0].p_max_w)
                    ok2 = e2 == 0 or (params.devices[1].p_min_w <= rho2 <= params.devices[1].p_max_w)
                    if not (ok1 and ok2):
                        continue
                    r = 0.5 * (tau1 * float(rate(rho1, h[0], params)) if e1 else 0.0) \
                        + 0.5 * (tau2 * float(rate(rho2, h[1], params)) if e2 else 0.0)
                    best = max(best, r)
    assert value >= best - 1e-9
    assert value <= best * (1 + 2e-3) + 1e-12   # grid resolution slack


def test_value_monotone_in_battery(small_rayleigh_setup):
    params, grid, pmf = small_rayleigh_setup
    n1, n2 = grid.b_max1 + 1, grid.b_max2 + 1
    K = np.add.outer(np.linspace(0, 1, n1), np.linspace(0, 0.7, n2))
    g = (pmf.g1[1], pmf.g2[1])
    h = (pmf.h1[1], pmf.h2[1])
    vals = np.empty((5, 5))
    for b1 in range(5):
        for b2 in range(5):
            _, vals[b1, b2] = optimize_state((b1, b2), g, h, 0.5, K,
                                             params, grid)
    assert np.all(np.diff(vals, axis=0) >= -1e-12)
    assert np.all(np.diff(vals, axis=1) >= -1e-12)


def test_offset_invariance(tiny_setup):
    params, grid, pmf = tiny_setup
    K = np.random.default_rng(3).normal(size=(grid.b_max1 + 1, grid.b_max2 + 1))
    g = (pmf.g1[0], pmf.g2[0])
    h = (pmf.h1[0], pmf.h2[0])
    a0, v0 = optimize_state((3, 2), g, h, 0.4, K, params, grid)
    a1, v1 = optimize_state((3, 2), g, h, 0.4, K + 7.5, params, grid)
    assert v1 == pytest.approx(v0 + 7.5, rel=1e-12)
    assert a0 == a1


def test_prune_bounds_trivials():
    assert prune_bounds((0, 4), (3, 4)) == ((0, 3), (0, 4))
    assert prune_bounds((3, 0), (3, 4)) == ((3, 3), (0, 0))


@pytest.mark.parametrize("seed", range(5))
def test_pruned_search_matches_unpruned(seed):
    rng = np.random.default_rng(seed)
    params = default_system(d1=float(rng.uniform(0.5, 2)),
                            d2=float(rng.uniform(2, 4)))
    grid = GridSpec(b_max1=3, b_max2=3, n_fading_bins=1,
                    n_tauap_grid=5, n_q1_grid=5)
    K = rng.normal(size=(4, 4))
    b = (3, 3)
    g = (params.devices[0].downlink_gain, params.devices[1].downlink_gain)
    h_ref = (params.devices[0].uplink_gain, params.devices[1].uplink_gain)
    # Reference argmax at (h1, h2), query at h1 scaled up / h2 scaled down.
    a_ref, _ = optimize_state(b, g, h_ref, 0.5, K, params, grid)
    quantum1, quantum2 = grid.quantum_j(params, 0), grid.quantum_j(params, 1)
    e_star = (round(a_ref.tau1 * a_ref.rho1 / quantum1),
              round(a_ref.tau2 * a_ref.rho2 / quantum2))
    h_query = (h_ref[0] * 1.5, h_ref[1] * 0.6)
    bounds = prune_bounds(e_star, b)
    a_full, v_full = optimize_state(b, g, h_query, 0.5, K, params, grid)
    a_pruned, v_pruned = optimize_state(b, g, h_query, 0.5, K, params, grid,
                                        bounds=bounds)
    assert v_pruned == pytest.approx(v_full, rel=1e-12)


def _low_snr_system():
    # Noise high enough that even full power keeps h * p / noise tiny.
    base = default_system(battery_j=1e-4)
    return dataclasses.replace(base, noise_w=1.0)


def test_low_snr_fast_path_matches_full_search():
    # Myopic comparison: with no continuation value the fast path can
    # never beat the full search (the per-slot reward does not depend on
    # the transfer duration), and at low SNR it must be within 1%.
    params = _low_snr_system()
    grid = GridSpec(b_max1=3, b_max2=3, n_fading_bins=1,
                    n_tauap_grid=9, n_q1_grid=9)
    K = np.zeros((4, 4))
    g = (params.devices[0].downlink_gain, params.devices[1].downlink_gain)
    h = g
    snr = max(h[0] * params.devices[0].p_max_w, h[1] * params.devices[1].p_max_w) / params.noise_w
    assert snr < 0.01
    for b in ((0, 0), (2, 1), (3, 3)):
        a_fast, v_fast = low_snr_fast_path(b, g, h, 0.5, K, params, grid)
        a_full, v_full = optimize_state(b, g, h, 0.5, K, params, grid)
        assert v_fast <= v_full + 1e-18
        if v_full > 0:
            assert v_fast == pytest.approx(v_full, rel=0.01)
        assert a_fast.tau1 + a_fast.tau2 + a_fast.tau_ap == pytest.approx(
            params.t_slot, abs=1e-15)
    a0, _ = low_snr_fast_path((0, 0), g, h, 0.5, K, params, grid)
    assert a0.tau_ap == params.t_slot


def test_low_snr_precondition_falls_back():
    params = default_system()   # high SNR
    grid = GridSpec(b_max1=2, b_max2=2, n_fading_bins=1,
                    n_tauap_grid=5, n_q1_grid=5)
    K = np.zeros((3, 3))
    g = (1.25e-3, 1.25e-4)
    a_fast, v_fast = low_snr_fast_path((2, 2), g, g, 0.5, K, params, grid)
    a_full, v_full = optimize_state((2, 2), g, g, 0.5, K, params, grid)
    assert v_fast == v_full
    assert a_fast == a_full
