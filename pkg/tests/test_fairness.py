import numpy as np
import pytest

from wpcn import (FadingModel, GridSpec, MixedPolicy, build_channel_pmf,
                  default_system, evaluate_policy, find_fair_alpha,
                  throughput_region, value_iteration)
from wpcn.fairness import fairness_trace_csv

GRID = GridSpec(b_max1=5, b_max2=5, n_fading_bins=2, n_tauap_grid=9,
                n_q1_grid=9)


@pytest.fixture(scope="module")
def asymmetric_fair():
    params = default_system()
    pmf = build_channel_pmf(params, GRID, FadingModel("rayleigh"))
    fp = find_fair_alpha(pmf, params, GRID, epsilon_fair=5e-3)
    return params, pmf, fp


def test_symmetric_system_is_fair_at_half():
    params = default_system(d1=2.0, d2=2.0)
    pmf = build_channel_pmf(params, GRID, FadingModel("rayleigh"))
    fp = find_fair_alpha(pmf, params, GRID, epsilon_fair=5e-3)
    assert fp.alpha_bar == pytest.approx(0.5, abs=0.02)
    assert fp.throughput.g1_bps == pytest.approx(fp.throughput.g2_bps,
                                                 rel=5e-3)


def test_fair_point_equalizes_throughputs(asymmetric_fair):
    params, pmf, fp = asymmetric_fair
    pair = fp.throughput
    assert pair.g1_bps == pytest.approx(pair.g2_bps, rel=5e-3)
    # far device needs most of the weight
    assert fp.alpha_bar > 0.5
    assert fp.alpha_bar == pytest.approx(1.0 - fp.alpha1, abs=1e-12)


def test_bracket_endpoints_straddle(asymmetric_fair):
    params, pmf, fp = asymmetric_fair
    by_alpha = {row["alpha1"]: row for row in fp.trace}
    assert by_alpha[0.0]["g1_bps"] <= by_alpha[0.0]["g2_bps"]
    assert by_alpha[1.0]["g1_bps"] >= by_alpha[1.0]["g2_bps"]


def test_fair_point_maximizes_the_minimum(asymmetric_fair):
    params, pmf, fp = asymmetric_fair
    fair_min = fp.throughput.min_bps
    points = throughput_region(pmf, params, GRID,
                               [0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0])
    for p in points:
        assert fair_min >= min(p["g1_bps"], p["g2_bps"]) * (1 - 1e-9)


def test_region_monotone_and_corners(asymmetric_fair):
    params, pmf, fp = asymmetric_fair
    alphas = list(np.linspace(0.0, 1.0, 7))
    points = throughput_region(pmf, params, GRID, alphas)
    g1 = [p["g1_bps"] for p in points]
    g2 = [p["g2_bps"] for p in points]
    slack = 1e-9 * max(g1)
    assert all(b >= a - slack for a, b in zip(g1, g1[1:]))
    assert all(b <= a + slack for a, b in zip(g2, g2[1:]))
    # corners: each end maximizes one device alone
    assert g2[0] == max(g2)
    assert g1[-1] == max(g1)


def test_region_symmetric_system_mirrors():
    params = default_system(d1=2.0, d2=2.0)
    pmf = build_channel_pmf(params, GRID, FadingModel("rayleigh"))
    points = throughput_region(pmf, params, GRID, [0.25, 0.5, 0.75])
    lo, mid, hi = points
    assert lo["g1_bps"] == pytest.approx(hi["g2_bps"], rel=0.02)
    assert lo["g2_bps"] == pytest.approx(hi["g1_bps"], rel=0.02)


def test_region_rejects_bad_inputs(asymmetric_fair):
    params, pmf, _ = asymmetric_fair
    with pytest.raises(ValueError):
        throughput_region(pmf, params, GRID, [])
    with pytest.raises(ValueError):
        throughput_region(pmf, params, GRID, [0.5, 1.2])


def test_mixture_balances_exactly():
    # A tight tolerance forces the discrete bisection to stall and mix.
    params = default_system()
    grid = GridSpec(b_max1=3, b_max2=3, n_fading_bins=1,
                    n_tauap_grid=5, n_q1_grid=5)
    pmf = build_channel_pmf(params, grid, FadingModel("deterministic"))
    fp = find_fair_alpha(pmf, params, grid, epsilon_fair=1e-9, max_bisect=25)
    if fp.mixed:
        assert isinstance(fp.policy, MixedPolicy)
        assert fp.throughput.g1_bps == pytest.approx(fp.throughput.g2_bps,
                                                     rel=1e-9)
        assert 0.0 <= fp.policy.weight_a <= 1.0
    else:
        assert fp.converged


def test_trace_csv_schema(asymmetric_fair):
    _, _, fp = asymmetric_fair
    text = fairness_trace_csv(fp.trace)
    lines = text.strip().split("\n")
    assert lines[0] == "iteration,alpha1,G1_bps,G2_bps"
    assert len(lines) == len(fp.trace) + 1


def test_warm_start_does_not_change_the_answer():
    params = default_system()
    grid = GridSpec(b_max1=4, b_max2=4, n_fading_bins=2, n_tauap_grid=7,
                    n_q1_grid=7)
    pmf = build_channel_pmf(params, grid, FadingModel("rayleigh"))
    cold = value_iteration(0.7, pmf, params, grid)
    warm_init = value_iteration(0.6, pmf, params, grid).value_function
    warm = value_iteration(0.7, pmf, params, grid, k_init=warm_init)
    pc = evaluate_policy(cold.policy, pmf, params, grid, model=cold.model)
    pw = evaluate_policy(warm.policy, pmf, params, grid, model=warm.model)
    assert pw.g1_bps == pytest.approx(pc.g1_bps, rel=1e-6)
    assert pw.g2_bps == pytest.approx(pc.g2_bps, rel=1e-6)
