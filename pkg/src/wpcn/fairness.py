"""Max-min fairness via bisection on the scalarization weight.

The solvers maximize H(w) = w * G1 + (1 - w) * G2 where w is the weight
on device 1; G1 grows and G2 shrinks as w grows, so the weight at which
the two throughputs meet realizes the max-min optimum.

Reporting convention: the fair point's ``alpha_bar`` is the weight on
device 2 (1 - w at the crossing), i.e. how much of the objective had to
be devoted to the device needing compensation; the weight on device 1 is
returned alongside as ``alpha1``.  Every other alpha parameter in this
package (value_iteration, throughput_region) is the device-1 weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelPmf
from .mdp import Policy, ThroughputPair, evaluate_policy, value_iteration
from .params import GridSpec, SystemParams


@dataclass
class MixedPolicy:
    """Random mixture of two deterministic policies, drawn once at start.

    Discretization can keep every deterministic policy from equalizing the
    two devices exactly; mixing the bracketing policies with the right
    weight equalizes the long-run throughputs in expectation.
    """

    policy_a: Policy
    policy_b: Policy
    weight_a: float

    def pick(self, rng: np.random.Generator) -> Policy:
        return self.policy_a if rng.random() < self.weight_a else self.policy_b


@dataclass
class FairPoint:
    alpha_bar: float              # weight on device 2 at the fair point
    alpha1: float                 # weight on device 1 (= 1 - alpha_bar)
    policy: Policy | MixedPolicy
    throughput: ThroughputPair
    trace: list[dict] = field(repr=False)
    converged: bool = True
    mixed: bool = False
    n_solves: int = 0
    value_function: np.ndarray | None = field(default=None, repr=False)


def _mix_pairs(pa: ThroughputPair, pb: ThroughputPair, lam: float) -> ThroughputPair:
    return ThroughputPair(
        g1_bps=lam * pa.g1_bps + (1 - lam) * pb.g1_bps,
        g2_bps=lam * pa.g2_bps + (1 - lam) * pb.g2_bps,
        multichain=pa.multichain or pb.multichain)


def find_fair_alpha(pmf: ChannelPmf, params: SystemParams, grid: GridSpec,
                    epsilon_fair: float = 1e-3, max_bisect: int = 30,
                    tol: float = 1e-6, max_iters: int = 300,
                    alpha_atol: float = 1e-4, solve=None) -> FairPoint:
    """Bisect the device-1 weight until both devices see equal throughput.

    Each step solves the weighted long-term problem, warm-starting from
    the closest previously solved weight.  If G1 > G2 the weight moves
    down, otherwise up, until |G1 - G2| <= epsilon_fair * max(G1, G2).
    When the bracket collapses without meeting the tolerance (the
    discretized action space makes G1 - G2 jump across zero), the two
    bracketing policies are mixed with the weight that equalizes the
    expected throughputs and the result is flagged ``mixed``.

    ``solve`` may replace the exact solver with any callable
    (alpha, k_init) -> (ViaResult-like, ThroughputPair); the approximate
    solver plugs in through this hook.
    """
    if epsilon_fair <= 0:
        raise ValueError("epsilon_fair must be positive")

    solved: dict[float, tuple] = {}
    trace: list[dict] = []

    def _solve(w1: float):
        if w1 in solved:
            return solved[w1]
        k_init = None
        if solved:
            nearest = min(solved, key=lambda w: abs(w - w1))
            k_init = solved[nearest][0].value_function
        if solve is not None:
            res, pair = solve(w1, k_init)
        else:
            res = value_iteration(w1, pmf, params, grid, tol=tol,
                                  max_iters=max_iters, k_init=k_init)
            pair = evaluate_policy(res.policy, pmf, params, grid, model=res.model)
        solved[w1] = (res, pair)
        trace.append(dict(iteration=len(trace), alpha1=w1,
                          g1_bps=pair.g1_bps, g2_bps=pair.g2_bps))
        return solved[w1]

    def _balanced(pair: ThroughputPair) -> bool:
        scale = max(pair.g1_bps, pair.g2_bps)
        return abs(pair.g1_bps - pair.g2_bps) <= epsilon_fair * scale or scale == 0.0

    def _result(w1, res, pair, converged=True, mixed=False):
        return FairPoint(alpha_bar=1.0 - w1, alpha1=w1, policy=res.policy,
                         throughput=pair, trace=trace, converged=converged,
                         mixed=mixed, n_solves=len(solved),
                         value_function=res.value_function)

    lo, hi = 0.0, 1.0
    res_lo, pair_lo = _solve(lo)
    if pair_lo.g1_bps - pair_lo.g2_bps >= 0:
        # Device 1 dominates even with zero weight: its throughput is free.
        return _result(lo, res_lo, pair_lo, converged=_balanced(pair_lo))
    res_hi, pair_hi = _solve(hi)
    if pair_hi.g1_bps - pair_hi.g2_bps <= 0:
        return _result(hi, res_hi, pair_hi, converged=_balanced(pair_hi))

    for _ in range(max_bisect):
        if hi - lo < alpha_atol:
            # The optimal throughputs are piecewise constant in the weight,
            # so once the bracket is this tight only mixing can close the
            # remaining gap.
            break
        mid = 0.5 * (lo + hi)
        res_mid, pair_mid = _solve(mid)
        if _balanced(pair_mid):
            return _result(mid, res_mid, pair_mid)
        if pair_mid.g1_bps > pair_mid.g2_bps:
            hi, res_hi, pair_hi = mid, res_mid, pair_mid
        else:
            lo, res_lo, pair_lo = mid, res_mid, pair_mid

    # Stalled: mix the bracketing policies so the expected throughputs meet.
    d_lo = pair_lo.g1_bps - pair_lo.g2_bps   # <= 0
    d_hi = pair_hi.g1_bps - pair_hi.g2_bps   # >= 0
    lam = d_hi / (d_hi - d_lo) if d_hi != d_lo else 0.5
    mixture = MixedPolicy(policy_a=res_lo.policy, policy_b=res_hi.policy,
                          weight_a=lam)
    pair = _mix_pairs(pair_lo, pair_hi, lam)
    w_mid = 0.5 * (lo + hi)
    return FairPoint(alpha_bar=1.0 - w_mid, alpha1=w_mid, policy=mixture,
                     throughput=pair, trace=trace, converged=False,
                     mixed=True, n_solves=len(solved),
                     value_function=res_lo.value_function)


def throughput_region(pmf: ChannelPmf, params: SystemParams, grid: GridSpec,
                      alpha_list, tol: float = 1e-6, max_iters: int = 300
                      ) -> list[dict]:
    """Optimal (G1, G2) pairs along a grid of device-1 weights.

    Endpoints alpha = 0 and 1 give the single-device-optimal corners.
    Solves warm-start from the previous weight, so pass the list sorted
    for the fastest run; results are keyed by alpha either way.
    """
    alphas = list(alpha_list)
    if not alphas:
        raise ValueError("alpha_list must not be empty")
    if any(not 0 <= a <= 1 for a in alphas):
        raise ValueError("alpha values must lie in [0, 1]")

    points = []
    k_init = None
    for alpha in alphas:
        res = value_iteration(alpha, pmf, params, grid, tol=tol,
                              max_iters=max_iters, k_init=k_init)
        k_init = res.value_function
        pair = evaluate_policy(res.policy, pmf, params, grid, model=res.model)
        points.append(dict(alpha=alpha, g1_bps=pair.g1_bps, g2_bps=pair.g2_bps))
    return points


def fairness_trace_csv(trace: list[dict]) -> str:
    lines = ["iteration,alpha1,G1_bps,G2_bps"]
    for row in trace:
        lines.append(f"{row['iteration']},{row['alpha1']:.12g},"
                     f"{row['g1_bps']:.12g},{row['g2_bps']:.12g}")
    return "\n".join(lines) + "\n"
