"""Monte Carlo slot-by-slot simulation of a fixed policy.

Independent check on the analytic chain evaluation: channel outcomes are
drawn i.i.d. from the pmf, the policy's action is applied, batteries step
deterministically given the outcome, and per-device rewards accumulate.

Randomness comes from one numpy default_rng(seed) stream; the only draws
are the per-slot outcome indices (and, for mixed policies, one branch
pick before the first slot), so runs are reproducible bit for bit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .bellman import CompiledModel
from .channel import ChannelPmf
from .fairness import MixedPolicy
from .mdp import Policy
from .params import GridSpec, SystemParams


@dataclass
class SimulationResult:
    g1_bps: float
    g2_bps: float
    se1_bps: float
    se2_bps: float
    n_slots: int
    seed: int
    occupancy: np.ndarray = field(repr=False)   # (n1, n2) visit frequencies
    trajectory: str | None = field(default=None, repr=False)


def _policy_tables(policy: Policy, pmf: ChannelPmf, params: SystemParams,
                   grid: GridSpec, model: CompiledModel | None):
    model = model or CompiledModel(params, grid, pmf, policy.alpha)
    try:
        next_state, r1, r2 = model.choice_tables(policy.choice)
    except ValueError as exc:
        raise ValueError(f"policy is infeasible on this system: {exc}") from exc
    return model, next_state, r1, r2


def simulate(policy, pmf: ChannelPmf, params: SystemParams, grid: GridSpec,
             n_slots: int = 100_000, seed: int = 0, burn_in: float = 0.01,
             n_batches: int = 50, collect_trajectory: bool = False,
             model: CompiledModel | None = None) -> SimulationResult:
    """Time-average throughputs of a policy with batch-means errors.

    Starts from full batteries, discards a burn-in fraction, and batches
    the per-slot reward series to estimate standard errors that respect
    the serial correlation.  `policy` may be a Policy or a MixedPolicy
    (one branch is drawn up front).

    A policy whose action draws more energy than a visited state holds is
    a contract violation and raises immediately, naming the state.
    """
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(policy, MixedPolicy):
        policy = policy.pick(rng)

    model, next_state, r1, r2 = _policy_tables(policy, pmf, params, grid, model)
    outcomes = rng.choice(len(pmf), size=n_slots, p=pmf.prob)

    s = model.state_index(model.n1 - 1, model.n2 - 1)
    rew1 = np.empty(n_slots)
    rew2 = np.empty(n_slots)
    visits = np.zeros(model.n_states, dtype=np.int64)
    rows = [] if collect_trajectory else None
    for t in range(n_slots):
        o = outcomes[t]
        visits[s] += 1
        rew1[t] = r1[s, o]
        rew2[t] = r2[s, o]
        if rows is not None:
            b1, b2 = divmod(s, model.n2)
            rows.append((t, b1, b2, o, rew1[t], rew2[t]))
        s = next_state[s, o]

    skip = int(burn_in * n_slots)
    kept1 = rew1[skip:] * (params.bandwidth_hz / params.t_slot)
    kept2 = rew2[skip:] * (params.bandwidth_hz / params.t_slot)
    g1, se1 = _batch_means(kept1, n_batches)
    g2, se2 = _batch_means(kept2, n_batches)

    trajectory = None
    if rows is not None:
        buf = io.StringIO()
        buf.write("slot,b1,b2,outcome,reward1,reward2\n")
        for row in rows:
            buf.write(f"{row[0]},{row[1]},{row[2]},{row[3]},"
                      f"{row[4]:.12g},{row[5]:.12g}\n")
        trajectory = buf.getvalue()

    return SimulationResult(
        g1_bps=g1, g2_bps=g2, se1_bps=se1, se2_bps=se2, n_slots=n_slots,
        seed=seed, occupancy=(visits / visits.sum()).reshape(model.n1, model.n2),
        trajectory=trajectory)


def _batch_means(series: np.ndarray, n_batches: int) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated series."""
    mean = float(series.mean())
    n_batches = max(2, min(n_batches, len(series)))
    usable = (len(series) // n_batches) * n_batches
    batches = series[:usable].reshape(n_batches, -1).mean(axis=1)
    se = float(batches.std(ddof=1) / np.sqrt(n_batches))
    return mean, se
