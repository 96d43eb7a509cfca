"""Average-reward value iteration and exact policy evaluation.

The battery pair is the only state carried across slots (the channel is
independent over time), so the cost-to-go table K lives on the
(b_max1 + 1) x (b_max2 + 1) lattice.  The relative (span-seminorm) variant
anchors K at the empty-battery state each sweep; a sweep stops mattering
once the span of successive differences falls below the tolerance.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .actions import Action
from .bellman import CompiledModel, PolicyChoice
from .channel import ChannelPmf
from .params import GridSpec, SystemParams

ANCHOR_STATE = (0, 0)


@dataclass
class Policy:
    """Deterministic action table over (battery pair, channel outcome)."""

    choice: PolicyChoice
    fields: dict          # seven action-entry arrays, each (n_states, n_out)
    n1: int
    n2: int
    n_out: int
    alpha: float

    def state_index(self, b1: int, b2: int) -> int:
        return b1 * self.n2 + b2

    def action(self, b1: int, b2: int, outcome: int) -> Action:
        s = self.state_index(b1, b2)
        f = self.fields
        return Action(tau1=float(f["tau1"][s, outcome]),
                      tau2=float(f["tau2"][s, outcome]),
                      tau_ap=float(f["tau_ap"][s, outcome]),
                      rho1=float(f["rho1"][s, outcome]),
                      rho2=float(f["rho2"][s, outcome]),
                      q1=float(f["q1"][s, outcome]),
                      q2=float(f["q2"][s, outcome]))

    def to_csv(self) -> str:
        """One row per (b1, b2, outcome) with the seven action entries."""
        buf = io.StringIO()
        buf.write("b1,b2,outcome,tau1_s,tau2_s,tau_ap_s,"
                  "rho1_w,rho2_w,q1_w,q2_w,e1_quanta,e2_quanta\n")
        f, c = self.fields, self.choice
        for b1 in range(self.n1):
            for b2 in range(self.n2):
                s = self.state_index(b1, b2)
                for o in range(self.n_out):
                    buf.write(
                        f"{b1},{b2},{o},"
                        f"{f['tau1'][s, o]:.12g},{f['tau2'][s, o]:.12g},"
                        f"{f['tau_ap'][s, o]:.12g},{f['rho1'][s, o]:.12g},"
                        f"{f['rho2'][s, o]:.12g},{f['q1'][s, o]:.12g},"
                        f"{f['q2'][s, o]:.12g},{c.e1[s, o]},{c.e2[s, o]}\n")
        return buf.getvalue()


def value_function_to_csv(K: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("b1,b2,value\n")
    n1, n2 = K.shape
    for b1 in range(n1):
        for b2 in range(n2):
            buf.write(f"{b1},{b2},{K[b1, b2]:.12g}\n")
    return buf.getvalue()


@dataclass
class ThroughputPair:
    """Long-term per-device throughputs in bits/s."""

    g1_bps: float
    g2_bps: float
    multichain: bool = False
    n_reachable: int = 0
    stationary: np.ndarray | None = field(default=None, repr=False)

    @property
    def min_bps(self) -> float:
        return min(self.g1_bps, self.g2_bps)

    def weighted(self, alpha: float) -> float:
        return alpha * self.g1_bps + (1.0 - alpha) * self.g2_bps


@dataclass
class ViaResult:
    value_function: np.ndarray
    policy: Policy
    n_iter: int
    converged: bool
    span_history: list[float]
    gain_per_slot: float
    model: CompiledModel = field(repr=False)
    history: list[np.ndarray] | None = field(default=None, repr=False)


def _make_policy(model: CompiledModel, choice: PolicyChoice) -> Policy:
    return Policy(choice=choice, fields=model.action_fields(choice),
                  n1=model.n1, n2=model.n2, n_out=model.n_out,
                  alpha=model.alpha)


def value_iteration(alpha: float, pmf: ChannelPmf, params: SystemParams,
                    grid: GridSpec, tol: float = 1e-6, max_iters: int = 300,
                    k_init: np.ndarray | None = None, anchor: bool = True,
                    rounding: str = "floor", keep_history: bool = False,
                    model: CompiledModel | None = None) -> ViaResult:
    """Relative value iteration for the weighted average-reward objective.

    Sweeps apply the policy-improvement operator to every battery state,
    then subtract K[0, 0] so the table stays anchored; iteration stops
    when the span (max - min) of successive differences drops below tol.
    With anchor=False the raw iterates are kept, which is what the
    approximation-error bound is stated against.

    Returns the final table, the greedy policy of the last sweep and
    convergence diagnostics; converged=False flags running out of sweeps.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    model = model or CompiledModel(params, grid, pmf, alpha, rounding)
    K = np.zeros((model.n1, model.n2)) if k_init is None else np.array(k_init, dtype=float)
    if K.shape != (model.n1, model.n2):
        raise ValueError("k_init has the wrong shape for this grid")

    spans: list[float] = []
    history = [K.copy()] if keep_history else None
    gain = 0.0
    converged = False
    n_done = 0
    for _ in range(max_iters):
        new = model.apply(K).reshape(model.n1, model.n2)
        diff = new - K
        spans.append(float(diff.max() - diff.min()))
        gain = 0.5 * float(diff.max() + diff.min())
        if anchor:
            new = new - new[ANCHOR_STATE]
        K = new
        n_done += 1
        if keep_history:
            history.append(K.copy())
        if spans[-1] < tol:
            converged = True
            break

    values, choice = model.apply_with_argmax(K)
    policy = _make_policy(model, choice)
    return ViaResult(value_function=K, policy=policy, n_iter=n_done,
                     converged=converged, span_history=spans,
                     gain_per_slot=gain, model=model, history=history)


def _stationary_distribution(P: np.ndarray, tol: float = 1e-12,
                             max_iters: int = 20000) -> tuple[np.ndarray, bool]:
    """Stationary row vector of a stochastic matrix.

    Power iteration on the half-lazy chain (P + I) / 2, which shares the
    stationary distribution but cannot be periodic; direct linear solve as
    a fallback when iteration stalls.
    """
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    lazy = 0.5 * (P + np.eye(n))
    for _ in range(max_iters):
        nxt = pi @ lazy
        if np.abs(nxt - pi).sum() < tol:
            return nxt / nxt.sum(), True
        pi = nxt
    a = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum(), False


def _recurrent_class_count(P: np.ndarray) -> int:
    """Number of closed communicating classes of the chain."""
    sparse = csr_matrix(P > 0)
    n_comp, labels = connected_components(sparse, directed=True,
                                          connection="strong")
    closed = 0
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = P[np.ix_(members, np.setdiff1d(np.arange(P.shape[0]), members))]
        if outside.size == 0 or outside.sum() <= 0:
            closed += 1
    return closed


def evaluate_policy(policy: Policy, pmf: ChannelPmf, params: SystemParams,
                    grid: GridSpec, model: CompiledModel | None = None
                    ) -> ThroughputPair:
    """Exact long-term per-device throughputs of a fixed policy.

    Integrates the channel out of the one-slot dynamics, solves the
    stationary distribution of the induced battery chain starting from
    full batteries, and averages the per-slot rewards.  When the chain
    has several closed classes only the class reachable from full
    batteries is evaluated and the result is flagged multichain.
    """
    model = model or CompiledModel(params, grid, pmf, policy.alpha)
    next_state, r1, r2 = model.choice_tables(policy.choice)
    ns = model.n_states
    P = np.zeros((ns, ns))
    rew1 = (r1 * pmf.prob[None, :]).sum(axis=1)
    rew2 = (r2 * pmf.prob[None, :]).sum(axis=1)
    for o in range(model.n_out):
        np.add.at(P, (np.arange(ns), next_state[:, o]), pmf.prob[o])

    start = model.state_index(model.n1 - 1, model.n2 - 1)
    order = breadth_first_order(csr_matrix(P > 0), start,
                                return_predecessors=False)
    reachable = np.sort(np.atleast_1d(order))
    sub = P[np.ix_(reachable, reachable)]
    # Mass leaving the reachable set would indicate a bookkeeping bug.
    if not np.allclose(sub.sum(axis=1), 1.0, atol=1e-12):
        raise AssertionError("transition mass escapes the reachable class")
    pi_sub, _ = _stationary_distribution(sub)
    pi = np.zeros(ns)
    pi[reachable] = pi_sub

    multichain = _recurrent_class_count(P) > 1
    g1 = params.bits_per_second(float(pi @ rew1))
    g2 = params.bits_per_second(float(pi @ rew2))
    return ThroughputPair(g1_bps=g1, g2_bps=g2, multichain=multichain,
                          n_reachable=len(reachable), stationary=pi)


def steady_state_action_averages(policy: Policy, pmf: ChannelPmf,
                                 params: SystemParams, grid: GridSpec,
                                 model: CompiledModel | None = None) -> dict:
    """Stationary averages of the seven action entries.

    Powers are averaged over the slots in which the device transmits
    (zero-airtime slots carry no power), transfer powers over all slots.
    """
    model = model or CompiledModel(params, grid, pmf, policy.alpha)
    pair = evaluate_policy(policy, pmf, params, grid, model=model)
    weights = pair.stationary[:, None] * pmf.prob[None, :]
    f = policy.fields
    out = {}
    for name in ("tau1", "tau2", "tau_ap", "q1", "q2"):
        out[name] = float((f[name] * weights).sum())
    for name, tau_name in (("rho1", "tau1"), ("rho2", "tau2")):
        on = f[tau_name] > 0
        mass = float(weights[on].sum())
        out[name] = float((f[name] * weights)[on].sum() / mass) if mass > 0 else 0.0
    out["g1_bps"], out["g2_bps"] = pair.g1_bps, pair.g2_bps
    return out
