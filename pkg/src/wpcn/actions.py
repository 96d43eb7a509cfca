"""Per-state action optimization.

A full action has seven entries (tau1, tau2, tau_ap, rho1, rho2, q1, q2).
The search space is reduced to four (tau_ap, q1, e1, e2): given the energy
budgets E_i = e_i * quantum_i, the time/power split is recovered from a
scalar concave subproblem in tau1 whose derivative has at most one zero,
found by bracketed bisection and clamped to the feasible window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import GridSpec, SystemParams
from .physics import RATE_LOG_BASE, battery_step, harvested_energy, rate

_LN_BASE = np.log(RATE_LOG_BASE)

# Bisection iterations for the tau1 root; interval shrinks by 2^-60,
# well inside a 1e-12 bracket width relative to the slot length.
_ROOT_ITERS = 60


class InfeasibleSplitError(ValueError):
    """No (tau, rho) split satisfies the power bounds for these budgets."""


@dataclass(frozen=True)
class Action:
    """Full per-slot decision: uplink times/powers and the transfer split."""

    tau1: float
    tau2: float
    tau_ap: float
    rho1: float
    rho2: float
    q1: float
    q2: float

    def validate(self, params: SystemParams, battery_j: tuple[float, float],
                 atol: float = 1e-9) -> None:
        """Raise ValueError if any feasibility constraint is violated."""
        t = params.t_slot
        slack = atol * t
        fields = (self.tau1, self.tau2, self.tau_ap,
                  self.rho1, self.rho2, self.q1, self.q2)
        if any(v < -1e-15 for v in fields):
            raise ValueError(f"negative entry in {self}")
        if self.tau1 + self.tau2 + self.tau_ap > t + slack:
            raise ValueError("time budget exceeded")
        if self.q1 + self.q2 > params.q_max * (1 + atol):
            raise ValueError("transfer power budget exceeded")
        for i, (tau, rho, dev, cap) in enumerate(
                ((self.tau1, self.rho1, params.devices[0], battery_j[0]),
                 (self.tau2, self.rho2, params.devices[1], battery_j[1]))):
            if tau * rho > cap * (1 + atol) + 1e-18:
                raise ValueError(f"device {i + 1} consumes more than stored")
            if tau > 1e-15 and not (dev.p_min_w * (1 - atol) <= rho <= dev.p_max_w * (1 + atol)):
                raise ValueError(f"device {i + 1} power {rho} outside bounds")


@dataclass(frozen=True)
class ReducedAction:
    """Search-space form of an action: transfer phase plus energy budgets."""

    tau_ap: float
    q1: float
    e1: int
    e2: int


def _phi(tau1, avail, a1, a2, alpha):
    """Derivative (in nats) of the weighted two-device reward wrt tau1."""
    tau2 = avail - tau1
    term1 = np.log1p(a1 / tau1) - a1 / (tau1 + a1)
    term2 = np.log1p(a2 / tau2) - a2 / (tau2 + a2)
    return alpha * term1 - (1.0 - alpha) * term2


def _split_objective(tau1, avail, e1_j, e2_j, h1, h2, alpha, params):
    # Callers guarantee tau1 and avail - tau1 positive (power-bound window).
    tau2 = avail - tau1
    r1 = tau1 * rate(e1_j / tau1, h1, params)
    r2 = tau2 * rate(e2_j / tau2, h2, params)
    return alpha * r1 + (1.0 - alpha) * r2


def _tau1_window(e1_j, e2_j, avail, dev1, dev2):
    """Feasible tau1 interval implied by both devices' power bounds."""
    lo = np.maximum(e1_j / dev1.p_max_w, avail - e2_j / dev2.p_min_w)
    hi = np.minimum(e1_j / dev1.p_min_w, avail - e2_j / dev2.p_max_w)
    return lo, hi


def _tau1_root_batch(avail, a1, a2, alpha):
    """Vectorized bisection for the unique zero of _phi on (0, avail).

    The derivative is strictly decreasing, positive near 0 and negative
    near avail (for 0 < alpha < 1), so plain bisection is safe.
    """
    avail = np.asarray(avail, dtype=float)
    if alpha >= 1.0:
        return avail.copy()
    if alpha <= 0.0:
        return np.zeros_like(avail)
    lo = avail * 1e-12
    hi = avail * (1.0 - 1e-12)
    for _ in range(_ROOT_ITERS):
        mid = 0.5 * (lo + hi)
        pos = _phi(mid, avail, a1, a2, alpha) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def solve_tau1(e1_j: float, e2_j: float, tau_ap: float, h1: float, h2: float,
               alpha: float, params: SystemParams) -> tuple[float, float]:
    """Optimal device-1 airtime and weighted reward for fixed energies.

    Requires e1_j, e2_j > 0 and tau_ap < t_slot.  Raises
    InfeasibleSplitError when the power bounds leave no feasible tau1.
    Returns (tau1, weighted reward); tau2 is t_slot - tau_ap - tau1.
    """
    if e1_j <= 0 or e2_j <= 0:
        raise ValueError("both energy budgets must be positive here; "
                         "zero-energy cases are handled by the caller")
    avail = params.t_slot - tau_ap
    if avail <= 0:
        raise InfeasibleSplitError("no uplink time left")
    dev1, dev2 = params.devices
    lo, hi = _tau1_window(e1_j, e2_j, avail, dev1, dev2)
    if lo > hi:
        raise InfeasibleSplitError(
            f"empty tau1 window [{lo}, {hi}] for E=({e1_j}, {e2_j})")
    a1 = e1_j * h1 / params.noise_w
    a2 = e2_j * h2 / params.noise_w
    root = float(_tau1_root_batch(np.asarray(avail), a1, a2, alpha))
    tau1 = min(max(root, lo), hi)
    obj = float(_split_objective(np.asarray(tau1), avail, e1_j, e2_j,
                                 h1, h2, alpha, params))
    return tau1, obj


def single_device_split(e_j: float, avail: float, device) -> tuple[float, float]:
    """(tau, rho) maximizing tau * R(e/tau) when only one device transmits.

    tau * R(e/tau) increases with tau, so use the largest airtime allowed
    by the minimum power; infeasible when even full power cannot drain the
    budget in the available time.
    """
    if e_j <= 0:
        return 0.0, 0.0
    if e_j / device.p_max_w > avail:
        raise InfeasibleSplitError("budget cannot be spent in the time left")
    tau = min(avail, e_j / device.p_min_w)
    return tau, e_j / tau


def reward_for_budgets(e1_j: float, e2_j: float, tau_ap: float,
                       h1: float, h2: float, alpha: float,
                       params: SystemParams) -> tuple[float, float, float]:
    """Weighted per-slot reward for energy budgets (e1_j, e2_j).

    Dispatches between the zero, single-device and two-device cases.
    Returns (reward, tau1, tau2); raises InfeasibleSplitError when the
    budgets cannot be transmitted at feasible powers.
    """
    avail = params.t_slot - tau_ap
    if e1_j <= 0 and e2_j <= 0:
        return 0.0, 0.0, 0.0
    if avail <= 0:
        raise InfeasibleSplitError("no uplink time left")
    dev1, dev2 = params.devices
    if e2_j <= 0:
        tau1, _ = single_device_split(e1_j, avail, dev1)
        return alpha * (tau1 * float(rate(e1_j / tau1, h1, params))), tau1, 0.0
    if e1_j <= 0:
        tau2, _ = single_device_split(e2_j, avail, dev2)
        return (1 - alpha) * (tau2 * float(rate(e2_j / tau2, h2, params))), 0.0, tau2
    tau1, obj = solve_tau1(e1_j, e2_j, tau_ap, h1, h2, alpha, params)
    return obj, tau1, avail - tau1


def build_action(e1: int, e2: int, tau_ap: float, q1: float,
                 tau1: float, tau2: float, params: SystemParams,
                 grid: GridSpec) -> Action:
    """Full action from the reduced form plus the recovered airtimes."""
    e1_j = e1 * grid.quantum_j(params, 0)
    e2_j = e2 * grid.quantum_j(params, 1)
    rho1 = e1_j / tau1 if tau1 > 0 else 0.0
    rho2 = e2_j / tau2 if tau2 > 0 else 0.0
    return Action(tau1=tau1, tau2=tau2, tau_ap=tau_ap,
                  rho1=rho1, rho2=rho2, q1=q1, q2=params.q_max - q1)


def prune_bounds(e_star: tuple[int, int], b: tuple[int, int]
                 ) -> tuple[tuple[int, int], tuple[int, int]]:
    """Search rectangle for a channel state with h1' >= h1 and h2' <= h2.

    A device's best energy use never decreases with its own uplink gain,
    so relative to the argmax e_star at the reference state the search
    shrinks to [e1*, b1] x [0, e2*].
    """
    (e1s, e2s), (b1, b2) = e_star, b
    return (min(e1s, b1), b1), (0, min(e2s, b2))


def optimize_state(b: tuple[int, int], g: tuple[float, float],
                   h: tuple[float, float], alpha: float, K: np.ndarray,
                   params: SystemParams, grid: GridSpec,
                   bounds=None) -> tuple[Action, float]:
    """Exhaustive search over the reduced action space for one state.

    Reference implementation: loops over e1, e2, tau_ap and q1, recovers
    the time/power split per combination and scores reward + K[next state].
    `bounds` optionally restricts ((e1_lo, e1_hi), (e2_lo, e2_hi)).
    Ties prefer larger tau_ap, then smaller e1 + e2, then smaller e1,
    then smaller q1.

    The all-zero action is always feasible, so a best action always exists.
    """
    (b1, b2), (g1, g2), (h1, h2) = b, g, h
    t_grid = np.linspace(0.0, params.t_slot, grid.n_tauap_grid)
    q_grid = np.linspace(0.0, params.q_max, grid.n_q1_grid)
    (e1_lo, e1_hi), (e2_lo, e2_hi) = bounds or ((0, b1), (0, b2))

    best = None  # (value, tau_ap, -(e1+e2), -e1, -q1) lexicographic key
    best_choice = None
    for e1 in range(e1_lo, e1_hi + 1):
        for e2 in range(e2_lo, e2_hi + 1):
            e1_j = e1 * grid.quantum_j(params, 0)
            e2_j = e2 * grid.quantum_j(params, 1)
            for tau_ap in t_grid:
                try:
                    r, tau1, tau2 = reward_for_budgets(
                        e1_j, e2_j, tau_ap, h1, h2, alpha, params)
                except InfeasibleSplitError:
                    continue
                for q1 in q_grid:
                    b1n = battery_step(
                        b1, e1, harvested_energy(tau_ap, q1, g1, params),
                        grid, params, 0)
                    b2n = battery_step(
                        b2, e2, harvested_energy(tau_ap, params.q_max - q1,
                                                 g2, params),
                        grid, params, 1)
                    value = r + K[b1n, b2n]
                    key = (value, tau_ap, -(e1 + e2), -e1, -q1)
                    if best is None or key > best:
                        best = key
                        best_choice = (e1, e2, tau_ap, q1, tau1, tau2)

    e1, e2, tau_ap, q1, tau1, tau2 = best_choice
    action = build_action(e1, e2, tau_ap, q1, tau1, tau2, params, grid)
    action.validate(params, (b1 * grid.quantum_j(params, 0),
                             b2 * grid.quantum_j(params, 1)))
    return action, best[0]


def low_snr_fast_path(b: tuple[int, int], g: tuple[float, float],
                      h: tuple[float, float], alpha: float, K: np.ndarray,
                      params: SystemParams, grid: GridSpec,
                      snr_threshold: float = 0.01) -> tuple[Action, float]:
    """Reduced search for the low-SNR regime.

    When h_i * p_max_i / noise is small for both devices the rate is
    nearly linear in power, so transmitting at full power for the shortest
    time frees the largest transfer phase; tau_ap is then determined by
    the budgets instead of being gridded.  Actions are ranked by the
    linearized reward; the returned value re-scores the winner with the
    exact rate so it never exceeds the full optimizer's value.

    Falls back to optimize_state when the SNR precondition fails.
    """
    (b1, b2), (g1, g2), (h1, h2) = b, g, h
    dev1, dev2 = params.devices
    if (h1 * dev1.p_max_w / params.noise_w >= snr_threshold
            or h2 * dev2.p_max_w / params.noise_w >= snr_threshold):
        return optimize_state(b, g, h, alpha, K, params, grid)

    q_grid = np.linspace(0.0, params.q_max, grid.n_q1_grid)
    quantum1 = grid.quantum_j(params, 0)
    quantum2 = grid.quantum_j(params, 1)

    best_score = None
    best_choice = None
    for e1 in range(b1 + 1):
        for e2 in range(b2 + 1):
            e1_j, e2_j = e1 * quantum1, e2 * quantum2
            tau1 = e1_j / dev1.p_max_w
            tau2 = e2_j / dev2.p_max_w
            tau_ap = params.t_slot - tau1 - tau2
            if tau_ap < 0:
                continue
            lin = (alpha * e1_j * h1 + (1 - alpha) * e2_j * h2) / params.noise_w
            lin /= _LN_BASE
            for q1 in q_grid:
                b1n = battery_step(b1, e1,
                                   harvested_energy(tau_ap, q1, g1, params),
                                   grid, params, 0)
                b2n = battery_step(b2, e2,
                                   harvested_energy(tau_ap, params.q_max - q1,
                                                    g2, params),
                                   grid, params, 1)
                score = (lin + K[b1n, b2n], tau_ap, -(e1 + e2), -e1, -q1)
                if best_score is None or score > best_score:
                    best_score = score
                    best_choice = (e1, e2, tau_ap, q1, tau1, tau2,
                                   K[b1n, b2n])

    e1, e2, tau_ap, q1, tau1, tau2, k_next = best_choice
    r_exact = (alpha * tau1 * float(rate(dev1.p_max_w, h1, params))
               + (1 - alpha) * tau2 * float(rate(dev2.p_max_w, h2, params)))
    action = build_action(e1, e2, tau_ap, q1, tau1, tau2, params, grid)
    action.validate(params, (b1 * quantum1, b2 * quantum2))
    return action, r_exact + k_next
