"""Harvest-then-transmit baseline: single-slot max-min optimization.

Within one slot, energy harvested during the transfer phase is consumed
in the same slot and the smaller of the two per-slot rewards is
maximized.  At the optimum the rewards are equal and the time budget is
tight, which reduces the problem to the two uplink powers: for fixed
(rho1, rho2), the balanced reward has the closed form

    v(rho) = min( eta q_max T / (A + eta q_max B0),
                  B1 R1 / rho1,  B2 R2 / rho2 ),
    A  = rho1 / (R1 g1) + rho2 / (R2 g2),   B0 = 1/R1 + 1/R2,

whose first branch is the all-budgets-tight solution (transfer power
fully used, every harvested joule consumed) and whose other branches cap
the reward when a battery fills first.  The interior stationary powers
solve a scalar transcendental equation per device; when that point falls
outside the power box or a battery cap binds, the optimum over the box
is found by a zoomed grid on v.

When a battery cap binds, the unused transfer budget is left unallocated
(q1 + q2 < q_max): spending it could only overflow a battery, and the
returned schedule keeps the per-slot energy balance exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .channel import ChannelPmf
from .params import SystemParams
from .physics import rate

_ZOOM_ROUNDS = 5
_ZOOM_POINTS = 41


@dataclass(frozen=True)
class SlotSolution:
    """Optimal single-slot schedule and its per-slot reward in bits."""

    tau1: float
    tau2: float
    tau_ap: float
    rho1: float
    rho2: float
    q1: float
    q2: float
    reward_bits: float
    on_boundary: bool = False
    reward_linear: float | None = None

    def csv_row(self) -> str:
        return (f"{self.tau1:.12g},{self.tau2:.12g},{self.tau_ap:.12g},"
                f"{self.rho1:.12g},{self.rho2:.12g},{self.q1:.12g},"
                f"{self.q2:.12g},{self.reward_bits:.12g}")

    @staticmethod
    def csv_header() -> str:
        return "tau1_s,tau2_s,tau_ap_s,rho1_w,rho2_w,q1_w,q2_w,reward_bits"


ZERO_SOLUTION = SlotSolution(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def _balanced_reward(rho1, rho2, g1, g2, h1, h2, params: SystemParams):
    """Equalized per-slot reward v and the per-power rates, vectorized."""
    t, qmax, eta = params.t_slot, params.q_max, params.eta
    b1 = params.devices[0].battery_j
    b2 = params.devices[1].battery_j
    r1 = rate(rho1, h1, params)
    r2 = rate(rho2, h2, params)
    a = rho1 / (r1 * g1) + rho2 / (r2 * g2)
    b0 = 1.0 / r1 + 1.0 / r2
    v_tight = eta * qmax * t / (a + eta * qmax * b0)
    v = np.minimum(v_tight, np.minimum(b1 * r1 / rho1, b2 * r2 / rho2))
    return v, r1, r2


def _solution_at(rho1, rho2, g1, g2, h1, h2, params: SystemParams,
                 on_boundary: bool) -> SlotSolution:
    v, r1, r2 = _balanced_reward(np.asarray(rho1), np.asarray(rho2),
                                 g1, g2, h1, h2, params)
    v, r1, r2 = float(v), float(r1), float(r2)
    tau1, tau2 = v / r1, v / r2
    tau_ap = params.t_slot - tau1 - tau2
    eta = params.eta
    q1 = tau1 * rho1 / (tau_ap * eta * g1)
    q2 = tau2 * rho2 / (tau_ap * eta * g2)
    return SlotSolution(tau1=tau1, tau2=tau2, tau_ap=tau_ap,
                        rho1=float(rho1), rho2=float(rho2),
                        q1=q1, q2=q2,
                        reward_bits=params.bandwidth_hz * v,
                        on_boundary=on_boundary)


def _stationary_power(g, h, params: SystemParams) -> float:
    """Root of (noise/h + rho) ln(1 + h rho / noise) = rho + eta g q_max.

    The left side grows superlinearly from 0, the right is affine with a
    positive intercept, so there is exactly one positive crossing.
    """
    noise, lift = params.noise_w, params.eta * g * params.q_max

    def f(rho):
        return (noise / h + rho) * math.log1p(h * rho / noise) - rho - lift

    hi = max(params.devices[0].p_max_w, params.devices[1].p_max_w, 1e-6)
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e15:  # pragma: no cover - physically impossible
            raise RuntimeError("failed to bracket the stationary power")
    # xtol far below any physical power so termination is relative; the
    # root can sit many orders of magnitude under the bracket width.
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=8.9e-16, maxiter=600)


def _zoom_search(g1, g2, h1, h2, params: SystemParams) -> SlotSolution:
    """Maximize the balanced reward over the power box by a zoomed grid."""
    dev1, dev2 = params.devices
    lo1, hi1 = dev1.p_min_w, dev1.p_max_w
    lo2, hi2 = dev2.p_min_w, dev2.p_max_w
    best = None
    for _ in range(_ZOOM_ROUNDS):
        p1 = np.linspace(lo1, hi1, _ZOOM_POINTS)
        p2 = np.linspace(lo2, hi2, _ZOOM_POINTS)
        m1, m2 = np.meshgrid(p1, p2, indexing="ij")
        v, _, _ = _balanced_reward(m1, m2, g1, g2, h1, h2, params)
        i, j = np.unravel_index(np.argmax(v), v.shape)
        cand = (float(v[i, j]), float(m1[i, j]), float(m2[i, j]))
        if best is None or cand[0] > best[0]:
            best = cand
        step1 = p1[1] - p1[0] if len(p1) > 1 else 0.0
        step2 = p2[1] - p2[0] if len(p2) > 1 else 0.0
        lo1 = max(dev1.p_min_w, cand[1] - step1)
        hi1 = min(dev1.p_max_w, cand[1] + step1)
        lo2 = max(dev2.p_min_w, cand[2] - step2)
        hi2 = min(dev2.p_max_w, cand[2] + step2)
        if step1 == 0.0 and step2 == 0.0:
            break
    return _solution_at(best[1], best[2], g1, g2, h1, h2, params,
                        on_boundary=True)


def solve_slot(g1: float, g2: float, h1: float, h2: float,
               params: SystemParams) -> SlotSolution:
    """Max-min optimal single-slot schedule for one channel draw.

    A device with a zero gain pins the per-slot minimum to zero, so those
    draws return the zero schedule.  Otherwise the per-device stationary
    powers are tried first; they are the exact optimum whenever they fall
    inside the power box with both battery caps slack.  Any other case is
    solved by the zoomed grid over the power box.
    """
    if min(g1, g2, h1, h2) <= 0.0:
        return ZERO_SOLUTION
    dev1, dev2 = params.devices
    rho1 = _stationary_power(g1, h1, params)
    rho2 = _stationary_power(g2, h2, params)
    power_ok = (dev1.p_min_w <= rho1 <= dev1.p_max_w
                and dev2.p_min_w <= rho2 <= dev2.p_max_w)
    if power_ok:
        v, r1, r2 = _balanced_reward(np.asarray(rho1), np.asarray(rho2),
                                     g1, g2, h1, h2, params)
        batteries_slack = (float(v) < (1 - 1e-12) * dev1.battery_j * float(r1) / rho1
                           and float(v) < (1 - 1e-12) * dev2.battery_j * float(r2) / rho2)
        if batteries_slack:
            return _solution_at(rho1, rho2, g1, g2, h1, h2, params,
                                on_boundary=False)
    return _zoom_search(g1, g2, h1, h2, params)


def solve_slot_low_snr(g1: float, g2: float, h1: float, h2: float,
                       params: SystemParams) -> SlotSolution:
    """Closed-form single-slot schedule in the low-SNR regime.

    The stationary-power equation expands as noise/h * ((1+x)ln(1+x) - x)
    = eta g q_max with x = h rho / noise; keeping the leading x^2/2 term
    gives rho* = sqrt(2 eta g q_max noise / h) per device, the low-SNR
    limit of the exact root.  (Linearizing the log all the way to x drops
    the factor 2 and leaves a 1 - 1/sqrt(2) error that never vanishes.)
    The transfer split weights the weaker combined link:
    q_i* / q_max = g_j h_j / (g1 h1 + g2 h2), j the other device.

    reward_bits scores the schedule with the exact log rate;
    reward_linear keeps the linearized balanced reward the schedule was
    derived from.  Battery caps are assumed slack (harvested energy at
    low SNR is small).
    """
    if min(g1, g2, h1, h2) <= 0.0:
        return ZERO_SOLUTION
    noise, qmax, eta, t = params.noise_w, params.q_max, params.eta, params.t_slot
    rho1 = math.sqrt(2.0 * eta * g1 * qmax * noise / h1)
    rho2 = math.sqrt(2.0 * eta * g2 * qmax * noise / h2)
    r1_lin = h1 * rho1 / noise
    r2_lin = h2 * rho2 / noise
    a = rho1 / (r1_lin * g1) + rho2 / (r2_lin * g2)
    b0 = 1.0 / r1_lin + 1.0 / r2_lin
    v_lin = eta * qmax * t / (a + eta * qmax * b0)
    tau1, tau2 = v_lin / r1_lin, v_lin / r2_lin
    tau_ap = t - tau1 - tau2
    q1 = tau1 * rho1 / (tau_ap * eta * g1)
    q2 = tau2 * rho2 / (tau_ap * eta * g2)
    exact = tau1 * float(rate(rho1, h1, params))
    return SlotSolution(tau1=tau1, tau2=tau2, tau_ap=tau_ap,
                        rho1=rho1, rho2=rho2, q1=q1, q2=q2,
                        reward_bits=params.bandwidth_hz * exact,
                        reward_linear=v_lin)


def slot_solutions(pmf: ChannelPmf, params: SystemParams) -> list[SlotSolution]:
    return [solve_slot(pmf.g1[o], pmf.g2[o], pmf.h1[o], pmf.h2[o], params)
            for o in range(len(pmf))]


def long_term_slot_reward(pmf: ChannelPmf, params: SystemParams) -> float:
    """Average slot-oriented throughput over the channel pmf, bits/s."""
    sols = slot_solutions(pmf, params)
    per_slot = sum(p * s.reward_bits for p, s in zip(pmf.prob, sols))
    return per_slot / params.t_slot
