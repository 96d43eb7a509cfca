"""Vectorized Bellman machinery shared by the exact and approximate solvers.

A CompiledModel pre-tabulates, for a fixed weight alpha:

* the quantized harvest per (channel outcome, transfer duration, power
  split), and
* the optimal per-slot reward and time split per (channel outcome,
  transfer duration, energy budgets),

so one policy-improvement pass reduces to table lookups, additions and
max-reductions over numpy tensors.  The per-state reference search in
:mod:`wpcn.actions` computes the same quantities one state at a time; the
two paths must agree exactly and tests enforce that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import _tau1_root_batch, _tau1_window
from .channel import ChannelPmf
from .params import GridSpec, SystemParams
from .physics import rate

_NEG_INF = -np.inf


@dataclass
class PolicyChoice:
    """Argmax of the reduced search per (state, channel outcome)."""

    t_idx: np.ndarray   # (n_states, n_out) index into the tau_ap grid
    q_idx: np.ndarray   # (n_states, n_out) index into the q1 grid
    e1: np.ndarray      # (n_states, n_out) quanta drawn by device 1
    e2: np.ndarray      # (n_states, n_out) quanta drawn by device 2


class CompiledModel:
    """Tabulated single-alpha model over battery states x channel outcomes."""

    def __init__(self, params: SystemParams, grid: GridSpec, pmf: ChannelPmf,
                 alpha: float, rounding: str = "floor"):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.params = params
        self.grid = grid
        self.pmf = pmf
        self.alpha = float(alpha)
        self.rounding = rounding

        self.n1 = grid.b_max1 + 1
        self.n2 = grid.b_max2 + 1
        self.n_states = self.n1 * self.n2
        self.n_out = len(pmf)
        self.t_grid = np.linspace(0.0, params.t_slot, grid.n_tauap_grid)
        self.q_grid = np.linspace(0.0, params.q_max, grid.n_q1_grid)

        self._build_harvest_tables()
        self._build_reward_tables()
        self._build_state_helpers()

    # ------------------------------------------------------------------
    # table construction
    # ------------------------------------------------------------------
    def _build_harvest_tables(self):
        # Built through the same scalar primitives as the reference search
        # so quantization boundaries match bit for bit.
        from .physics import harvested_energy, quantize_energy

        p, grid = self.params, self.grid
        q1 = self.q_grid[None, None, :]
        q2 = p.q_max - q1
        tau = self.t_grid[None, :, None]
        c1_j = harvested_energy(tau, q1, self.pmf.g1[:, None, None], p)
        c2_j = harvested_energy(tau, q2, self.pmf.g2[:, None, None], p)
        self.c1 = quantize_energy(c1_j, grid.quantum_j(p, 0), self.rounding)
        self.c2 = quantize_energy(c2_j, grid.quantum_j(p, 1), self.rounding)
        # Next-level lookup per (outcome, t, q): m -> min(b_max, m + c)
        m1 = np.arange(self.n1)
        m2 = np.arange(self.n2)
        self._next1 = np.minimum(m1[None, None, None, :] + self.c1[..., None],
                                 self.n1 - 1)
        self._next2 = np.minimum(m2[None, None, None, :] + self.c2[..., None],
                                 self.n2 - 1)

    def _build_reward_tables(self):
        p, grid, alpha = self.params, self.grid, self.alpha
        dev1, dev2 = p.devices
        shape = (self.n_out, len(self.t_grid), self.n1, self.n2)

        e1_j = (np.arange(self.n1) * grid.quantum_j(p, 0))[None, None, :, None]
        e2_j = (np.arange(self.n2) * grid.quantum_j(p, 1))[None, None, None, :]
        avail = (p.t_slot - self.t_grid)[None, :, None, None]
        h1 = self.pmf.h1[:, None, None, None]
        h2 = self.pmf.h2[:, None, None, None]
        e1_j, e2_j, avail, h1, h2 = np.broadcast_arrays(e1_j, e2_j, avail, h1, h2)

        r1 = np.zeros(shape)
        r2 = np.zeros(shape)
        tau1 = np.zeros(shape)
        tau2 = np.zeros(shape)
        feasible = np.zeros(shape, dtype=bool)

        zero = (e1_j == 0) & (e2_j == 0)
        feasible |= zero

        only1 = (e1_j > 0) & (e2_j == 0) & (avail > 0) & (e1_j / dev1.p_max_w <= avail)
        if np.any(only1):
            t1 = np.minimum(avail[only1], e1_j[only1] / dev1.p_min_w)
            tau1[only1] = t1
            r1[only1] = t1 * rate(e1_j[only1] / t1, h1[only1], p)
            feasible |= only1

        only2 = (e2_j > 0) & (e1_j == 0) & (avail > 0) & (e2_j / dev2.p_max_w <= avail)
        if np.any(only2):
            t2 = np.minimum(avail[only2], e2_j[only2] / dev2.p_min_w)
            tau2[only2] = t2
            r2[only2] = t2 * rate(e2_j[only2] / t2, h2[only2], p)
            feasible |= only2

        both = (e1_j > 0) & (e2_j > 0) & (avail > 0)
        if np.any(both):
            lo, hi = _tau1_window(e1_j[both], e2_j[both], avail[both], dev1, dev2)
            ok = lo <= hi
            idx = np.flatnonzero(both.ravel())[ok]
            av = avail[both][ok]
            a1 = e1_j[both][ok] * h1[both][ok] / p.noise_w
            a2 = e2_j[both][ok] * h2[both][ok] / p.noise_w
            root = _tau1_root_batch(av, a1, a2, alpha)
            t1 = np.minimum(np.maximum(root, lo[ok]), hi[ok])
            t2 = av - t1
            tau1.reshape(-1)[idx] = t1
            tau2.reshape(-1)[idx] = t2
            r1.reshape(-1)[idx] = t1 * rate(e1_j[both][ok] / t1, h1[both][ok], p)
            r2.reshape(-1)[idx] = t2 * rate(e2_j[both][ok] / t2, h2[both][ok], p)
            feasible.reshape(-1)[idx] = True

        self.r1 = r1
        self.r2 = r2
        self.tau1 = tau1
        self.tau2 = tau2
        self.feasible = feasible
        self.r = np.where(feasible, alpha * r1 + (1.0 - alpha) * r2, _NEG_INF)

    def _build_state_helpers(self):
        b1s, b2s = np.meshgrid(np.arange(self.n1), np.arange(self.n2),
                               indexing="ij")
        self.b1s = b1s.ravel()
        self.b2s = b2s.ravel()
        self._full_helpers = self._make_helpers(self.b1s, self.b2s)
        # Flat (t, e1, e2) cells ordered by the tie-break preference:
        # larger tau_ap first, then smaller e1+e2, then smaller e1, e2.
        t_i, e1_i, e2_i = np.meshgrid(
            np.arange(len(self.t_grid)), np.arange(self.n1),
            np.arange(self.n2), indexing="ij")
        t_i, e1_i, e2_i = t_i.ravel(), e1_i.ravel(), e2_i.ravel()
        order = np.lexsort((e2_i, e1_i, e1_i + e2_i, -self.t_grid[t_i]))
        self._cell_order = order
        self._cell_t = t_i[order]
        self._cell_e1 = e1_i[order]
        self._cell_e2 = e2_i[order]

    def _make_helpers(self, b1s, b2s):
        e1 = np.arange(self.n1)[None, :]
        e2 = np.arange(self.n2)[None, :]
        m1 = b1s[:, None] - e1
        m2 = b2s[:, None] - e2
        valid = (m1 >= 0)[:, :, None] & (m2 >= 0)[:, None, :]
        penalty = np.where(valid, 0.0, _NEG_INF)
        return np.maximum(m1, 0), np.maximum(m2, 0), penalty

    # ------------------------------------------------------------------
    # Bellman operator
    # ------------------------------------------------------------------
    def state_index(self, b1, b2):
        return np.asarray(b1) * self.n2 + np.asarray(b2)

    def _resolve_states(self, states):
        if states is None:
            return self.b1s, self.b2s, self._full_helpers
        states = np.asarray(states, dtype=np.int64)
        b1s, b2s = states[:, 0], states[:, 1]
        return b1s, b2s, self._make_helpers(b1s, b2s)

    def apply(self, K: np.ndarray, states=None) -> np.ndarray:
        """One policy-improvement pass: values of max(reward + K[next]).

        K is an (n1, n2) table; returns values for the requested battery
        states (all of them in row-major order when states is None).
        """
        b1s, b2s, (m1, m2, penalty) = self._resolve_states(states)
        values = np.zeros(len(b1s))
        for o in range(self.n_out):
            cont = K[self._next1[o][:, :, :, None], self._next2[o][:, :, None, :]]
            w = cont.max(axis=1)                      # (t, m1, m2)
            tot = self.r[o][:, None, :, :] + w[:, m1[:, :, None], m2[:, None, :]]
            tot = tot + penalty[None]
            values += self.pmf.prob[o] * tot.max(axis=(0, 2, 3))
        return values

    def apply_with_argmax(self, K: np.ndarray, states=None
                          ) -> tuple[np.ndarray, PolicyChoice]:
        """Like apply, also returning the tie-broken argmax per outcome."""
        b1s, b2s, (m1, m2, penalty) = self._resolve_states(states)
        ns = len(b1s)
        values = np.zeros(ns)
        t_idx = np.zeros((ns, self.n_out), dtype=np.int64)
        q_idx = np.zeros((ns, self.n_out), dtype=np.int64)
        e1_a = np.zeros((ns, self.n_out), dtype=np.int64)
        e2_a = np.zeros((ns, self.n_out), dtype=np.int64)
        rows = np.arange(ns)
        for o in range(self.n_out):
            cont = K[self._next1[o][:, :, :, None], self._next2[o][:, :, None, :]]
            w = cont.max(axis=1)
            wq = cont.argmax(axis=1)                  # first max -> smallest q1
            tot = self.r[o][:, None, :, :] + w[:, m1[:, :, None], m2[:, None, :]]
            tot = tot + penalty[None]
            flat = tot.transpose(1, 0, 2, 3).reshape(ns, -1)[:, self._cell_order]
            best = flat.argmax(axis=1)                # first max = preferred tie
            values += self.pmf.prob[o] * flat[rows, best]
            ti = self._cell_t[best]
            e1 = self._cell_e1[best]
            e2 = self._cell_e2[best]
            t_idx[:, o] = ti
            e1_a[:, o] = e1
            e2_a[:, o] = e2
            q_idx[:, o] = wq[ti, m1[rows, e1], m2[rows, e2]]
        return values, PolicyChoice(t_idx, q_idx, e1_a, e2_a)

    # ------------------------------------------------------------------
    # induced dynamics of a fixed choice table
    # ------------------------------------------------------------------
    def choice_tables(self, choice: PolicyChoice, states=None):
        """Per (state, outcome): next flat state and unweighted rewards.

        Rewards are per-slot tau_i * R_i in log-base units per hertz.
        """
        b1s, b2s, _ = self._resolve_states(states)
        out = np.arange(self.n_out)[None, :]
        m1 = b1s[:, None] - choice.e1
        m2 = b2s[:, None] - choice.e2
        bad = np.argwhere((m1 < 0) | (m2 < 0))
        if len(bad):
            s, o = bad[0]
            raise ValueError(
                f"action draws more quanta than stored at battery state "
                f"({b1s[s]}, {b2s[s]}), outcome {o}: e=({choice.e1[s, o]}, "
                f"{choice.e2[s, o]})")
        b1n = np.minimum(m1 + self.c1[out, choice.t_idx, choice.q_idx], self.n1 - 1)
        b2n = np.minimum(m2 + self.c2[out, choice.t_idx, choice.q_idx], self.n2 - 1)
        r1 = self.r1[out, choice.t_idx, choice.e1, choice.e2]
        r2 = self.r2[out, choice.t_idx, choice.e1, choice.e2]
        if not np.all(self.feasible[out, choice.t_idx, choice.e1, choice.e2]):
            raise ValueError("choice table contains an infeasible action")
        return self.state_index(b1n, b2n), r1, r2

    def action_fields(self, choice: PolicyChoice):
        """Seven-entry action arrays (state, outcome) for a choice table."""
        out = np.arange(self.n_out)[None, :]
        tau_ap = self.t_grid[choice.t_idx]
        q1 = self.q_grid[choice.q_idx]
        tau1 = self.tau1[out, choice.t_idx, choice.e1, choice.e2]
        tau2 = self.tau2[out, choice.t_idx, choice.e1, choice.e2]
        quantum1 = self.grid.quantum_j(self.params, 0)
        quantum2 = self.grid.quantum_j(self.params, 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho1 = np.where(tau1 > 0, choice.e1 * quantum1 / np.where(tau1 > 0, tau1, 1.0), 0.0)
            rho2 = np.where(tau2 > 0, choice.e2 * quantum2 / np.where(tau2 > 0, tau2, 1.0), 0.0)
        return dict(tau1=tau1, tau2=tau2, tau_ap=tau_ap, rho1=rho1, rho2=rho2,
                    q1=q1, q2=self.params.q_max - q1)
