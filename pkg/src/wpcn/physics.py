"""Primitive rate, harvesting and battery formulas.

Everything here is a pure function of its arguments; no shared state.

Rates are spectral efficiencies in base-RATE_LOG_BASE logarithm units per
second per hertz.  RATE_LOG_BASE = 2 gives bits/s/Hz; switching to natural
log (nats) only requires changing that constant.
"""

from __future__ import annotations

import math

import numpy as np

from .params import GridSpec, SystemParams

# Base of the logarithm in the rate formula.  2.0 -> bits/s/Hz.
RATE_LOG_BASE = 2.0
_LOG_BASE_LN = math.log(RATE_LOG_BASE)


def rate(rho_w, gain, params: SystemParams):
    """Spectral efficiency log(1 + gain * rho / noise), array-friendly.

    rho_w : transmit power, watts (>= 0)
    gain  : linear channel power gain (>= 0)
    """
    snr = np.asarray(gain) * np.asarray(rho_w) / params.noise_w
    return np.log1p(snr) / _LOG_BASE_LN


def harvested_energy(tau_ap_s, q_w, gain, params: SystemParams):
    """Energy stored by a device during the transfer phase, joules.

    The path loss and fading are already folded into ``gain``; conversion
    losses enter through params.eta.
    """
    return np.asarray(tau_ap_s) * params.eta * np.asarray(q_w) * np.asarray(gain)


def quantize_energy(energy_j, quantum_j: float, rounding: str = "floor"):
    """Energy in joules -> whole battery quanta.

    floor is the default so the discrete model never credits more energy
    than was actually harvested; ceil gives the matching upper bound.
    """
    scaled = np.asarray(energy_j) / quantum_j
    if rounding == "floor":
        return np.floor(scaled).astype(np.int64)
    if rounding == "ceil":
        return np.ceil(scaled).astype(np.int64)
    raise ValueError(f"unknown rounding mode {rounding!r}")


def battery_step(b: int, e: int, harvest_j: float, grid: GridSpec,
                 params: SystemParams, device: int, rounding: str = "floor") -> int:
    """Next battery level in quanta: min(b_max, b - e + quantized harvest).

    b : current level in quanta, e : quanta consumed this slot (e <= b),
    harvest_j : energy received this slot in joules.
    """
    b_max = (grid.b_max1, grid.b_max2)[device]
    if not 0 <= e <= b <= b_max:
        raise ValueError(f"need 0 <= e <= b <= {b_max}, got e={e}, b={b}")
    c = int(quantize_energy(harvest_j, grid.quantum_j(params, device), rounding))
    return min(b_max, b - e + c)
