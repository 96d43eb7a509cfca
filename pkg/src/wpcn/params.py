"""System description: physical constants and discretization settings.

All quantities are kept in SI units internally (watts, joules, seconds,
hertz, meters).  Channel gains are linear power gains.  The only unit
conversion helper provided is :func:`noise_power_watts`, which turns a
noise spectral density in dBm/Hz into a total noise power in watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


def noise_power_watts(dbm_per_hz: float, bandwidth_hz: float) -> float:
    """Total noise power in watts from a density in dBm/Hz and a bandwidth."""
    dbm_total = dbm_per_hz + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** ((dbm_total - 30.0) / 10.0)


@dataclass(frozen=True)
class DeviceParams:
    """Per-device physical constants.

    distance_m : distance from the access point, meters
    h0, g0     : uplink / downlink power gains at the 1 m reference distance
    gamma      : uplink path-loss exponent
    delta      : downlink path-loss exponent
    p_min_w, p_max_w : transmission power bounds, watts
    battery_j  : battery capacity, joules
    """

    distance_m: float
    h0: float = 1.25e-3
    g0: float = 1.25e-3
    gamma: float = 2.0
    delta: float = 2.0
    p_min_w: float = 1e-3
    p_max_w: float = 10e-3
    battery_j: float = 1e-4

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("distance_m must be positive")
        if not 0 < self.p_min_w <= self.p_max_w:
            raise ValueError("need 0 < p_min_w <= p_max_w")
        if self.battery_j <= 0:
            raise ValueError("battery_j must be positive")
        if self.h0 < 0 or self.g0 < 0:
            raise ValueError("reference gains must be nonnegative")

    @property
    def uplink_gain(self) -> float:
        """Mean uplink power gain (path loss only, unit-mean fading excluded)."""
        return self.h0 * self.distance_m ** (-self.gamma)

    @property
    def downlink_gain(self) -> float:
        """Mean downlink power gain (path loss only)."""
        return self.g0 * self.distance_m ** (-self.delta)


@dataclass(frozen=True)
class SystemParams:
    """Full physical description of the access point and the two devices.

    t_slot       : slot duration, seconds
    q_max        : maximum energy-transfer power at the access point, watts
    eta          : energy-conversion efficiency, in (0, 1]
    noise_w      : noise power over the signal bandwidth, watts
    bandwidth_hz : signal bandwidth, used only to convert spectral
                   efficiency into bits/s
    devices      : the two devices, index 0 and 1
    """

    t_slot: float = 0.5
    q_max: float = 3.0
    eta: float = 0.8
    noise_w: float = noise_power_watts(-155.0, 1e6)
    bandwidth_hz: float = 1e6
    devices: tuple[DeviceParams, DeviceParams] = (
        DeviceParams(distance_m=1.0),
        DeviceParams(distance_m=3.0),
    )

    def __post_init__(self):
        if self.t_slot <= 0:
            raise ValueError("t_slot must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")
        if self.q_max <= 0:
            raise ValueError("q_max must be positive")
        if self.noise_w <= 0:
            raise ValueError("noise_w must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if len(self.devices) != 2:
            raise ValueError("exactly two devices are supported")

    def bits_per_second(self, reward_per_slot: float) -> float:
        """Convert a per-slot reward in bit·s/s/Hz into a rate in bits/s."""
        return reward_per_slot * self.bandwidth_hz / self.t_slot


@dataclass(frozen=True)
class GridSpec:
    """Discretization used by the solvers.

    b_max1, b_max2 : battery quanta counts; device i stores an integer
                     number of quanta in {0, ..., b_max_i}, one quantum
                     being battery_j / b_max_i joules
    n_fading_bins  : fading levels per link
    n_tauap_grid   : grid points for the energy-transfer duration on [0, T]
    n_q1_grid      : grid points for the device-1 transfer power on [0, q_max]
    """

    b_max1: int = 10
    b_max2: int = 10
    n_fading_bins: int = 4
    n_tauap_grid: int = 21
    n_q1_grid: int = 21

    def __post_init__(self):
        for name in ("b_max1", "b_max2", "n_fading_bins", "n_tauap_grid", "n_q1_grid"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")

    def quantum_j(self, params: SystemParams, device: int) -> float:
        """Energy quantum of one battery level, joules."""
        b_max = (self.b_max1, self.b_max2)[device]
        return params.devices[device].battery_j / b_max


GRID_PRESETS = {
    "coarse": GridSpec(b_max1=6, b_max2=6, n_fading_bins=3, n_tauap_grid=11, n_q1_grid=11),
    "default": GridSpec(),
    "fine": GridSpec(b_max1=16, b_max2=16, n_fading_bins=6, n_tauap_grid=31, n_q1_grid=31),
}

# Transmission power regimes used by the distance-sweep experiments.
POWER_PRESETS = {
    "high": (1e-3, 10e-3),
    "low": (0.01e-3, 0.5e-3),
}


def default_system(d1: float = 1.0, d2: float = 3.0, battery_j: float = 1e-4,
                   p_min_w: float = 1e-3, p_max_w: float = 10e-3,
                   **overrides) -> SystemParams:
    """Build a SystemParams with the standard experiment constants.

    Both devices share the reference gains, path-loss exponents, battery
    size and power bounds; only the distances differ by default.
    """
    dev1 = DeviceParams(distance_m=d1, battery_j=battery_j,
                        p_min_w=p_min_w, p_max_w=p_max_w)
    dev2 = DeviceParams(distance_m=d2, battery_j=battery_j,
                        p_min_w=p_min_w, p_max_w=p_max_w)
    return SystemParams(devices=(dev1, dev2), **overrides)


def with_battery(params: SystemParams, battery_j: float) -> SystemParams:
    """Copy of params with both batteries set to battery_j joules."""
    devs = tuple(replace(d, battery_j=battery_j) for d in params.devices)
    return replace(params, devices=devs)
