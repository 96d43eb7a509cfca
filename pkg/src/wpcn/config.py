"""INI-style experiment configuration.

A config file mirrors the parameter dataclasses section by section; every
key is optional and falls back to the standard experiment constants
(1 MHz bandwidth, -155 dBm/Hz noise density, 500 ms slots, 3 W transfer
budget, 1..10 mW uplink powers, 0.1 mJ batteries, devices at 1 m and 3 m,
unit-mean Rayleigh fading with uplink/downlink reciprocity).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .channel import FadingModel
from .params import (GRID_PRESETS, DeviceParams, GridSpec, SystemParams,
                     noise_power_watts)

DEFAULT_CONFIG = """\
[system]
t_slot_s = 0.5
q_max_w = 3.0
eta = 0.8
noise_dbm_per_hz = -155
bandwidth_hz = 1e6

[device1]
distance_m = 1.0
h0 = 1.25e-3
g0 = 1.25e-3
gamma = 2.0
delta = 2.0
p_min_w = 1e-3
p_max_w = 10e-3
battery_j = 1e-4

[device2]
distance_m = 3.0
h0 = 1.25e-3
g0 = 1.25e-3
gamma = 2.0
delta = 2.0
p_min_w = 1e-3
p_max_w = 10e-3
battery_j = 1e-4

[fading]
kind = rayleigh
nakagami_m = 5.0
reciprocity = true

[grid]
preset = default

[solve]
alpha = 0.5
tol = 1e-6
max_iter = 300
epsilon_fair = 1e-3
max_bisect = 30
n_slots = 1000000
seed = 0

[experiment]
alphas = 0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0
battery_mj = 0.1, 0.2, 0.4, 0.7, 1.0
d1_m = 0.5, 1.0, 2.0, 3.0, 4.0, 5.0
power_preset = high
schedule = lattice
stride = 2
"""


class ConfigError(ValueError):
    """Malformed or unreadable configuration."""


@dataclass
class RunConfig:
    params: SystemParams
    grid: GridSpec
    fading: FadingModel
    reciprocity: bool = True
    alpha: float = 0.5
    tol: float = 1e-6
    max_iter: int = 300
    epsilon_fair: float = 1e-3
    max_bisect: int = 30
    n_slots: int = 1_000_000
    seed: int = 0
    alphas: list = field(default_factory=list)
    battery_mj: list = field(default_factory=list)
    d1_m: list = field(default_factory=list)
    power_preset: str = "high"
    schedule: str = "lattice"
    stride: int = 2


def _floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.replace(",", " ").split()]


def parse_config(text: str, grid_preset: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    defaults = configparser.ConfigParser()
    defaults.read_string(DEFAULT_CONFIG)
    for section in defaults.sections():
        if not cp.has_section(section):
            cp.add_section(section)
        for key, value in defaults.items(section):
            if not cp.has_option(section, key):
                cp.set(section, key, value)

    try:
        sys_sec = cp["system"]
        devices = []
        for name in ("device1", "device2"):
            d = cp[name]
            devices.append(DeviceParams(
                distance_m=d.getfloat("distance_m"),
                h0=d.getfloat("h0"), g0=d.getfloat("g0"),
                gamma=d.getfloat("gamma"), delta=d.getfloat("delta"),
                p_min_w=d.getfloat("p_min_w"), p_max_w=d.getfloat("p_max_w"),
                battery_j=d.getfloat("battery_j")))
        bandwidth = sys_sec.getfloat("bandwidth_hz")
        params = SystemParams(
            t_slot=sys_sec.getfloat("t_slot_s"),
            q_max=sys_sec.getfloat("q_max_w"),
            eta=sys_sec.getfloat("eta"),
            noise_w=noise_power_watts(sys_sec.getfloat("noise_dbm_per_hz"),
                                      bandwidth),
            bandwidth_hz=bandwidth,
            devices=tuple(devices))

        g = cp["grid"]
        preset = grid_preset or g.get("preset", "default")
        if preset not in GRID_PRESETS:
            raise ConfigError(f"unknown grid preset {preset!r}")
        base = GRID_PRESETS[preset]
        grid = GridSpec(
            b_max1=g.getint("b_max1", base.b_max1),
            b_max2=g.getint("b_max2", base.b_max2),
            n_fading_bins=g.getint("n_fading_bins", base.n_fading_bins),
            n_tauap_grid=g.getint("n_tauap_grid", base.n_tauap_grid),
            n_q1_grid=g.getint("n_q1_grid", base.n_q1_grid))

        f = cp["fading"]
        fading = FadingModel(kind=f.get("kind"), m=f.getfloat("nakagami_m"))

        s = cp["solve"]
        e = cp["experiment"]
        return RunConfig(
            params=params, grid=grid, fading=fading,
            reciprocity=f.getboolean("reciprocity"),
            alpha=s.getfloat("alpha"), tol=s.getfloat("tol"),
            max_iter=s.getint("max_iter"),
            epsilon_fair=s.getfloat("epsilon_fair"),
            max_bisect=s.getint("max_bisect"),
            n_slots=s.getint("n_slots"), seed=s.getint("seed"),
            alphas=_floats(e.get("alphas")),
            battery_mj=_floats(e.get("battery_mj")),
            d1_m=_floats(e.get("d1_m")),
            power_preset=e.get("power_preset"),
            schedule=e.get("schedule"), stride=e.getint("stride"))
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad configuration value: {exc}") from exc


def load_config(path: str | None, grid_preset: str | None = None) -> RunConfig:
    if path is None:
        return parse_config(DEFAULT_CONFIG, grid_preset)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, grid_preset)
