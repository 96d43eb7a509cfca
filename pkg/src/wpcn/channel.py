"""Fading models and the discrete joint channel distribution.

The solvers work with a finite pmf over joint channel outcomes
(g1, g2, h1, h2).  Continuous fading is discretized into equal-probability
bins, each represented by its conditional mean, so the discrete gains keep
the exact unit mean of the underlying fading law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .params import GridSpec, SystemParams

FADING_KINDS = ("deterministic", "rayleigh", "nakagami")


@dataclass(frozen=True)
class FadingModel:
    """Unit-mean fading law for the power gain.

    kind : 'deterministic', 'rayleigh' (exponential power gain) or
           'nakagami' (gamma power gain with shape m)
    m    : Nakagami shape parameter, only used for kind='nakagami'
    """

    kind: str = "rayleigh"
    m: float = 5.0

    def __post_init__(self):
        if self.kind not in FADING_KINDS:
            raise ValueError(f"unsupported fading kind {self.kind!r}")
        if self.kind == "nakagami" and self.m < 0.5:
            raise ValueError("nakagami shape m must be >= 0.5")

    def power_gain_distribution(self):
        """scipy frozen distribution of the (unit-mean) power gain."""
        if self.kind == "rayleigh":
            return stats.expon()
        if self.kind == "nakagami":
            return stats.gamma(self.m, scale=1.0 / self.m)
        return None

    def sample(self, rng: np.random.Generator, size):
        if self.kind == "deterministic":
            return np.ones(size)
        return self.power_gain_distribution().rvs(size=size, random_state=rng)


def discretize_fading(model: FadingModel, n_bins: int) -> list[tuple[float, float]]:
    """Equal-probability bins with conditional-mean representatives.

    Returns [(value, prob), ...] with sum(prob) == 1 and unit first moment
    (up to quadrature accuracy), so linear functionals of the gain are
    unbiased under the discretization.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if model.kind == "deterministic" or n_bins == 1:
        return [(1.0, 1.0)]

    q = np.linspace(0.0, 1.0, n_bins + 1)
    if model.kind == "rayleigh":
        # Exp(1): E[X; X <= x] = 1 - (1 + x) e^{-x}
        edges = -np.log1p(-q[:-1])  # lower edges; upper edge of last bin is inf
        partial = np.empty(n_bins + 1)
        partial[:-1] = 1.0 - (1.0 + edges) * np.exp(-edges)
        partial[-1] = 1.0
        masses = np.diff(partial)
    elif model.kind == "nakagami":
        # Gamma(m, 1/m): E[X; X <= x] = P(m + 1, m x) with unit mean
        dist = model.power_gain_distribution()
        edges = np.concatenate([[0.0], dist.ppf(q[1:-1]), [np.inf]])
        scaled = np.where(np.isinf(edges), np.inf, edges * model.m)
        upper = np.where(np.isinf(scaled), 1.0, special.gammainc(model.m + 1.0, scaled))
        masses = np.diff(upper)
    else:  # pragma: no cover - guarded by FadingModel
        raise ValueError(f"unsupported fading kind {model.kind!r}")

    probs = np.full(n_bins, 1.0 / n_bins)
    values = masses / probs
    return list(zip(values.tolist(), probs.tolist()))


@dataclass(frozen=True)
class ChannelPmf:
    """Joint pmf of the downlink/uplink gain tuples (g1, g2, h1, h2)."""

    g1: np.ndarray
    g2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        n = len(self.prob)
        for name in ("g1", "g2", "h1", "h2"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError("all outcome arrays must share one length")
            if np.any(arr < 0):
                raise ValueError("gains must be nonnegative")
        if abs(float(np.sum(self.prob)) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        if np.any(self.prob < 0):
            raise ValueError("probabilities must be nonnegative")

    def __len__(self) -> int:
        return len(self.prob)


def build_channel_pmf(params: SystemParams, grid: GridSpec,
                      model: FadingModel = FadingModel(),
                      reciprocity: bool = True) -> ChannelPmf:
    """Discrete joint channel distribution for the two devices.

    With reciprocity each device's uplink and downlink share one fading
    draw (g_i = h_i up to the per-link path loss), giving n_bins outcomes
    per device; without it the two links fade independently (n_bins^2 per
    device).  Devices are always independent of each other.
    """
    bins = discretize_fading(model, grid.n_fading_bins)
    per_device = []
    for dev in params.devices:
        hbar, gbar = dev.uplink_gain, dev.downlink_gain
        if reciprocity:
            outcomes = [(gbar * v, hbar * v, p) for v, p in bins]
        else:
            outcomes = [(gbar * vg, hbar * vh, pg * ph)
                        for vg, pg in bins for vh, ph in bins]
        per_device.append(outcomes)

    g1, g2, h1, h2, prob = [], [], [], [], []
    for ga, ha, pa in per_device[0]:
        for gb, hb, pb in per_device[1]:
            g1.append(ga)
            g2.append(gb)
            h1.append(ha)
            h2.append(hb)
            prob.append(pa * pb)
    return ChannelPmf(g1=np.array(g1), g2=np.array(g2),
                      h1=np.array(h1), h2=np.array(h2),
                      prob=np.array(prob))
