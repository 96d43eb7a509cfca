"""Long-term max-min throughput scheduling for a two-device
wireless-powered network with finite batteries.

An access point beams energy downlink; two devices spend stored energy on
TDMA uplink transmissions.  This package computes the optimal long-term
policy (average-reward value iteration on the battery lattice), a cheaper
approximate policy (subset improvement plus interpolation), the classical
per-slot baseline, and the fairness weight that equalizes the two
devices' throughputs.
"""

from .actions import (Action, InfeasibleSplitError, ReducedAction,
                      low_snr_fast_path, optimize_state, prune_bounds,
                      solve_tau1)
from .approx import (ApproxViaResult, SubsetSchedule, approx_trace_csv,
                     approx_value_iteration, verify_bound)
from .channel import ChannelPmf, FadingModel, build_channel_pmf, discretize_fading
from .estimators import (ApproxValueIterationSolver, FairThroughputSolver,
                         SlotOrientedBaseline, ValueIterationSolver)
from .fairness import FairPoint, MixedPolicy, find_fair_alpha, throughput_region
from .mdp import (Policy, ThroughputPair, ViaResult, evaluate_policy,
                  value_iteration)
from .params import (DeviceParams, GridSpec, SystemParams, default_system,
                     noise_power_watts, with_battery)
from .physics import battery_step, harvested_energy, rate
from .sim import SimulationResult, simulate
from .slot import (SlotSolution, long_term_slot_reward, slot_solutions,
                   solve_slot, solve_slot_low_snr)

__version__ = "0.1.0"

__all__ = [
    "Action", "ApproxValueIterationSolver", "ApproxViaResult", "ChannelPmf",
    "DeviceParams", "FadingModel", "FairPoint", "FairThroughputSolver",
    "GridSpec", "InfeasibleSplitError", "MixedPolicy", "Policy",
    "ReducedAction", "SimulationResult", "SlotOrientedBaseline",
    "SlotSolution", "SubsetSchedule", "SystemParams", "ThroughputPair",
    "approx_trace_csv",
    "ValueIterationSolver", "ViaResult", "approx_value_iteration",
    "battery_step", "build_channel_pmf", "default_system",
    "discretize_fading", "evaluate_policy", "find_fair_alpha",
    "harvested_energy", "long_term_slot_reward", "low_snr_fast_path",
    "noise_power_watts", "optimize_state", "prune_bounds", "rate",
    "simulate", "slot_solutions", "solve_slot", "solve_slot_low_snr",
    "solve_tau1", "throughput_region", "value_iteration", "verify_bound",
    "with_battery",
]
