"""Experiment driver.

Usage:
    wpcn --experiment fair-point --out results/
    wpcn --config my.ini --experiment distance-sweep --out results/ --threads 4

Experiments and the CSVs they write (one file per curve, plus
manifest.json with every resolved parameter, seed and timing):

    fair-point        fair point solve; trace.csv (iteration, alpha1,
                      G1_bps, G2_bps), policy.csv (b1, b2, outcome, the
                      seven action entries, e1/e2 quanta) and
                      value_function.csv (b1, b2, value)
    slot-baseline     slot_baseline.csv (per-outcome slot schedules)
    throughput-region region.csv (alpha, G1_bps, G2_bps); alpha is the
                      device-1 weight
    battery-sweep     sweep.csv (x_value, G_mdp_bps, G_slot_bps,
                      G_approx_bps); x = battery size in mJ
    distance-sweep    sweep.csv; x = device-1 distance in meters
    approx-vs-exact   sweep.csv; x = device-1 distance in meters
    slot-division     slotdiv_alpha05.csv / slotdiv_fair.csv
                      (quantity, device, value): steady-state averages
    simulate          sim.csv plus occupancy.csv

Exit codes: 0 ok, 2 config error, 3 unknown experiment, 4 numerical
non-convergence, 5 unwritable output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .approx import SubsetSchedule, approx_value_iteration
from .channel import build_channel_pmf
from .config import ConfigError, RunConfig, load_config
from .fairness import MixedPolicy, fairness_trace_csv, find_fair_alpha
from .mdp import (evaluate_policy, steady_state_action_averages,
                  value_function_to_csv, value_iteration)
from .params import POWER_PRESETS, SystemParams, with_battery
from .sim import simulate
from .slot import SlotSolution, long_term_slot_reward, slot_solutions

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNKNOWN_EXPERIMENT = 3
EXIT_NO_CONVERGENCE = 4
EXIT_OUTPUT = 5


def _pmf(cfg: RunConfig, params: SystemParams | None = None):
    return build_channel_pmf(params or cfg.params, cfg.grid, cfg.fading,
                             reciprocity=cfg.reciprocity)


def _with_distance(params: SystemParams, d1: float) -> SystemParams:
    dev1 = dataclasses.replace(params.devices[0], distance_m=d1)
    return dataclasses.replace(params, devices=(dev1, params.devices[1]))


def _with_powers(params: SystemParams, preset: str) -> SystemParams:
    p_min, p_max = POWER_PRESETS[preset]
    devs = tuple(dataclasses.replace(d, p_min_w=p_min, p_max_w=p_max)
                 for d in params.devices)
    return dataclasses.replace(params, devices=devs)


def _fair(cfg: RunConfig, params: SystemParams):
    pmf = _pmf(cfg, params)
    return find_fair_alpha(pmf, params, cfg.grid,
                           epsilon_fair=cfg.epsilon_fair,
                           max_bisect=cfg.max_bisect, tol=cfg.tol,
                           max_iters=cfg.max_iter)


def _fair_approx(cfg: RunConfig, params: SystemParams):
    pmf = _pmf(cfg, params)
    schedule = SubsetSchedule(kind=cfg.schedule, stride=cfg.stride,
                              seed=cfg.seed)

    def solve(alpha, k_init):
        res = approx_value_iteration(alpha, pmf, params, cfg.grid,
                                     schedule=schedule, tol=cfg.tol,
                                     max_iters=cfg.max_iter, k_init=k_init)
        pair = evaluate_policy(res.policy, pmf, params, cfg.grid,
                               model=res.model)
        return res, pair

    return find_fair_alpha(pmf, params, cfg.grid,
                           epsilon_fair=cfg.epsilon_fair,
                           max_bisect=cfg.max_bisect, solve=solve)


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write(out_dir: str, name: str, text: str) -> None:
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write(text)


def _sweep_csv(rows) -> str:
    lines = ["x_value,G_mdp_bps,G_slot_bps,G_approx_bps"]
    for x, mdp_v, slot_v, approx_v in rows:
        lines.append(f"{x:.12g},{mdp_v:.12g},{slot_v:.12g},{approx_v:.12g}")
    return "\n".join(lines) + "\n"


def _slotdiv_csv(averages: dict) -> str:
    rows = ["quantity,device,value"]
    layout = [("tau_s", "1", averages["tau1"]), ("tau_s", "2", averages["tau2"]),
              ("tau_s", "ap", averages["tau_ap"]),
              ("rho_w", "1", averages["rho1"]), ("rho_w", "2", averages["rho2"]),
              ("q_frac", "1", averages["q1"]), ("q_frac", "2", averages["q2"]),
              ("throughput_bps", "1", averages["g1_bps"]),
              ("throughput_bps", "2", averages["g2_bps"])]
    for quantity, device, value in layout:
        rows.append(f"{quantity},{device},{value:.12g}")
    return "\n".join(rows) + "\n"


def run_experiment(cfg: RunConfig, experiment: str, out_dir: str,
                   threads: int = 1) -> dict:
    """Execute one named experiment; returns the manifest results block."""
    results: dict = {}
    warnings: list[str] = []
    qmax = cfg.params.q_max

    if experiment == "fair-point":
        fp = _fair(cfg, cfg.params)
        _write(out_dir, "trace.csv", fairness_trace_csv(fp.trace))
        pol = fp.policy.policy_a if isinstance(fp.policy, MixedPolicy) else fp.policy
        _write(out_dir, "policy.csv", pol.to_csv())
        _write(out_dir, "value_function.csv",
               value_function_to_csv(fp.value_function))
        results.update(alpha_bar=fp.alpha_bar, alpha1=fp.alpha1,
                       g1_bps=fp.throughput.g1_bps, g2_bps=fp.throughput.g2_bps,
                       fair_bps=fp.throughput.min_bps, mixed=fp.mixed)
        if not fp.converged and not fp.mixed:
            warnings.append("fair-point bisection did not converge")

    elif experiment == "slot-baseline":
        pmf = _pmf(cfg)
        sols = slot_solutions(pmf, cfg.params)
        lines = ["outcome,prob," + SlotSolution.csv_header()]
        for o, s in enumerate(sols):
            lines.append(f"{o},{pmf.prob[o]:.12g},{s.csv_row()}")
        _write(out_dir, "slot_baseline.csv", "\n".join(lines) + "\n")
        results["g_slot_bps"] = long_term_slot_reward(pmf, cfg.params)

    elif experiment == "throughput-region":
        if not cfg.alphas:
            raise ConfigError("throughput-region needs a nonempty alphas list")
        from .fairness import throughput_region
        points = throughput_region(_pmf(cfg), cfg.params, cfg.grid,
                                   sorted(cfg.alphas), tol=cfg.tol,
                                   max_iters=cfg.max_iter)
        lines = ["alpha,G1_bps,G2_bps"]
        for p in points:
            lines.append(f"{p['alpha']:.12g},{p['g1_bps']:.12g},{p['g2_bps']:.12g}")
        _write(out_dir, "region.csv", "\n".join(lines) + "\n")
        results["n_points"] = len(points)

    elif experiment in ("battery-sweep", "distance-sweep", "approx-vs-exact"):
        def solve_point(params):
            pmf = _pmf(cfg, params)
            fp = _fair(cfg, params)
            g_slot = long_term_slot_reward(pmf, params)
            g_approx = _fair_approx(cfg, params).throughput.min_bps
            return (fp.throughput.min_bps, g_slot, g_approx,
                    fp.converged or fp.mixed)

        if experiment == "battery-sweep":
            xs = sorted(cfg.battery_mj)
            variants = [with_battery(cfg.params, x * 1e-3) for x in xs]
            curves = [("sweep.csv", xs, variants)]
        elif experiment == "distance-sweep":
            xs = sorted(cfg.d1_m)
            base = _with_powers(cfg.params, cfg.power_preset)
            curves = [("sweep.csv", xs, [_with_distance(base, x) for x in xs])]
        else:
            # one distance curve per battery size
            xs = sorted(cfg.d1_m)
            curves = []
            for b_mj in sorted(cfg.battery_mj):
                base = with_battery(cfg.params, b_mj * 1e-3)
                curves.append((f"sweep_b{b_mj:g}mJ.csv", xs,
                               [_with_distance(base, x) for x in xs]))
        if not xs or not curves:
            raise ConfigError(f"{experiment} needs a nonempty x list")

        n_points = 0
        for name, xvals, variants in curves:
            rows = _pool_map(solve_point, variants, threads)
            _write(out_dir, name,
                   _sweep_csv([(x,) + r[:3] for x, r in zip(xvals, rows)]))
            n_points += len(rows)
            if not all(r[3] for r in rows):
                warnings.append(f"a sweep point in {name} did not converge")
        results["n_points"] = n_points

    elif experiment == "slot-division":
        pmf = _pmf(cfg)
        res = value_iteration(0.5, pmf, cfg.params, cfg.grid, tol=cfg.tol,
                              max_iters=cfg.max_iter)
        avg_half = steady_state_action_averages(res.policy, pmf, cfg.params,
                                                cfg.grid, model=res.model)
        fp = _fair(cfg, cfg.params)
        policy = fp.policy.policy_a if fp.mixed else fp.policy
        avg_fair = steady_state_action_averages(policy, pmf, cfg.params, cfg.grid)
        for avg in (avg_half, avg_fair):
            avg["q1"] /= qmax
            avg["q2"] /= qmax
        _write(out_dir, "slotdiv_alpha05.csv", _slotdiv_csv(avg_half))
        _write(out_dir, "slotdiv_fair.csv", _slotdiv_csv(avg_fair))
        results.update(alpha_bar=fp.alpha_bar,
                       q1_frac_alpha05=avg_half["q1"],
                       q2_frac_alpha05=avg_half["q2"],
                       g1_bps_alpha05=avg_half["g1_bps"],
                       g2_bps_alpha05=avg_half["g2_bps"],
                       fair_bps=fp.throughput.min_bps)

    elif experiment == "simulate":
        pmf = _pmf(cfg)
        res = value_iteration(cfg.alpha, pmf, cfg.params, cfg.grid,
                              tol=cfg.tol, max_iters=cfg.max_iter)
        pair = evaluate_policy(res.policy, pmf, cfg.params, cfg.grid,
                               model=res.model)
        sim = simulate(res.policy, pmf, cfg.params, cfg.grid,
                       n_slots=cfg.n_slots, seed=cfg.seed, model=res.model)
        lines = ["quantity,device,value",
                 f"throughput_sim_bps,1,{sim.g1_bps:.12g}",
                 f"throughput_sim_bps,2,{sim.g2_bps:.12g}",
                 f"stderr_bps,1,{sim.se1_bps:.12g}",
                 f"stderr_bps,2,{sim.se2_bps:.12g}",
                 f"throughput_exact_bps,1,{pair.g1_bps:.12g}",
                 f"throughput_exact_bps,2,{pair.g2_bps:.12g}"]
        _write(out_dir, "sim.csv", "\n".join(lines) + "\n")
        occ = ["b1,b2,frequency"]
        for b1 in range(sim.occupancy.shape[0]):
            for b2 in range(sim.occupancy.shape[1]):
                occ.append(f"{b1},{b2},{sim.occupancy[b1, b2]:.12g}")
        _write(out_dir, "occupancy.csv", "\n".join(occ) + "\n")
        results.update(g1_sim_bps=sim.g1_bps, g2_sim_bps=sim.g2_bps,
                       g1_exact_bps=pair.g1_bps, g2_exact_bps=pair.g2_bps)

    else:
        raise KeyError(experiment)

    results["warnings"] = warnings
    return results


KNOWN_EXPERIMENTS = ("fair-point", "slot-baseline", "throughput-region",
                     "battery-sweep", "distance-sweep", "approx-vs-exact",
                     "slot-division", "simulate")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wpcn", description="wireless-powered network scheduling experiments")
    parser.add_argument("--config", default=None, help="INI config path")
    parser.add_argument("--experiment", required=True,
                        help=f"one of {', '.join(KNOWN_EXPERIMENTS)}")
    parser.add_argument("--out", default="wpcn-results", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=None,
                        help="sweep worker threads (env WPCN_THREADS)")
    parser.add_argument("--grid-preset", choices=("coarse", "default", "fine"),
                        default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.grid_preset)
        if args.seed is not None:
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.experiment not in KNOWN_EXPERIMENTS:
        print(f"unknown experiment {args.experiment!r}; choose from "
              f"{', '.join(KNOWN_EXPERIMENTS)}", file=sys.stderr)
        return EXIT_UNKNOWN_EXPERIMENT

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("WPCN_THREADS", "1"))

    try:
        os.makedirs(args.out, exist_ok=True)
        probe = os.path.join(args.out, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        print(f"cannot write to output directory {args.out}: {exc}",
              file=sys.stderr)
        return EXIT_OUTPUT

    started = time.time()
    try:
        results = run_experiment(cfg, args.experiment, args.out, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError:
        print(f"unknown experiment {args.experiment!r}", file=sys.stderr)
        return EXIT_UNKNOWN_EXPERIMENT

    manifest = dict(
        experiment=args.experiment,
        version=__version__,
        wall_time_s=time.time() - started,
        seed=cfg.seed,
        threads=threads,
        params=dataclasses.asdict(cfg.params),
        grid=dataclasses.asdict(cfg.grid),
        fading=dataclasses.asdict(cfg.fading),
        reciprocity=cfg.reciprocity,
        solve=dict(alpha=cfg.alpha, tol=cfg.tol, max_iter=cfg.max_iter,
                   epsilon_fair=cfg.epsilon_fair, max_bisect=cfg.max_bisect,
                   n_slots=cfg.n_slots),
        results=results,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    with open(os.path.join(args.out, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    print(json.dumps(results, indent=2, sort_keys=True))
    if results.get("warnings"):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
