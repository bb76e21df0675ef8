"""Command-line entry point.

Subcommands: synthesize, simulate, compare, equilibrium, linearize, del.
Every run is driven by a scenario JSON (see `scenario`); outputs land in
the scenario's output directory unless --out overrides it.  Exit codes:
0 success, 2 validation error, 3 infeasible synthesis or failed
certificate, 4 simulation abort.  Set WINDLQ_LOG=DEBUG|INFO|WARNING for
log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .coefficients import SurfaceError
from .control import (
    BaselineController,
    GainSchedule,
    build_power_speed_table,
    region_external_inputs,
)
from .equilibrium import NoEquilibrium, compute_equilibrium, scaled_residual_norm
from .linearize import linearize
from .metrics import (
    DelSpec,
    damage_equivalent_load,
    load_proxies,
    rainflow,
    rate_statistics,
    rms_tracking_error,
)
from .scenario import ScenarioError, load_scenario
from .sim import SimulationAbort, Trajectory, simulate
from .synthesis import (
    CertificationFailure,
    SdpInfeasibleError,
    SdpNumericalError,
    SynthesisWeights,
    synthesize_vertex_set,
)
from .turbine import ExternalInput

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_SIM_ABORT = 4

GAINS_SCHEMA_VERSION = 1


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_out(scn, override):
    out = override or scn.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _synthesize_gains(scn):
    """Run both region syntheses for a scenario; returns (gains dict, reports)."""
    table = build_power_speed_table(scn.params, scn.surface)
    p_ref = scn.sim.p_ref if scn.sim.p_ref > 0.0 else scn.params.p_rated
    gains = {
        "schema_version": GAINS_SCHEMA_VERSION,
        "delta_v": scn.delta_v,
        "epsilon": scn.epsilon,
        "p_ref": p_ref,
        "regions": {},
    }
    reports = {}
    for region in (2, 3):
        spec = scn.regions[region]
        w_list = region_external_inputs(
            scn.params, scn.surface, table, region, p_ref,
            v_cutin=scn.v_cutin, v_cutout=scn.v_cutout,
            winds=spec.wind_speeds or None,
        )
        weights = SynthesisWeights.from_diagonals(
            spec.q_diag_scaled, spec.r_diag_scaled
        )
        vs = synthesize_vertex_set(
            scn.params, scn.surface, w_list, weights, epsilon=scn.epsilon
        )
        gains["regions"][str(region)] = {
            "wind_speeds": [w.v for w in w_list],
            "cost_j": vs.result.cost_j,
            "per_vertex_cost": list(vs.result.per_vertex_cost),
            "k": vs.k_physical.tolist(),
        }
        gains[f"k{region}"] = vs.k_physical.tolist()
        reports[region] = vs.report
    return gains, reports, table


def _validate_gains_dict(data):
    if not isinstance(data, dict):
        raise ValueError("gains file must be a JSON object")
    if data.get("schema_version") != GAINS_SCHEMA_VERSION:
        raise ValueError("gains file has wrong schema_version")
    for key in ("k2", "k3"):
        k = np.asarray(data.get(key, None), dtype=float)
        if k.shape != (2, 7):
            raise ValueError(f"{key} must be a 2x7 matrix")
    if not float(data.get("delta_v", 0.0)) > 0.0:
        raise ValueError("delta_v must be > 0")
    return data


def _load_schedule(scn):
    """Gain schedule from the scenario's gains file, or a fresh synthesis."""
    if scn.gains_path:
        with open(scn.gains_path) as fh:
            data = _validate_gains_dict(json.load(fh))
        return GainSchedule(
            k2=np.array(data["k2"]), k3=np.array(data["k3"]),
            delta_v=float(data["delta_v"]),
        ), build_power_speed_table(scn.params, scn.surface)
    gains, _, table = _synthesize_gains(scn)
    return GainSchedule(
        k2=np.array(gains["k2"]), k3=np.array(gains["k3"]), delta_v=scn.delta_v
    ), table


def _metrics_dict(scn, traj):
    duration = traj["time_s"][-1] + traj.ts if len(traj) else 0.0
    rms = rms_tracking_error(traj)
    max_pitch_rate, max_torque_rate = rate_statistics(traj)
    proxies = load_proxies(traj, scn.params, scn.surface,
                           tower_lever=scn.metrics.tower_lever)
    dels = {}
    cycles = {}
    for channel, series in proxies.items():
        spec = DelSpec(
            m=scn.metrics.woehler[channel],
            n_ref=scn.metrics.n_ref,
            t_life=scn.metrics.t_life_years * 365.25 * 86400.0,
            t_sim=duration,
        )
        cset = rainflow(series)
        cycles[channel] = cset
        dels[channel] = {
            "m": spec.m,
            "value": damage_equivalent_load(cset, spec),
            "n_half_cycles": cset.total_half_cycles,
        }
    return {
        "duration_s": duration,
        "rms_tracking_error_w": rms,
        "max_pitch_rate_radps": max_pitch_rate,
        "max_torque_rate_nmps": max_torque_rate,
        "mean_power_w": float(np.mean(traj["p_w"])),
        "saturation_fractions": {
            name: float(np.mean(traj[col]))
            for name, col in (
                ("theta_rate", "sat_theta_rate"),
                ("theta_level", "sat_theta_level"),
                ("mg_rate", "sat_mg_rate"),
                ("mg_level", "sat_mg_level"),
            )
        },
        "del": dels,
    }, cycles


def cmd_synthesize(scn, out_dir, validate):
    gains, reports, _ = _synthesize_gains(scn)
    gains_path = os.path.join(out_dir, "gains.json")
    _json_dump(gains, gains_path)
    cert_path = os.path.join(out_dir, "certificates.txt")
    with open(cert_path, "w") as fh:
        for region in (2, 3):
            fh.write(f"=== region {region} certificate ===\n")
            fh.write(reports[region].summary())
            fh.write("\n\n")
    if validate:
        with open(gains_path) as fh:
            _validate_gains_dict(json.load(fh))
    print(f"wrote {gains_path} and {cert_path}")
    return EXIT_OK


def cmd_simulate(scn, out_dir, validate):
    if scn.sim.controller == "baseline":
        table = build_power_speed_table(scn.params, scn.surface)
        controller = BaselineController(scn.params, scn.surface, table)
    else:
        controller, table = _load_schedule(scn)
    traj = simulate(scn.sim, scn.params, scn.surface, table, controller,
                    estimator_config=scn.estimator)
    traj_path = os.path.join(out_dir, "trajectory.csv")
    traj.save_csv(traj_path)
    metrics, _ = _metrics_dict(scn, traj)
    metrics_path = os.path.join(out_dir, "metrics.json")
    _json_dump(metrics, metrics_path)
    from . import plots

    plots.plot_power_tracking(traj, os.path.join(out_dir, "power.svg"))
    plots.plot_actuators(traj, os.path.join(out_dir, "actuators.svg"))
    if validate:
        Trajectory.load_csv(traj_path)
        with open(metrics_path) as fh:
            json.load(fh)
    print(f"wrote {traj_path}, {metrics_path}, power.svg, actuators.svg")
    return EXIT_OK


def cmd_compare(scn_a, scn_b, out_dir, validate):
    results = []
    for scn in (scn_a, scn_b):
        if scn.sim.controller == "baseline":
            table = build_power_speed_table(scn.params, scn.surface)
            controller = BaselineController(scn.params, scn.surface, table)
        else:
            controller, table = _load_schedule(scn)
        traj = simulate(scn.sim, scn.params, scn.surface, table, controller,
                        estimator_config=scn.estimator)
        metrics, _ = _metrics_dict(scn, traj)
        results.append(metrics)
    ma, mb = results
    channels = sorted(ma["del"])
    report = {
        "scenario_a": scn_a.source_path,
        "scenario_b": scn_b.source_path,
        "rms_tracking_error_w": {"a": ma["rms_tracking_error_w"],
                                 "b": mb["rms_tracking_error_w"]},
        "max_pitch_rate_radps": {"a": ma["max_pitch_rate_radps"],
                                 "b": mb["max_pitch_rate_radps"]},
        "max_torque_rate_nmps": {"a": ma["max_torque_rate_nmps"],
                                 "b": mb["max_torque_rate_nmps"]},
        "del": {
            ch: {
                "a": ma["del"][ch]["value"],
                "b": mb["del"][ch]["value"],
                "ratio_a_over_b": (
                    ma["del"][ch]["value"] / mb["del"][ch]["value"]
                    if mb["del"][ch]["value"] > 0.0 else float("nan")
                ),
            }
            for ch in channels
        },
        "rms_ratio_a_over_b": (
            ma["rms_tracking_error_w"] / mb["rms_tracking_error_w"]
            if mb["rms_tracking_error_w"] > 0.0 else float("nan")
        ),
    }
    report_path = os.path.join(out_dir, "comparison.json")
    _json_dump(report, report_path)
    from . import plots

    plots.plot_del_comparison(
        channels,
        [ma["del"][ch]["value"] for ch in channels],
        [mb["del"][ch]["value"] for ch in channels],
        ["A: " + scn_a.sim.controller, "B: " + scn_b.sim.controller],
        os.path.join(out_dir, "del_comparison.svg"),
    )
    if validate:
        with open(report_path) as fh:
            json.load(fh)
    print(f"wrote {report_path} and del_comparison.svg")
    return EXIT_OK


def cmd_equilibrium(scn, v, omega_d, p_d):
    eq = compute_equilibrium(
        scn.params, scn.surface, ExternalInput(v=v, omega_d=omega_d, p_d=p_d)
    )
    out = {
        "x_s": {
            "omega": eq.x_s.omega, "x_t": eq.x_s.x_t, "v_t": eq.x_s.v_t,
            "z_omega": eq.x_s.z_omega, "z_p": eq.x_s.z_p,
            "theta": eq.x_s.theta, "m_g": eq.x_s.m_g,
        },
        "u_s": [eq.u_s.u1, eq.u_s.u2],
        "w_s": {"v": eq.w_s.v, "omega_d": eq.w_s.omega_d, "p_d": eq.w_s.p_d},
        "lambda_s": eq.lambda_s,
        "theta_s": eq.theta_s,
        "scaled_residual": scaled_residual_norm(scn.params, scn.surface, eq),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_linearize(scn, v, omega_d, p_d, out_dir):
    eq = compute_equilibrium(
        scn.params, scn.surface, ExternalInput(v=v, omega_d=omega_d, p_d=p_d)
    )
    model = linearize(scn.params, scn.surface, eq)
    a_path = os.path.join(out_dir, "a_matrix.csv")
    b_path = os.path.join(out_dir, "b_matrix.csv")
    np.savetxt(a_path, model.a, delimiter=",", fmt="%.17g")
    np.savetxt(b_path, model.b, delimiter=",", fmt="%.17g")
    print(f"wrote {a_path} and {b_path}")
    return EXIT_OK


def cmd_del(scn, traj_path, out_dir, cycles_csv, validate):
    traj = Trajectory.load_csv(traj_path)
    metrics, cycles = _metrics_dict(scn, traj)
    metrics_path = os.path.join(out_dir, "metrics.json")
    _json_dump(metrics, metrics_path)
    if cycles_csv:
        import csv as _csv

        for channel, cset in cycles.items():
            path = os.path.join(out_dir, f"cycles_{channel}.csv")
            with open(path, "w", newline="") as fh:
                w = _csv.writer(fh)
                w.writerow(["range", "mean", "count"])
                for r, m, c in zip(cset.ranges, cset.means, cset.counts):
                    w.writerow([f"{r:.12g}", f"{m:.12g}", f"{c:g}"])
    if validate:
        with open(metrics_path) as fh:
            json.load(fh)
    print(f"wrote {metrics_path}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON path")
    common.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument("--validate", action="store_true",
                        help="re-check emitted files after writing")

    parser = argparse.ArgumentParser(
        prog="windlq",
        description="Robust LQ wind-turbine power-tracking control toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    subs.add_parser("synthesize", parents=[common],
                    help="synthesize and certify the region gains")
    subs.add_parser("simulate", parents=[common],
                    help="run the closed-loop simulation")

    p_cmp = subs.add_parser("compare", parents=[common],
                            help="run two scenarios and compare metrics")
    p_cmp.add_argument("scenario_b", help="second scenario JSON path")

    for name in ("equilibrium", "linearize"):
        p = subs.add_parser(name, parents=[common],
                            help=f"dump the {name} at one external input")
        p.add_argument("--v", type=float, required=True, help="wind speed, m/s")
        p.add_argument("--omega-d", type=float, required=True,
                       help="desired generator speed, rad/s")
        p.add_argument("--p-d", type=float, required=True,
                       help="desired electrical power, W")

    p_del = subs.add_parser("del", parents=[common],
                            help="fatigue and tracking metrics from a trajectory CSV")
    p_del.add_argument("--trajectory", required=True, help="trajectory CSV path")
    p_del.add_argument("--cycles", action="store_true",
                       help="also write per-channel rainflow cycle tables")
    return parser


def main(argv=None):
    level = os.environ.get("WINDLQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        if args.seed is not None:
            scn.sim = replace(scn.sim, seed=args.seed)
        if args.command == "compare":
            scn_b = load_scenario(args.scenario_b)
            if args.seed is not None:
                scn_b.sim = replace(scn_b.sim, seed=args.seed)
        out_dir = _ensure_out(scn, args.out)

        if args.command == "synthesize":
            return cmd_synthesize(scn, out_dir, args.validate)
        if args.command == "simulate":
            return cmd_simulate(scn, out_dir, args.validate)
        if args.command == "compare":
            return cmd_compare(scn, scn_b, out_dir, args.validate)
        if args.command == "equilibrium":
            return cmd_equilibrium(scn, args.v, args.omega_d, args.p_d)
        if args.command == "linearize":
            return cmd_linearize(scn, args.v, args.omega_d, args.p_d, out_dir)
        if args.command == "del":
            return cmd_del(scn, args.trajectory, out_dir, args.cycles,
                           args.validate)
        parser.error(f"unknown command {args.command}")
    except (ScenarioError, SurfaceError, NoEquilibrium, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SdpInfeasibleError, SdpNumericalError, CertificationFailure) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_SIM_ABORT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
