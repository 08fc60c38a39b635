"""Command-line entry point.

Parameter precedence: built-in defaults < config file < ``--set key=value``
< dedicated flags. Frequencies given with an ``_hz`` suffix are ordinary
frequencies and are multiplied by 2 pi.
"""

from __future__ import annotations

import argparse
import json
import logging
import pathlib
import sys

import numpy as np

from . import cluster, gatesim, io, network, pipelines
from .crystal import IonCrystal, equilibrium
from .errors import ConfigError, CrystalGateError
from .phonons import modes_for, thermal_occupation

logger = logging.getLogger("crystalgate")

COMMANDS = ("crystal", "phonons", "gate", "sweep-temperature", "cluster", "network", "reproduce-figure2")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p):
    p.add_argument("--config", help="JSON or TOML parameter file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="parameter override")
    p.add_argument("-v", "--verbose", action="store_true")


def _trap_flags(p):
    p.add_argument("--n-ions", type=int)
    p.add_argument("--omega-xy-hz", type=float)
    p.add_argument("--omega-z-hz", type=float)


def _gate_flags(p):
    p.add_argument("--envelope", choices=gatesim.ENVELOPES)
    p.add_argument("--duration-s", type=float)
    p.add_argument("--carrier-nu-hz", type=float)
    p.add_argument("--steps-per-period", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crystalgate", description="Ion-crystal push gates, cluster sweeps and heralded links.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("crystal", help="equilibrium positions")
    _common(p)
    _trap_flags(p)

    p = sub.add_parser("phonons", help="normal-mode spectrum")
    _common(p)
    _trap_flags(p)
    p.add_argument("--crystal", help="crystal JSON written by the crystal command")

    p = sub.add_parser("gate", help="single push gate")
    _common(p)
    _trap_flags(p)
    _gate_flags(p)
    p.add_argument("--kind", choices=("carrier", "vertical"))
    p.add_argument("--temperature-k", type=float)
    p.add_argument("--force-n", type=float, help="force amplitude; calibrated to a pi phase if omitted")
    p.add_argument("--targets", type=int, nargs="+")
    p.add_argument("--rabi-hz", type=float)
    p.add_argument("--detuning-hz", type=float)
    p.add_argument("--linewidth-hz", type=float)

    p = sub.add_parser("sweep-temperature", help="fidelity versus temperature")
    _common(p)
    _trap_flags(p)
    _gate_flags(p)
    p.add_argument("--t-max-k", type=float)
    p.add_argument("--t-points", type=int)

    p = sub.add_parser("cluster", help="swept-beam graph phases")
    _common(p)
    p.add_argument("--waist-sigma", type=float)
    p.add_argument("--xi-m", type=float)
    p.add_argument("--r-m", type=float)
    p.add_argument("--omega-r-hz", type=float)
    p.add_argument("--omega-hz", type=float)
    p.add_argument("--carrier-nu-hz", type=float)
    p.add_argument("--d-m", type=float)
    p.add_argument("--n-ions", type=int, help="sweep a relaxed crystal of this size (0: single cell)")

    p = sub.add_parser("network", help="heralded entanglement statistics")
    _common(p)
    p.add_argument("--eta", type=float)
    p.add_argument("--eta-prime", type=float)
    p.add_argument("--gamma-hz", type=float)
    p.add_argument("--p-excite", type=float)
    p.add_argument("--target-infidelity", type=float)
    p.add_argument("--n-trials", type=int)

    p = sub.add_parser("reproduce-figure2", help="full N=147 comparison bundle")
    _common(p)
    _trap_flags(p)
    _gate_flags(p)
    p.add_argument("--t-points", type=int)
    return parser


_NON_PARAMS = {"command", "config", "out", "format", "set", "verbose", "crystal"}


def collect_params(args) -> dict:
    file_layer = io.load_config(args.config) if args.config else {}
    # sections named after the command are flattened on top of the root
    section = file_layer.pop(args.command, None)
    file_layer = {k: v for k, v in file_layer.items() if not isinstance(v, dict)}
    if isinstance(section, dict):
        file_layer.update(section)
    set_layer = dict(io.parse_override(s) for s in args.set)
    flag_layer = {k: v for k, v in vars(args).items() if k not in _NON_PARAMS}
    return io.merge(file_layer, set_layer, flag_layer)


# --------------------------------------------------------------------------
# commands


def cmd_crystal(params, out: pathlib.Path, fmt: str) -> dict:
    trap = pipelines.trap_from_params(params)
    crystal = equilibrium(trap)
    payload = {"trap": trap.to_dict(), "crystal": crystal.to_dict()}
    if fmt == "csv":
        io.write_csv(out / "crystal.csv", "positions", ["ion", "x_m", "y_m", "z_m"],
                     [(i, *p) for i, p in enumerate(crystal.positions)])
    io.write_json(out / "crystal.json", payload)
    return {"n_ions": trap.n_ions, "spacing_d_m": crystal.spacing_d, "gradient_norm_N": crystal.gradient_norm}


def cmd_phonons(params, out, fmt, crystal_path=None) -> dict:
    trap = pipelines.trap_from_params(params)
    if crystal_path:
        data = io.load_config(crystal_path)
        crystal = IonCrystal.from_dict(data.get("crystal", data))
        if "trap" in data:
            from .crystal import TrapConfig

            trap = TrapConfig.from_dict(data["trap"])
    else:
        crystal = equilibrium(trap)
    modes = modes_for(trap, crystal)
    io.write_csv(out / "spectrum.csv", "spectrum", ["index", "omega_over_omega_xy", "polarization"],
                 pipelines.spectrum_table(modes))
    if fmt == "json":
        io.write_json(out / "modes.json", modes.to_dict())
    return {"n_modes": modes.n_modes, "zero_modes": int(modes.zero_modes.sum())}


def cmd_gate(params, out, fmt) -> dict:
    p = io.merge(pipelines.OPERATING_POINT, {"n_ions": 2, "kind": "carrier", "temperature_k": 0.0}, params)
    trap = pipelines.trap_from_params(p)
    crystal = equilibrium(trap)
    modes = modes_for(trap, crystal)
    targets = pipelines.resolve_targets(crystal, p.get("targets"))
    spp = int(p["steps_per_period"])
    if p["kind"] == "vertical":
        direction, nu = (0.0, 0.0, 1.0), 0.0
    else:
        direction = pipelines.resolve_direction(crystal, targets, p.get("direction", "separation"))
        nu = io.angular(p, "carrier_nu")
    laser = None
    if "rabi_hz" in p and "detuning_hz" in p:
        laser = gatesim.LaserParams(io.angular(p, "rabi"), io.angular(p, "detuning"), io.angular(p, "linewidth", 0.0))
    pulse = gatesim.GatePulse(targets, float(p.get("force_n", 1e-21)), direction, p["envelope"],
                              float(p["duration_s"]), nu, laser=laser)
    if "force_n" not in p:
        pulse = gatesim.calibrate_to_pi(pulse, crystal, modes, spp)
    th = thermal_occupation(modes, float(p["temperature_k"]), trap.k_B)
    result = gatesim.gate_fidelity(pulse, crystal, modes, th, spp)
    summary = result.summary()
    summary["pulse"] = pulse.to_dict()
    if laser is not None:
        summary["spontaneous_error"] = gatesim.spontaneous_error(laser, pulse.duration, pulse.envelope)
    io.write_json(out / "gate.json", summary)
    return {"fidelity": result.fidelity, "conditional_phase": result.conditional_phase,
            "force_amplitude": result.force_amplitude}


def cmd_sweep_temperature(params, out, fmt) -> dict:
    setup = pipelines.build_setup(params)
    spp = int(io.merge(pipelines.OPERATING_POINT, params)["steps_per_period"])
    rows = gatesim.temperature_sweep(setup.carrier, setup.vertical, setup.crystal, setup.modes,
                                     pipelines.temperature_grid(params), setup.trap.k_B, spp)
    io.write_csv(out / "fidelity_vs_T.csv", "fidelity_vs_T", ["T_K", "F_carrier", "F_vertical"], rows)
    return {"rows": len(rows), "force_ratio": setup.force_ratio}


CLUSTER_DEFAULTS = {
    "waist_sigma": 0.2,
    "r_m": 100e-6,
    "xi_m": 100e-6 * float(np.cos(0.2)),
    "omega_r_hz": 50e3,
    "rabi_hz": 4e12,
    "detuning_hz": 200e12,
    "linewidth_hz": 20e6,
    "omega_hz": 10e6,
    "d_m": 10e-6,
    "n_ions": 0,
    "t_points": 201,
}


def cmd_cluster(params, out, fmt) -> dict:
    p = io.merge(CLUSTER_DEFAULTS, params)
    laser = gatesim.LaserParams(io.angular(p, "rabi"), io.angular(p, "detuning"), io.angular(p, "linewidth"))
    sweep = cluster.SweepConfig(
        float(p["waist_sigma"]), float(p["xi_m"]), float(p["r_m"]), io.angular(p, "omega_r"), laser,
        velocity_v=p.get("velocity_m_s"), carrier_nu=io.angular(p, "carrier_nu"),
    )
    omega = io.angular(p, "omega")
    n = int(p["n_ions"])
    trap = pipelines.trap_from_params({**p, "n_ions": max(n, 1)})
    if n > 0:
        graph = cluster.swept_graph(equilibrium(trap), sweep, trap, omega)
    else:
        graph = cluster.cell_weights(sweep, trap, float(p["d_m"]), omega)
    t = np.linspace(-sweep.chi, sweep.chi, int(p["t_points"])) / sweep.omega_r
    dx, dy = cluster.sweep_trajectory(sweep, t)
    io.write_csv(out / "trajectory.csv", "sweep_trajectory", ["t_s", "dx_m", "dy_m"], zip(t, dx, dy))
    payload = graph.to_dict()
    payload["epsilon"] = cluster.epsilon(sweep.waist_sigma)
    payload["sweep"] = sweep.to_dict()
    io.write_json(out / "graph.json", payload)
    return {"edges": len(graph), "epsilon": payload["epsilon"]}


NETWORK_DEFAULTS = {"eta": 1e-3, "eta_prime": 0.1, "gamma_hz": 10e6, "p_excite": 1e-4,
                    "target_infidelity": 1e-4, "n_trials": 10**6, "seed": 0}


def cmd_network(params, out, fmt) -> dict:
    p = io.merge(NETWORK_DEFAULTS, params)
    cfg = network.ProtocolConfig(float(p["eta"]), float(p["eta_prime"]), io.angular(p, "gamma"),
                                 float(p["p_excite"]), float(p["target_infidelity"]), int(p["seed"]))
    analytic = network.two_click_analytic(cfg)
    exact = network.two_click_exact(cfg)
    mc = network.two_click_monte_carlo(cfg, int(p["n_trials"]))
    one = network.one_click_comparison(cfg)
    scheme, t_best = network.time_to_target(cfg)
    payload = {"config": cfg.to_dict(), "two_click_analytic": analytic.to_dict(),
               "two_click_exact": exact.to_dict(), "two_click_monte_carlo": mc.to_dict(),
               "one_click": one.to_dict(), "best_scheme": scheme, "best_time_s": t_best}
    io.write_json(out / "network.json", payload)
    targets = np.logspace(-6, -1, 26)
    io.write_csv(out / "time_vs_target.csv", "time_vs_target",
                 ["target_infidelity", "t_two_click_s", "t_one_click_s"], network.time_vs_target(cfg, targets))
    return {"best_scheme": scheme, "best_time_s": t_best, "mc_success": mc.success_probability}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        params = collect_params(args)
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "crystal":
            res = cmd_crystal(params, out, args.format)
        elif args.command == "phonons":
            res = cmd_phonons(params, out, args.format, args.crystal)
        elif args.command == "gate":
            res = cmd_gate(params, out, args.format)
        elif args.command == "sweep-temperature":
            res = cmd_sweep_temperature(params, out, args.format)
        elif args.command == "cluster":
            res = cmd_cluster(params, out, args.format)
        elif args.command == "network":
            res = cmd_network(params, out, args.format)
        else:
            res = pipelines.reproduce_figure2(out, params)
    except CrystalGateError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError, KeyError) as exc:
        # malformed parameter values that slipped past validation
        err = {"error": "ConfigError", "message": f"{type(exc).__name__}: {exc}", "exit_code": 2}
        print(json.dumps(err), file=sys.stderr)
        return 2
    print(io.dumps(res))
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
