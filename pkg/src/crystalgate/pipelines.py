"""End-to-end runs shared by the CLI and the acceptance suite."""

from __future__ import annotations

import dataclasses
import math
import pathlib

import numpy as np

from . import gatesim, io
from .crystal import IonCrystal, TrapConfig, equilibrium
from .phonons import PhononModes, modes_for, spectral_bands, spectrum_rows, thermal_occupation

TWO_PI = 2.0 * math.pi

# operating point used for the carrier-versus-vertical comparison
OPERATING_POINT = {
    "n_ions": 147,
    "omega_xy_hz": 200e3,
    "omega_z_hz": 10e6,
    "carrier_nu_hz": 2.2e6,
    "duration_s": 5e-6,
    "envelope": "sin6",
    "t_min_k": 0.0,
    "t_max_k": 2e-3,
    "t_points": 21,
    "steps_per_period": 200,
}


@dataclasses.dataclass
class GateSetup:
    trap: TrapConfig
    crystal: IonCrystal
    modes: PhononModes
    carrier: gatesim.GatePulse
    vertical: gatesim.GatePulse

    @property
    def force_ratio(self) -> float:
        return self.vertical.force_amplitude / self.carrier.force_amplitude


def trap_from_params(params: dict) -> TrapConfig:
    kw = {"n_ions": int(params.get("n_ions", 2))}
    for key in ("omega_xy", "omega_z", "omega_r"):
        val = io.angular(params, key)
        if val is not None:
            kw[key] = val
    if "omega_xy" not in kw:
        kw["omega_xy"] = TWO_PI * 200e3
    if "omega_z" not in kw:
        kw["omega_z"] = kw["omega_xy"] * float(params.get("omega_z_ratio", 50.0))
    if "mass_kg" in params:
        kw["mass"] = float(params["mass_kg"])
    return TrapConfig(**kw)


def pair_direction(crystal: IonCrystal, i: int, j: int) -> np.ndarray:
    sep = crystal.positions[j] - crystal.positions[i]
    return sep / np.linalg.norm(sep)


def resolve_targets(crystal: IonCrystal, targets) -> tuple:
    if targets in (None, "center"):
        return crystal.center_pair()
    return tuple(int(t) for t in targets)


def resolve_direction(crystal: IonCrystal, targets, direction) -> tuple:
    if direction in (None, "separation"):
        return tuple(pair_direction(crystal, targets[0], targets[1]))
    if direction == "z":
        return (0.0, 0.0, 1.0)
    return tuple(float(x) for x in direction)


def build_setup(params: dict) -> GateSetup:
    """Crystal, modes and calibrated (pi-phase) carrier and vertical pulses."""
    p = io.merge(OPERATING_POINT, params)
    trap = trap_from_params(p)
    crystal = equilibrium(trap)
    modes = modes_for(trap, crystal)
    targets = resolve_targets(crystal, p.get("targets"))
    spp = int(p["steps_per_period"])
    tau = float(p["duration_s"])
    carrier = gatesim.GatePulse(
        targets,
        1e-21,
        resolve_direction(crystal, targets, p.get("direction", "separation")),
        p["envelope"],
        tau,
        io.angular(p, "carrier_nu"),
    )
    vertical = gatesim.GatePulse(targets, 1e-21, (0.0, 0.0, 1.0), p["envelope"], tau, 0.0)
    carrier = gatesim.calibrate_to_pi(carrier, crystal, modes, spp)
    vertical = gatesim.calibrate_to_pi(vertical, crystal, modes, spp)
    return GateSetup(trap, crystal, modes, carrier, vertical)


def temperature_grid(params: dict) -> np.ndarray:
    p = io.merge(OPERATING_POINT, params)
    return np.linspace(float(p["t_min_k"]), float(p["t_max_k"]), int(p["t_points"]))


def spectrum_table(modes: PhononModes) -> list:
    return [(k, w, lab) for k, w, lab in spectrum_rows(modes)]


def force_profile_table(setup: GateSetup, n_samples: int = 401) -> list:
    t, fc = gatesim.force_profile(setup.carrier, n_samples)
    _, fv = gatesim.force_profile(setup.vertical, n_samples)
    return list(zip(t, fc, fv))


def reproduce_figure2(out_dir, params: dict | None = None) -> dict:
    """Write spectrum, force profiles, fidelity-vs-temperature and a summary."""
    params = dict(params or {})
    out = pathlib.Path(out_dir)
    setup = build_setup(params)
    spp = int(io.merge(OPERATING_POINT, params)["steps_per_period"])
    temps = temperature_grid(params)
    rows = gatesim.temperature_sweep(
        setup.carrier, setup.vertical, setup.crystal, setup.modes, temps, setup.trap.k_B, spp
    )
    io.write_csv(
        out / "spectrum.csv",
        "spectrum",
        ["index", "omega_over_omega_xy", "polarization"],
        spectrum_table(setup.modes),
    )
    io.write_csv(
        out / "force_profile.csv",
        "force_profile",
        ["t_s", "f_carrier_N", "f_vertical_N"],
        force_profile_table(setup),
    )
    io.write_csv(out / "fidelity_vs_T.csv", "fidelity_vs_T", ["T_K", "F_carrier", "F_vertical"], rows)
    bands = {k: [lo / setup.trap.omega_xy, hi / setup.trap.omega_xy] for k, (lo, hi) in spectral_bands(setup.modes).items()}
    summary = {
        "n_ions": setup.trap.n_ions,
        "omega_z_over_omega_xy": setup.trap.beta,
        "nu_over_omega_xy": setup.carrier.carrier_nu / setup.trap.omega_xy,
        "targets": list(setup.carrier.targets),
        "envelope": setup.carrier.envelope,
        "duration_s": setup.carrier.duration,
        "force_for_pi_carrier_N": setup.carrier.force_amplitude,
        "force_for_pi_vertical_N": setup.vertical.force_amplitude,
        "force_ratio": setup.force_ratio,
        "force_ratio_estimate": (setup.trap.omega_z / setup.carrier.carrier_nu) ** 2,
        "bands_over_omega_xy": bands,
        "fidelity_rows": len(rows),
    }
    io.write_json(out / "summary.json", summary)
    return summary


def gate_at_temperature(setup: GateSetup, pulse: gatesim.GatePulse, temperature: float, spp: int = 200):
    th = thermal_occupation(setup.modes, temperature, setup.trap.k_B)
    return gatesim.gate_fidelity(pulse, setup.crystal, setup.modes, th, spp)
