"""Push-gate dynamics on crystal phonon modes.

Each qubit configuration ``s`` (eigenvalues of sigma^z on the target ions)
drives every normal mode as an independent forced oscillator. The forced
oscillator obeys

    beta' = -i w beta + i (alpha / (hbar sqrt 2)) f(t)
    phi'  = (alpha / (hbar sqrt 2)) f(t) Re(beta)

which is integrated with fixed-step RK4 (see :mod:`crystalgate.kernels`).
Because the mode force is ``F * c_K(s) * g(t)`` with a configuration
independent waveform ``g``, one unit-drive integration per mode gives all
configurations: ``beta`` scales linearly and ``phi`` quadratically.

Two-body phases use the ordered-pair convention: the branch phase is
``sum_{i,j} phi_ij s_i s_j`` so a pair contributes ``2 phi_ij s_i s_j`` and the
conditional (CZ-type) phase is ``8 phi_ij``. "A pi gate" means conditional
phase pi.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from . import kernels
from .crystal import IonCrystal
from .errors import ConfigError, PreconditionError, ResonanceError, TruncationError
from .phonons import PhononModes, ThermalState

ENVELOPES = ("sin2", "sin4", "sin6", "blackman", "trapezoid", "gaussian")


@dataclasses.dataclass(frozen=True)
class LaserParams:
    """Off-resonant laser: peak Rabi frequency, detuning and linewidth in rad/s."""

    rabi: float
    detuning: float
    linewidth: float
    wavelength: float | None = None

    def to_dict(self):
        return dataclasses.asdict(self)


def envelope(name: str, t, tau: float) -> np.ndarray:
    """Normalized pulse envelope, peak 1 and zero at ``t = 0`` and ``t = tau``."""
    x = np.clip(np.asarray(t, dtype=float) / tau, 0.0, 1.0)
    if name in ("sin2", "sin4", "sin6"):
        return np.sin(np.pi * x) ** int(name[3])
    if name == "blackman":
        return 0.42 - 0.5 * np.cos(2 * np.pi * x) + 0.08 * np.cos(4 * np.pi * x)
    if name == "trapezoid":
        ramp = 0.25
        up = np.sin(0.5 * np.pi * np.minimum(x, ramp) / ramp) ** 2
        down = np.sin(0.5 * np.pi * np.minimum(1 - x, ramp) / ramp) ** 2
        return np.minimum(up, down)
    if name == "gaussian":
        width = 1.0 / 6.0
        g = np.exp(-0.5 * ((x - 0.5) / width) ** 2)
        edge = math.exp(-0.5 * (0.5 / width) ** 2)
        return (g - edge) / (1 - edge)
    raise ConfigError(f"unknown envelope {name!r}; choose from {ENVELOPES}")


def envelope_bandwidth(name: str, tau: float) -> float:
    """Characteristic angular bandwidth of an envelope (rad/s).

    For the cosine-series shapes this is half the first spectral zero:
    ``sin^n`` has its first zero at ``(n/2 + 1) 2 pi / tau``.
    """
    if name in ("sin2", "sin4", "sin6"):
        return 0.5 * (int(name[3]) / 2 + 1) * 2 * np.pi / tau
    if name == "blackman":
        return 1.5 * 2 * np.pi / tau
    if name == "trapezoid":
        return 2 * np.pi / (0.5 * tau)
    if name == "gaussian":
        return 6.0 / tau
    raise ConfigError(f"unknown envelope {name!r}")


def envelope_power_integral(name: str, tau: float, power: int = 2) -> float:
    """``integral_0^tau envelope(t)**power dt``."""
    val, _ = sp_integrate.quad(lambda t: envelope(name, t, tau) ** power, 0.0, tau, limit=200)
    return val


@dataclasses.dataclass(frozen=True)
class GatePulse:
    """State-dependent force pulse on a set of target ions.

    ``direction`` is one unit 3-vector shared by all targets or one per
    target. ``carrier_nu = 0`` gives the unmodulated (adiabatic) push.
    """

    targets: tuple
    force_amplitude: float
    direction: tuple
    envelope: str = "sin2"
    duration: float = 5e-6
    carrier_nu: float = 0.0
    beam_waist: float | None = None
    laser: LaserParams | None = None
    resonance_margin: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(i) for i in self.targets))
        if len(self.targets) < 2 or len(set(self.targets)) != len(self.targets):
            raise ConfigError("a gate needs at least two distinct target ions")
        if self.envelope not in ENVELOPES:
            raise ConfigError(f"unknown envelope {self.envelope!r}")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if self.carrier_nu < 0:
            raise ConfigError("carrier_nu must be non-negative")
        d = np.asarray(self.direction, dtype=float)
        if d.shape == (3,):
            d = np.tile(d, (len(self.targets), 1))
        if d.shape != (len(self.targets), 3):
            raise ConfigError("direction must be a 3-vector or one 3-vector per target")
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms == 0):
            raise ConfigError("direction vectors must be non-zero")
        object.__setattr__(self, "direction", tuple(map(tuple, d / norms[:, None])))

    @property
    def directions(self) -> np.ndarray:
        return np.asarray(self.direction)

    def waveform(self, t) -> np.ndarray:
        """Dimensionless drive ``envelope(t) * cos(nu t)``."""
        env = envelope(self.envelope, t, self.duration)
        if self.carrier_nu == 0:
            return env
        return env * np.cos(self.carrier_nu * np.asarray(t, dtype=float))

    def bandwidth(self) -> float:
        return envelope_bandwidth(self.envelope, self.duration)

    def with_amplitude(self, force: float) -> "GatePulse":
        return dataclasses.replace(self, force_amplitude=float(force))

    def replace(self, **changes) -> "GatePulse":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["targets"] = list(self.targets)
        out["direction"] = [list(v) for v in self.direction]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GatePulse":
        data = dict(data)
        if data.get("laser") is not None:
            data["laser"] = LaserParams(**data["laser"])
        return cls(**data)


@dataclasses.dataclass
class GateResult:
    configs: np.ndarray  # (n_cfg, n_targets) of +-1
    betas: np.ndarray  # (n_cfg, n_modes) complex, residual displacement at tau
    phases: np.ndarray  # (n_cfg, n_modes) accumulated phase per mode
    two_body_phases: dict
    two_body_phases_adiabatic: dict
    conditional_phase: float
    fidelity: float
    infidelity: float
    heating: np.ndarray  # (n_cfg,) added quanta sum_K |beta_K|^2
    force_amplitude: float
    force_for_pi: float
    zero_mode_impulse: float
    temperature: float = float("nan")

    @property
    def max_heating(self) -> float:
        return float(self.heating.max())

    def summary(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "conditional_phase": self.conditional_phase,
            "two_body_phases": {f"{i},{j}": v for (i, j), v in self.two_body_phases.items()},
            "two_body_phases_adiabatic": {
                f"{i},{j}": v for (i, j), v in self.two_body_phases_adiabatic.items()
            },
            "heating": self.heating.tolist(),
            "force_amplitude": self.force_amplitude,
            "force_for_pi": self.force_for_pi,
            "zero_mode_impulse": self.zero_mode_impulse,
            "temperature": self.temperature,
        }

    def to_dict(self) -> dict:
        out = self.summary()
        out["configs"] = self.configs.tolist()
        out["betas_real"] = self.betas.real.tolist()
        out["betas_imag"] = self.betas.imag.tolist()
        out["phases"] = self.phases.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GateResult":
        def pairs(d):
            return {tuple(int(x) for x in k.split(",")): float(v) for k, v in d.items()}

        return cls(
            configs=np.asarray(data["configs"], dtype=int),
            betas=np.asarray(data["betas_real"]) + 1j * np.asarray(data["betas_imag"]),
            phases=np.asarray(data["phases"], dtype=float),
            two_body_phases=pairs(data["two_body_phases"]),
            two_body_phases_adiabatic=pairs(data["two_body_phases_adiabatic"]),
            conditional_phase=float(data["conditional_phase"]),
            fidelity=float(data["fidelity"]),
            infidelity=float(data["infidelity"]),
            heating=np.asarray(data["heating"], dtype=float),
            force_amplitude=float(data["force_amplitude"]),
            force_for_pi=float(data["force_for_pi"]),
            zero_mode_impulse=float(data["zero_mode_impulse"]),
            temperature=float(data["temperature"]) if data["temperature"] is not None else float("nan"),
        )


# --------------------------------------------------------------------------
# forces and single-mode dynamics


def target_projections(pulse: GatePulse, modes: PhononModes) -> np.ndarray:
    """``P[a, K] = sum_c M[3 i_a + c, K] e_{a,c}`` for each target ``a``."""
    n_ions = modes.n_modes // 3
    for i in pulse.targets:
        if not 0 <= i < n_ions:
            raise PreconditionError(f"target ion {i} outside crystal of {n_ions} ions")
    return np.stack([pulse.directions[a] @ modes.ion_block(i) for a, i in enumerate(pulse.targets)])


def force_on_modes(pulse: GatePulse, crystal: IonCrystal | None, modes: PhononModes, signs, t) -> np.ndarray:
    """Mode forces ``f_K(t) = sum_i s_i M_iK (f_i(t) . e)`` in newtons.

    Returns shape ``(len(t), 3N)`` for array ``t`` or ``(3N,)`` for scalar ``t``.
    """
    s = np.asarray(signs, dtype=float)
    if s.shape != (len(pulse.targets),):
        raise ConfigError("one sign per target ion required")
    coupling = s @ target_projections(pulse, modes)
    g = pulse.waveform(t)
    return pulse.force_amplitude * np.multiply.outer(g, coupling)


def mode_coupling(alpha, hbar: float):
    """``alpha / (hbar sqrt 2)``: rate per newton of force."""
    return np.asarray(alpha, dtype=float) / (hbar * math.sqrt(2.0))


def _check_step(dt: float, omega: float, nu: float) -> None:
    fastest = max(abs(omega), abs(nu))
    if fastest > 0 and dt > 2 * np.pi / (50 * fastest) * (1 + 1e-12):
        raise ConfigError(f"time step {dt:.3e} s exceeds 2 pi / (50 max(omega, nu))")


def integrate_mode(
    omega: float,
    alpha: float,
    force: Callable,
    tau: float,
    dt: float,
    hbar: float = 1.054571817e-34,
    nu: float = 0.0,
) -> tuple[complex, float]:
    """Integrate one driven mode from ``beta = phi = 0`` to ``t = tau``.

    ``force`` is a vectorized callable returning newtons. ``dt`` is rounded
    down so an integer number of steps spans ``tau``.
    """
    _check_step(dt, omega, nu)
    nsteps = max(1, int(math.ceil(tau / dt - 1e-9)))
    h = tau / nsteps
    t = np.linspace(0.0, tau, 2 * nsteps + 1)
    samples = np.asarray(force(t), dtype=float)
    beta, phi, _ = kernels.rk4_modes(
        np.array([omega]), np.array([float(mode_coupling(alpha, hbar))]), samples, h
    )
    return complex(beta[0]), float(phi[0])


def carrier_beta_amplitudes(omega, alpha, f_now, nu, hbar=1.054571817e-34, guard=None):
    """Adiabatic-elimination amplitudes ``beta_pm = alpha f / (2 sqrt2 hbar (omega pm nu))``."""
    guard = 1e-6 * omega if guard is None else guard
    for denom in (omega + nu, omega - nu):
        if abs(denom) <= guard:
            raise ResonanceError(f"carrier nu={nu:.6g} resonant with mode omega={omega:.6g}")
    pref = alpha * f_now / (2 * math.sqrt(2.0) * hbar)
    return pref / (omega + nu), pref / (omega - nu)


def check_resonance(pulse: GatePulse, modes: PhononModes) -> None:
    if pulse.carrier_nu == 0:
        return
    gap = np.min(np.abs(pulse.carrier_nu - modes.frequencies))
    need = pulse.resonance_margin * pulse.bandwidth()
    if gap < need:
        raise ResonanceError(
            f"carrier nu = {pulse.carrier_nu / modes.omega_xy:.4g} omega_xy lies within "
            f"{need / modes.omega_xy:.3g} omega_xy of a phonon mode (gap {gap / modes.omega_xy:.3g})"
        )


# --------------------------------------------------------------------------
# closed forms


def form_factor(modes: PhononModes, i: int, j: int, nu: float, polarization: str | None = None) -> np.ndarray:
    """Pulse-shape independent form factor as a 3x3 Cartesian block.

    For ``nu > 0``:  ``S = -sum_K alpha_K^2 w_K M_iK M_jK^T / (4 hbar^2 (nu^2 - w_K^2))``,
    which already carries the cos^2 -> 1/2 average. For ``nu = 0`` (no
    modulation): ``S = sum_K alpha_K^2 M_iK M_jK^T / (2 hbar^2 w_K)``, zero
    modes excluded. Units ``1 / (N^2 s)``.
    """
    sel = modes.mask(polarization)
    w = modes.frequencies
    mi = modes.ion_block(i)
    mj = modes.ion_block(j)
    # alpha_K^2 w_K = hbar / m for every mode
    pref = 1.0 / (modes.hbar * modes.mass)
    if nu == 0:
        keep = sel & ~modes.zero_modes
        weights = np.zeros_like(w)
        weights[keep] = 0.5 * pref / w[keep] ** 2
    else:
        guard = 1e-6 * modes.omega_xy
        near = sel & (np.abs(nu - w) <= guard)
        if near.any():
            raise ResonanceError(f"nu = {nu:.6g} rad/s sits on a phonon mode")
        weights = np.where(sel, -0.25 * pref / (nu**2 - w**2), 0.0)
    return (mi * weights) @ mj.T


def two_body_phase(pulse: GatePulse, crystal: IonCrystal | None, modes: PhononModes) -> dict:
    """Adiabatic-elimination two-body phases ``phi_ij`` for every target pair."""
    env2 = envelope_power_integral(pulse.envelope, pulse.duration, 2)
    out = {}
    dirs = pulse.directions
    for (a, i), (b, j) in itertools.combinations(enumerate(pulse.targets), 2):
        s = form_factor(modes, i, j, pulse.carrier_nu)
        out[(i, j)] = float(dirs[a] @ s @ dirs[b]) * pulse.force_amplitude**2 * env2
    return out


def spontaneous_error(laser: LaserParams, tau: float, envelope_name: str = "sin2", n_beams: int = 2) -> float:
    """Photon-scattering probability per gate.

    ``n_beams * (gamma / 2) * (Omega0 / (2 Delta))^2 * tau_eff`` with
    ``tau_eff = integral envelope^2 dt`` (envelope of the Rabi frequency).
    """
    if laser.rabi == 0:
        return 0.0
    tau_eff = envelope_power_integral(envelope_name, tau, 2)
    return n_beams * 0.5 * laser.linewidth * (laser.rabi / (2 * laser.detuning)) ** 2 * tau_eff


def peak_force(laser: LaserParams, waist: float, hbar: float = 1.054571817e-34) -> float:
    """Largest dipole force of a Gaussian beam, ``U = hbar Omega^2 / (4 Delta)``.

    With ``Omega(r)^2 = Omega0^2 exp(-2 r^2 / w^2)`` the gradient peaks at
    ``r = w / 2`` giving ``hbar Omega0^2 / (4 Delta) * (2 / w) * exp(-1/2)``.
    """
    return hbar * laser.rabi**2 / (4 * laser.detuning) * (2.0 / waist) * math.exp(-0.5)


def rabi_for_force(force: float, detuning: float, waist: float, hbar: float = 1.054571817e-34) -> float:
    """Peak Rabi frequency needed for :func:`peak_force` to equal ``force``."""
    return math.sqrt(force * 4 * detuning * waist * math.exp(0.5) / (2.0 * hbar))


# --------------------------------------------------------------------------
# fidelity


def sign_configs(n_targets: int) -> np.ndarray:
    return np.array(list(itertools.product((1, -1), repeat=n_targets)), dtype=int)


def worst_case_infidelity(coherence: np.ndarray) -> tuple[float, np.ndarray]:
    """Worst-case infidelity of a diagonal (dephasing-type) qubit channel.

    ``coherence[s, s']`` multiplies ``rho[s, s']``. The ideal gate is the
    diagonal phase pattern ``arg coherence[s, 0]``, which absorbs the
    two-body phase, single-qubit z rotations and the global phase. For an
    input with populations ``w`` the infidelity is ``w^T B w`` with
    ``B = 1 - Re(c~)``; its maximum over the simplex is found by solving the
    stationarity condition on every support.
    """
    c = np.asarray(coherence, dtype=complex)
    n = len(c)
    ref = np.angle(c[:, 0])
    tilde = c * np.exp(-1j * (ref[:, None] - ref[None, :]))
    mag = np.abs(tilde)
    ang = np.angle(tilde)
    # 1 - |c| cos(a) without cancellation
    one_minus_mag = np.clip(1.0 - mag, 0.0, None)
    bmat = one_minus_mag * np.cos(ang) + 2.0 * np.sin(0.5 * ang) ** 2
    bmat = 0.5 * (bmat + bmat.T)
    np.fill_diagonal(bmat, 0.0)
    best, best_w = 0.0, np.eye(n)[0]
    for size in range(2, n + 1):
        for support in itertools.combinations(range(n), size):
            sub = bmat[np.ix_(support, support)]
            try:
                y = np.linalg.solve(sub, np.ones(size))
            except np.linalg.LinAlgError:
                continue
            total = y.sum()
            if not np.isfinite(total) or total == 0:
                continue
            w = y / total
            if np.any(w < -1e-12):
                continue
            value = float(w @ sub @ w)
            if value > best:
                best = value
                best_w = np.zeros(n)
                best_w[list(support)] = w
    return min(max(best, 0.0), 1.0), best_w


def coherence_from_displacements(phases_total, betas, occupations) -> np.ndarray:
    """Channel multipliers from branch phases and residual displacements.

    ``c[s, s'] = exp(i (Phi_s - Phi_s')) exp(i Im sum_K beta*_{s'K} beta_{sK})
                 exp(-sum_K |beta_sK - beta_s'K|^2 (n_K + 1/2))``.
    """
    phi = np.asarray(phases_total, dtype=float)
    b = np.asarray(betas, dtype=complex)
    n = np.asarray(occupations, dtype=float)
    diff = b[:, None, :] - b[None, :, :]
    decay = np.sum(np.abs(diff) ** 2 * (n + 0.5), axis=-1)
    cross = np.imag(np.einsum("tk,sk->st", np.conj(b), b))
    return np.exp(1j * (phi[:, None] - phi[None, :] + cross) - decay)


@dataclasses.dataclass
class UnitResponse:
    """Per-mode response to the waveform with unit force amplitude and unit projection."""

    active: np.ndarray  # indices of driven, non-zero modes
    beta: np.ndarray
    phi: np.ndarray
    beta_max: np.ndarray
    projections: np.ndarray  # (n_targets, n_modes)
    nsteps: int
    dt: float
    zero_impulse: np.ndarray  # (n_targets,) |integral g| weighted projection onto zero modes


def time_grid(pulse: GatePulse, fastest: float, steps_per_period: int = 200) -> tuple[int, float]:
    if steps_per_period < 50:
        raise ConfigError("steps_per_period must be at least 50")
    fastest = max(fastest, pulse.carrier_nu, 1.0 / pulse.duration)
    nsteps = int(math.ceil(pulse.duration * fastest * steps_per_period / (2 * np.pi)))
    return nsteps, pulse.duration / nsteps


def unit_response(pulse: GatePulse, modes: PhononModes, steps_per_period: int = 200) -> UnitResponse:
    proj = target_projections(pulse, modes)
    driven = np.any(np.abs(proj) > 1e-13, axis=0)
    active = np.flatnonzero(driven & ~modes.zero_modes)
    w = modes.frequencies[active]
    nsteps, dt = time_grid(pulse, float(w.max()) if len(w) else 0.0, steps_per_period)
    t = np.linspace(0.0, pulse.duration, 2 * nsteps + 1)
    g = pulse.waveform(t)
    k = mode_coupling(modes.mode_lengths[active], modes.hbar)
    beta, phi, bmax = kernels.rk4_modes(w, k, g, dt)
    zero = driven & modes.zero_modes
    g_int = float(sp_integrate.simpson(g, x=t))
    zero_imp = np.abs(proj[:, zero]).sum(axis=1) * abs(g_int)
    return UnitResponse(active, beta, phi, bmax, proj, nsteps, dt, zero_imp)


def _branch_quantities(resp: UnitResponse, pulse: GatePulse, n_modes: int):
    configs = sign_configs(len(pulse.targets))
    c = configs @ resp.projections[:, resp.active] * pulse.force_amplitude
    betas = np.zeros((len(configs), n_modes), dtype=complex)
    phases = np.zeros((len(configs), n_modes))
    betas[:, resp.active] = c * resp.beta
    phases[:, resp.active] = c**2 * resp.phi
    return configs, betas, phases


def _pair_phases(configs: np.ndarray, total: np.ndarray, targets) -> dict:
    """Ordered-pair two-body phase ``phi_ij`` from branch phases (coefficient/2)."""
    out = {}
    ncfg = len(configs)
    for a, b in itertools.combinations(range(len(targets)), 2):
        coef = float(np.sum(total * configs[:, a] * configs[:, b]) / ncfg)
        out[(targets[a], targets[b])] = 0.5 * coef
    return out


def result_from_response(
    resp: UnitResponse, pulse: GatePulse, modes: PhononModes, thermal: ThermalState
) -> GateResult:
    configs, betas, phases = _branch_quantities(resp, pulse, modes.n_modes)
    total = phases.sum(axis=1)
    occ = np.where(modes.zero_modes, 0.0, np.asarray(thermal.occupations, dtype=float))
    coh = coherence_from_displacements(total, betas, occ)
    infid, _ = worst_case_infidelity(coh)
    pair = _pair_phases(configs, total, pulse.targets)
    first = next(iter(pair.values()))
    cond = 8.0 * first
    f_pi = pulse.force_amplitude * math.sqrt(math.pi / abs(cond)) if cond != 0 else float("inf")
    return GateResult(
        configs=configs,
        betas=betas,
        phases=phases,
        two_body_phases=pair,
        two_body_phases_adiabatic=two_body_phase(pulse, None, modes),
        conditional_phase=cond,
        fidelity=1.0 - infid,
        infidelity=infid,
        heating=np.sum(np.abs(betas) ** 2, axis=1),
        force_amplitude=pulse.force_amplitude,
        force_for_pi=f_pi,
        zero_mode_impulse=float(pulse.force_amplitude * resp.zero_impulse.sum()),
        temperature=thermal.temperature,
    )


def gate_fidelity(
    pulse: GatePulse,
    crystal: IonCrystal | None,
    modes: PhononModes,
    thermal: ThermalState,
    steps_per_period: int = 200,
    check: bool = True,
) -> GateResult:
    """Integrate every driven mode and evaluate the worst-case gate fidelity."""
    if check:
        check_resonance(pulse, modes)
    resp = unit_response(pulse, modes, steps_per_period)
    return result_from_response(resp, pulse, modes, thermal)


def force_for_pi(pulse: GatePulse, crystal, modes: PhononModes, steps_per_period: int = 200) -> float:
    """Force amplitude (N) giving conditional phase pi, from the integrated dynamics."""
    resp = unit_response(pulse, modes, steps_per_period)
    configs, _, phases = _branch_quantities(resp, pulse.with_amplitude(1.0), modes.n_modes)
    pair = _pair_phases(configs, phases.sum(axis=1), pulse.targets)
    cond = 8.0 * next(iter(pair.values()))
    return math.sqrt(math.pi / abs(cond))


def calibrate_to_pi(pulse: GatePulse, crystal, modes: PhononModes, steps_per_period: int = 200) -> GatePulse:
    return pulse.with_amplitude(force_for_pi(pulse, crystal, modes, steps_per_period))


def temperature_sweep(
    pulse_carrier: GatePulse,
    pulse_vertical: GatePulse,
    crystal,
    modes: PhononModes,
    temperatures: Sequence[float],
    k_B: float = 1.380649e-23,
    steps_per_period: int = 200,
) -> list[tuple[float, float, float]]:
    """Rows ``(T, F_carrier, F_vertical)``. Pulses should already be calibrated."""
    from .phonons import thermal_occupation

    check_resonance(pulse_carrier, modes)
    rc = unit_response(pulse_carrier, modes, steps_per_period)
    rv = unit_response(pulse_vertical, modes, steps_per_period)
    rows = []
    for temp in temperatures:
        th = thermal_occupation(modes, float(temp), k_B)
        fc = result_from_response(rc, pulse_carrier, modes, th).fidelity
        fv = result_from_response(rv, pulse_vertical, modes, th).fidelity
        rows.append((float(temp), fc, fv))
    return rows


def force_profile(pulse: GatePulse, n_samples: int = 400) -> tuple[np.ndarray, np.ndarray]:
    """Force on one target ion over the gate, ``(t, f(t))`` in s and N."""
    t = np.linspace(0.0, pulse.duration, n_samples)
    return t, pulse.force_amplitude * pulse.waveform(t)


# --------------------------------------------------------------------------
# truncated Fock-space oracle


def _thermal_populations(nbar: float, tail: float = 1e-12) -> np.ndarray:
    if nbar <= 0:
        return np.array([1.0])
    q = nbar / (nbar + 1.0)
    n_keep = int(math.ceil(math.log(tail) / math.log(q))) + 1
    n = np.arange(n_keep)
    return (1.0 - q) * q**n


def _propagate_fock(omega, lam, dt, n_max, n_cols):
    """RK4 for ``U`` in the interaction picture of ``H = w a^dag a + lam(t)(a + a^dag)``.

    ``lam`` is sampled at half steps. Returns the ``(n_max, n_cols)`` block
    of the propagator acting on the lowest ``n_cols`` Fock states.
    """
    sq = np.sqrt(np.arange(1, n_max))
    u = np.zeros((n_max, n_cols), dtype=complex)
    u[np.arange(n_cols), np.arange(n_cols)] = 1.0

    def deriv(t, lam_t, v):
        # -i lam (a e^{-iwt} + a^dag e^{iwt}) v
        out = np.zeros_like(v)
        ph = np.exp(-1j * omega * t)
        out[:-1] += ph * sq[:, None] * v[1:]
        out[1:] += np.conj(ph) * sq[:, None] * v[:-1]
        return -1j * lam_t * out

    nsteps = (len(lam) - 1) // 2
    for n in range(nsteps):
        t0 = n * dt
        k1 = deriv(t0, lam[2 * n], u)
        k2 = deriv(t0 + 0.5 * dt, lam[2 * n + 1], u + 0.5 * dt * k1)
        k3 = deriv(t0 + 0.5 * dt, lam[2 * n + 1], u + 0.5 * dt * k2)
        k4 = deriv(t0 + dt, lam[2 * n + 2], u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def fock_coherence(
    pulse: GatePulse,
    modes: PhononModes,
    thermal: ThermalState,
    n_max: int | None = None,
    steps_per_period: int = 200,
    leak_tol: float = 1e-8,
) -> np.ndarray:
    """Qubit channel multipliers from explicit truncated-Fock evolution of each mode."""
    proj = target_projections(pulse, modes)
    configs = sign_configs(len(pulse.targets))
    # classical peak excursion is used only to size the Fock basis and step
    resp = unit_response(pulse, modes, steps_per_period)
    coh = np.ones((len(configs), len(configs)), dtype=complex)
    for idx, k in enumerate(resp.active):
        nbar = float(thermal.occupations[k])
        pops = _thermal_populations(nbar)
        drive = configs @ proj[:, k] * pulse.force_amplitude
        lam_scale = modes.mode_lengths[k] / (modes.hbar * math.sqrt(2.0))
        reach = math.sqrt(len(pops)) + np.max(np.abs(drive)) * resp.beta_max[idx]
        size = n_max or int(math.ceil(reach**2 + 8 * reach + 20))
        cols = min(len(pops), size)
        pops = pops[:cols]
        lam_peak = np.max(np.abs(drive)) * lam_scale
        nsteps = max(resp.nsteps, int(math.ceil(pulse.duration * lam_peak * math.sqrt(size) / 0.25)))
        dt = pulse.duration / nsteps
        t = np.linspace(0.0, pulse.duration, 2 * nsteps + 1)
        g = pulse.waveform(t)
        states = []
        for d in drive:
            u = _propagate_fock(modes.frequencies[k], lam_scale * d * g, dt, size, cols)
            leak = float(np.sum(pops * np.sum(np.abs(u[-2:]) ** 2, axis=0)))
            if leak > leak_tol:
                raise TruncationError(
                    f"mode {k}: population {leak:.2e} in the top Fock levels at n_max={size}; "
                    "increase n_max"
                )
            states.append(u)
        for a, ua in enumerate(states):
            for b, ub in enumerate(states):
                coh[a, b] *= np.sum(pops * np.sum(np.conj(ub) * ua, axis=0))
    return coh


def fock_oracle(
    pulse: GatePulse,
    crystal: IonCrystal | None,
    modes: PhononModes,
    thermal: ThermalState,
    n_max: int | None = None,
    steps_per_period: int = 200,
) -> float:
    """Worst-case fidelity from explicit Fock-space evolution (two-ion systems only)."""
    if modes.n_modes != 6:
        raise PreconditionError("the Fock oracle supports two-ion systems only")
    coh = fock_coherence(pulse, modes, thermal, n_max=n_max, steps_per_period=steps_per_period)
    infid, _ = worst_case_infidelity(coh)
    return 1.0 - infid
