"""Classical equilibrium configurations of ions in a rotating-frame Penning trap.

The effective potential is harmonic (``omega_xy`` laterally, ``omega_z``
vertically) plus pairwise Coulomb repulsion. Internally everything runs in
dimensionless units: lengths in ``l0 = (q^2 / (4 pi eps0 m omega_xy^2))^(1/3)``,
energies in ``m omega_xy^2 l0^2``, forces in ``m omega_xy^2 l0``. SI only
appears at the public boundary.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
import scipy.constants as const
import scipy.optimize

from . import kernels
from .errors import ConfigError, ConvergenceError, DegenerateInputError

logger = logging.getLogger(__name__)

BERYLLIUM_MASS = 9.012182 * const.atomic_mass


@dataclasses.dataclass(frozen=True)
class TrapConfig:
    """Trap, ion species and physical constants (all SI, angular frequencies)."""

    n_ions: int
    omega_xy: float
    omega_z: float
    omega_r: float = 2 * np.pi * 50e3
    mass: float = BERYLLIUM_MASS
    charge: float = const.e
    hbar: float = const.hbar
    epsilon_0: float = const.epsilon_0
    k_B: float = const.k

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ConfigError(f"n_ions must be a positive integer, got {self.n_ions}")
        for name in ("omega_xy", "omega_z", "omega_r", "mass", "charge", "hbar", "epsilon_0", "k_B"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be strictly positive, got {value}")

    @property
    def beta(self) -> float:
        """Aspect ratio ``omega_z / omega_xy``."""
        return self.omega_z / self.omega_xy

    @property
    def coulomb_constant(self) -> float:
        return self.charge**2 / (4 * np.pi * self.epsilon_0)

    @property
    def length_unit(self) -> float:
        return (self.coulomb_constant / (self.mass * self.omega_xy**2)) ** (1.0 / 3.0)

    @property
    def energy_unit(self) -> float:
        return self.mass * self.omega_xy**2 * self.length_unit**2

    @property
    def force_unit(self) -> float:
        return self.mass * self.omega_xy**2 * self.length_unit

    def two_ion_separation(self) -> float:
        """Analytic separation of two ions along a lateral axis (m)."""
        return 2.0 ** (1.0 / 3.0) * self.length_unit

    def replace(self, **changes) -> "TrapConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrapConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown TrapConfig keys: {sorted(unknown)}")
        return cls(**data)


@dataclasses.dataclass(frozen=True)
class IonCrystal:
    """Equilibrium positions (m, shape ``(N, 3)``) and convergence metadata."""

    positions: np.ndarray
    gradient_norm: float
    energy: float
    spacing_d: float
    n_iter: int = 0

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    def center_pair(self) -> tuple[int, int]:
        """Indices of the two ions closest to the trap axis."""
        r = np.linalg.norm(self.positions, axis=1)
        order = np.lexsort((np.arange(len(r)), np.round(r / self.spacing_d, 9)))
        return int(order[0]), int(order[1])

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "gradient_norm": self.gradient_norm,
            "energy": self.energy,
            "spacing_d": self.spacing_d,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IonCrystal":
        return cls(
            positions=np.asarray(data["positions"], dtype=float).reshape(-1, 3),
            gradient_norm=float(data["gradient_norm"]),
            energy=float(data["energy"]),
            spacing_d=float(data["spacing_d"]),
            n_iter=int(data.get("n_iter", 0)),
        )


def _as_positions(positions) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos.reshape(-1, 3)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise ConfigError(f"positions must have shape (N, 3), got {pos.shape}")
    return pos


def _check_distinct(u: np.ndarray, scale: float = 1.0) -> None:
    if len(u) > 1 and kernels.min_distance(u) < 1e-9 * scale:
        raise DegenerateInputError("coincident ions: Coulomb energy is singular")


def potential_energy(config: TrapConfig, positions) -> float:
    """Trap plus Coulomb energy (J) of ions at ``positions`` (m)."""
    u = _as_positions(positions) / config.length_unit
    _check_distinct(u)
    return kernels.energy(u, config.beta**2) * config.energy_unit


def energy_gradient(config: TrapConfig, positions) -> np.ndarray:
    """Analytic gradient of :func:`potential_energy` (N, shape ``(N, 3)``)."""
    u = _as_positions(positions) / config.length_unit
    _check_distinct(u)
    return kernels.gradient(u, config.beta**2) * config.force_unit


def nearest_neighbor_spacing(positions) -> float:
    pos = _as_positions(positions)
    if len(pos) < 2:
        return 0.0
    diff = pos[:, None, :] - pos[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(r, np.inf)
    return float(np.median(r.min(axis=1)))


def _hex_disk(n: int, spacing: float) -> np.ndarray:
    """``n`` sites of a triangular lattice nearest the origin, deterministic order."""
    shells = int(math.ceil(math.sqrt(n / 3.0))) + 2
    ij = np.array([(i, j) for i in range(-shells, shells + 1) for j in range(-shells, shells + 1)])
    x = ij[:, 0] + 0.5 * ij[:, 1]
    y = (math.sqrt(3) / 2) * ij[:, 1]
    r = np.round(np.hypot(x, y), 9)
    ang = np.round(np.mod(np.arctan2(y, x), 2 * np.pi), 9)
    order = np.lexsort((ang, r))[:n]
    pts = np.zeros((n, 3))
    pts[:, 0] = x[order] * spacing
    pts[:, 1] = y[order] * spacing
    return pts


def planarity_threshold(n_ions: int) -> float:
    """Default ``omega_z / omega_xy`` above which a single-layer seed is used.

    Rough single-plane stability estimate; the minimizer corrects a wrong guess.
    """
    return 0.8 * max(n_ions, 1) ** 0.25 + 1.0


def seed_lattice(config: TrapConfig, planarity: float | None = None) -> np.ndarray:
    """Triangular-lattice seed (m). Single plane unless the trap is too round."""
    n = config.n_ions
    s = config.two_ion_separation()
    threshold = planarity_threshold(n) if planarity is None else planarity
    if config.beta >= threshold or n < 4:
        return _hex_disk(n, s)
    n_layers = max(2, int(round((n ** (1.0 / 3.0)) / config.beta ** (2.0 / 3.0))))
    per_layer = [n // n_layers + (1 if k < n % n_layers else 0) for k in range(n_layers)]
    layers = []
    for k, count in enumerate(per_layer):
        layer = _hex_disk(count, s)
        layer[:, 0] += 0.5 * s * (k % 2)
        layer[:, 1] += (s / (2 * math.sqrt(3))) * (k % 2)
        layer[:, 2] = (k - (n_layers - 1) / 2.0) * s
        layers.append(layer)
    pts = np.vstack(layers)
    pts[:, :2] -= pts[:, :2].mean(axis=0)
    return pts


def _is_collinear(u: np.ndarray) -> bool:
    if len(u) < 3:
        return False
    centered = u - u.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[1] <= 1e-12 * max(sv[0], 1e-300)


def _deterministic_jitter(n: int, amplitude: float) -> np.ndarray:
    idx = np.arange(n)[:, None]
    phases = np.array([[0.7548776662, 0.5698402910, 0.3819660113]])
    return amplitude * np.sin(2 * np.pi * ((idx + 1) * phases))


def _newton_polish(u, beta2, tol, max_iter):
    """Damped Newton with the soft rotational direction projected out."""
    e = kernels.energy(u, beta2)
    it = 0
    for it in range(1, max_iter + 1):
        g = kernels.gradient(u, beta2).ravel()
        if np.linalg.norm(g) < tol:
            return u, e, it - 1
        h = kernels.hessian(u, beta2)
        w, v = np.linalg.eigh(h)
        floor = 1e-8 * max(abs(w).max(), 1.0)
        w_safe = np.where(w > floor, w, np.inf)
        step = -(v @ ((v.T @ g) / w_safe)).reshape(u.shape)
        lam = 1.0
        for _ in range(30):
            trial = u + lam * step
            e_trial = kernels.energy(trial, beta2)
            if e_trial <= e + 1e-14 * abs(e):
                break
            lam *= 0.5
        else:
            return u, e, it
        u, e = trial, e_trial
    return u, e, it


def _orient(u: np.ndarray) -> np.ndarray:
    """Rotate about z so the outermost ion sits on +x."""
    r = np.round(np.hypot(u[:, 0], u[:, 1]), 9)
    if r.max() == 0:
        return u
    k = int(np.argmax(r))
    ang = math.atan2(u[k, 1], u[k, 0])
    c, s = math.cos(-ang), math.sin(-ang)
    out = u.copy()
    out[:, 0] = c * u[:, 0] - s * u[:, 1]
    out[:, 1] = s * u[:, 0] + c * u[:, 1]
    return out


def minimize(
    config: TrapConfig,
    seed=None,
    tol: float | None = None,
    max_iter: int = 5000,
    orient: bool = True,
    max_escapes: int = 20,
) -> IonCrystal:
    """Relax ``seed`` (m) to a local energy minimum.

    ``tol`` bounds the residual force norm in newtons; the default is
    ``1e-10`` of the trap force unit. A quasi-Newton descent is followed by a
    damped-Newton polish using the analytic Hessian. If the result is a
    saddle, it is kicked along the negative-curvature mode and relaxed again.
    """
    if seed is None:
        seed = seed_lattice(config)
    l0 = config.length_unit
    u = _as_positions(seed) / l0
    if len(u) != config.n_ions:
        raise ConfigError(f"seed has {len(u)} ions but config.n_ions = {config.n_ions}")
    _check_distinct(u)
    if _is_collinear(u):
        d = nearest_neighbor_spacing(u) or 1.0
        u = u + _deterministic_jitter(len(u), 1e-6 * d)
    beta2 = config.beta**2
    tol_u = 1e-10 if tol is None else tol / config.force_unit

    def fun(x):
        p = x.reshape(-1, 3)
        return kernels.energy(p, beta2), kernels.gradient(p, beta2).ravel()

    def descend(start):
        res = scipy.optimize.minimize(
            fun,
            start.ravel(),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-16, "maxcor": 30},
        )
        out = res.x.reshape(-1, 3)
        if kernels.energy(out, beta2) > kernels.energy(start, beta2):
            out = start
        if len(out) > 1 and kernels.min_distance(out) < 1e-6:
            raise DegenerateInputError("ions collapsed onto each other during minimization")
        polished, e, n_newton = _newton_polish(out, beta2, tol_u, 50)
        return polished, e, int(res.nit) + n_newton

    u2, e2, n_iter = descend(u)
    # symmetric seeds can relax onto saddles; step off along the unstable mode
    for _ in range(max_escapes):
        w, v = np.linalg.eigh(kernels.hessian(u2, beta2))
        if w[0] >= -1e-8 * max(abs(w).max(), 1.0):
            break
        d = nearest_neighbor_spacing(u2) or 1.0
        kick = v[:, 0].reshape(-1, 3) * (0.05 * d / np.abs(v[:, 0]).max())
        u2, e2, extra = descend(u2 + kick)
        n_iter += extra
    else:
        logger.warning("equilibrium still has negative curvature after %d escapes", max_escapes)
    gnorm = float(np.linalg.norm(kernels.gradient(u2, beta2)))
    if orient:
        u2 = _orient(u2)
    positions = u2 * l0
    crystal = IonCrystal(
        positions=positions,
        gradient_norm=gnorm * config.force_unit,
        energy=e2 * config.energy_unit,
        spacing_d=nearest_neighbor_spacing(positions),
        n_iter=n_iter,
    )
    if not gnorm < tol_u:
        raise ConvergenceError(
            f"residual force {gnorm:.3e} (trap units) above tolerance {tol_u:.3e}", last=crystal
        )
    logger.debug("minimized N=%d in %d iterations, |grad|=%.2e", len(u2), crystal.n_iter, gnorm)
    return crystal


def equilibrium(config: TrapConfig, **kwargs) -> IonCrystal:
    """Seed and minimize in one call."""
    return minimize(config, seed_lattice(config), **kwargs)
