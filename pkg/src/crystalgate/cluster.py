"""Weighted-graph phases from a Gaussian beam swept through the rotating crystal.

Geometry of one triangular cell (lengths in units of the lattice spacing
``d``): the beam travels along ``x`` at half the cell height, so the cell
has one side parallel to the sweep and two slanted sides. The closed forms
``epsilon(sigma)`` and ``theta(omega)`` give the phase on the parallel side
(``epsilon * theta``) and on the slanted sides (``theta``).

Sweep kinematics use the convention: lab beam position
``P(t) = (R - dx(t), dy(t))`` and rotating-frame coordinates
``r' = Rot(+w_r t) P``, i.e. the crystal turns clockwise in the lab.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import integrate as sp_integrate
from scipy.spatial import Delaunay

from .crystal import IonCrystal, TrapConfig
from .errors import ConfigError, PreconditionError
from .gatesim import LaserParams, form_factor
from .phonons import PhononModes

PARALLEL_TOL_DEG = 15.0
NEIGHBOR_FACTOR = 1.3


@dataclasses.dataclass(frozen=True)
class SweepConfig:
    """Beam sweep parameters.

    ``waist_sigma`` is in units of the lattice spacing. ``velocity_v`` is
    the rotating-frame sweep speed; when omitted it follows from the
    kinematics, ``xi * omega_r * tan(chi) / chi``.
    """

    waist_sigma: float
    xi: float
    R: float
    omega_r: float
    laser: LaserParams
    velocity_v: float | None = None
    carrier_nu: float | None = None

    def __post_init__(self):
        if not self.waist_sigma > 0:
            raise ConfigError("waist_sigma must be positive")
        if not 0 < self.xi < self.R:
            raise ConfigError("need 0 < xi < R")
        if not self.omega_r > 0:
            raise ConfigError("omega_r must be positive")
        if self.velocity_v is not None and not self.velocity_v > 0:
            raise ConfigError("velocity_v must be positive")
        if self.carrier_nu is not None and not self.carrier_nu > 0:
            raise ConfigError("carrier_nu must be positive when given")

    @property
    def chi(self) -> float:
        return math.acos(self.xi / self.R)

    @property
    def kinematic_velocity(self) -> float:
        chi = self.chi
        return self.xi * self.omega_r * math.tan(chi) / chi

    @property
    def speed(self) -> float:
        return self.kinematic_velocity if self.velocity_v is None else self.velocity_v

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        data["laser"] = LaserParams(**data["laser"])
        return cls(**data)


@dataclasses.dataclass
class GraphWeights:
    """Symmetric edge phases ``theta_ij`` (rad), stored once per unordered pair."""

    edges: dict = dataclasses.field(default_factory=dict)
    metadata: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), w in self.edges.items():
            if i == j:
                raise ConfigError("self-edges are not allowed")
            clean[(min(i, j), max(i, j))] = float(w)
        self.edges = clean

    def __getitem__(self, pair) -> float:
        i, j = pair
        return self.edges.get((min(i, j), max(i, j)), 0.0)

    def __len__(self) -> int:
        return len(self.edges)

    def to_dict(self) -> dict:
        return {
            "edges": [[i, j, w] for (i, j), w in sorted(self.edges.items())],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GraphWeights":
        return cls({(int(i), int(j)): float(w) for i, j, w in data["edges"]}, dict(data.get("metadata", {})))


# --------------------------------------------------------------------------
# closed forms


def epsilon(sigma: float) -> float:
    """Ratio of the parallel-side phase to the slanted-side phase."""
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    s2 = sigma * sigma
    return math.exp(-3.0 / (8.0 * s2)) * (11.0 - 8.0 * s2) / (s2 + 8.0)


def theta_formula(omega: float, sweep: SweepConfig, trap: TrapConfig, d: float) -> float:
    """Slanted-side phase for a non-modulated sweep at characteristic frequency ``omega``."""
    if not (omega > 0 and d > 0):
        raise ConfigError("omega and d must be positive")
    sigma = sweep.waist_sigma
    alpha = math.sqrt(trap.hbar / (trap.mass * omega))
    rabi, det = sweep.laser.rabi, sweep.laser.detuning
    return (
        rabi**4
        / (omega**2 * det**2)
        * alpha**4
        / d**4
        * trap.charge**2
        / (trap.hbar * trap.epsilon_0 * sweep.speed)
        * math.exp(-1.0 / (2.0 * sigma**2))
        / (math.sqrt(8.0 * math.pi) * sigma)
        * (1.0 / sigma**2 + 0.125)
    )


def theta(omega: float, sweep: SweepConfig, trap: TrapConfig, d: float) -> float:
    """Effective slanted-side phase; with a carrier this is ``-theta(nu)/2``."""
    if sweep.carrier_nu:
        return -0.5 * theta_formula(sweep.carrier_nu, sweep, trap, d)
    return theta_formula(omega, sweep, trap, d)


def unit_cell(d: float = 1.0) -> np.ndarray:
    """Triangle with one side along x, straddling the line ``y = 0``.

    Ions 0 and 2 form the side parallel to the sweep.
    """
    h = math.sqrt(3.0) / 2.0
    return d * np.array([[0.0, -h / 2, 0.0], [0.5, h / 2, 0.0], [1.0, -h / 2, 0.0]])


def cell_weights(sweep: SweepConfig, trap: TrapConfig, d: float, omega: float | None = None) -> GraphWeights:
    """Edge phases of one cell of :func:`unit_cell`."""
    if omega is None and not sweep.carrier_nu:
        raise ConfigError("omega is required for a non-modulated sweep")
    th = theta(omega if omega is not None else 1.0, sweep, trap, d)
    eps = epsilon(sweep.waist_sigma)
    return GraphWeights({(0, 1): th, (1, 2): th, (0, 2): eps * th}, _metadata(sweep))


def _metadata(sweep: SweepConfig) -> dict:
    return {
        "initial_state": "|+...+>",
        "pre_rotation": "global pi/2",
        "waist_sigma": sweep.waist_sigma,
        "carrier": bool(sweep.carrier_nu),
    }


# --------------------------------------------------------------------------
# quadrature route (independent of the closed forms)


def dipole_tensor(r_ij) -> np.ndarray:
    """In-plane dipolar coupling ``(3 u u^T - I) / r^3`` for separation ``r_ij``."""
    r = np.asarray(r_ij, dtype=float)[:2]
    n = np.linalg.norm(r)
    u = r / n
    return (3.0 * np.outer(u, u) - np.eye(2)) / n**3


def beam_force(rel, sigma: float) -> np.ndarray:
    """Dimensionless push from a beam with intensity ``exp(-r^2 / sigma^2)``."""
    rel = np.asarray(rel, dtype=float)
    return 2.0 * rel / sigma**2 * np.exp(-np.dot(rel, rel) / sigma**2)


def edge_integral(ri, rj, sigma: float, coupling=None, y_path: float = 0.0) -> float:
    """``integral F(r_i - P)^T C F(r_j - P) dX`` for a beam path ``P = (X, y_path)``.

    Positions are 2D (or 3D, z ignored) in lattice units. ``coupling``
    defaults to the dipole tensor of the pair.
    """
    ri = np.asarray(ri, dtype=float)[:2]
    rj = np.asarray(rj, dtype=float)[:2]
    c = dipole_tensor(rj - ri) if coupling is None else np.asarray(coupling, dtype=float)

    def integrand(x):
        p = np.array([x, y_path])
        return beam_force(ri - p, sigma) @ c @ beam_force(rj - p, sigma)

    lo = min(ri[0], rj[0]) - 12 * sigma
    hi = max(ri[0], rj[0]) + 12 * sigma
    mid = sorted({ri[0], rj[0]})
    val, _ = sp_integrate.quad(integrand, lo, hi, points=mid, limit=400, epsabs=0, epsrel=1e-12)
    return val


def slanted_integral(sigma: float) -> float:
    """Closed form of :func:`edge_integral` for a slanted side of :func:`unit_cell`."""
    return (
        -4.0
        * math.pi
        * math.exp(-1.0 / (2.0 * sigma**2))
        * (1.0 / sigma**2 + 0.125)
        / (math.sqrt(8.0 * math.pi) * sigma)
    )


def cell_integrals_from_modes(modes: PhononModes, positions, sigma: float, d: float) -> dict:
    """Edge integrals with the coupling taken from the static phonon response.

    Uses the lateral block of the zero-frequency form factor, which for
    stiffly pinned ions reduces to the dipole tensor up to a constant.
    """
    pos = np.asarray(positions, dtype=float) / d
    out = {}
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            block = form_factor(modes, i, j, 0.0)[:2, :2]
            out[(i, j)] = edge_integral(pos[i], pos[j], sigma, coupling=block)
    return out


# --------------------------------------------------------------------------
# sweep kinematics


def sweep_trajectory(sweep: SweepConfig, t):
    """Lab-frame beam displacement ``(dx, dy)`` in metres; zero outside ``|w_r t| <= chi``."""
    th = sweep.omega_r * np.asarray(t, dtype=float)
    chi = sweep.chi
    on = np.abs(th) <= chi
    thc = np.where(on, th, 0.0)
    dx = np.where(on, sweep.R - sweep.xi / np.cos(thc), 0.0)
    dy = np.where(on, sweep.xi * (thc * math.tan(chi) / chi - np.tan(thc)), 0.0)
    return dx, dy


def beam_position(sweep: SweepConfig, t) -> np.ndarray:
    """Lab-frame beam position ``(R - dx, dy)``; shape ``(len(t), 2)``."""
    dx, dy = sweep_trajectory(sweep, t)
    return np.stack([sweep.R - dx, dy], axis=-1)


def rotating_frame(points, t, omega_r: float) -> np.ndarray:
    """Rotate lab points by ``+omega_r t`` into the crystal frame."""
    pts = np.asarray(points, dtype=float)
    th = omega_r * np.asarray(t, dtype=float)
    c, s = np.cos(th), np.sin(th)
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def rotating_frame_velocity(sweep: SweepConfig, t) -> np.ndarray:
    """Analytic crystal-frame beam velocity inside the sweep window."""
    th = sweep.omega_r * np.asarray(t, dtype=float)
    chi = sweep.chi
    k = math.tan(chi) / chi
    p = sweep.xi / np.cos(th) + 1j * sweep.xi * (k * th - np.tan(th))
    dp = sweep.xi * np.sin(th) / np.cos(th) ** 2 + 1j * sweep.xi * (k - 1.0 / np.cos(th) ** 2)
    v = sweep.omega_r * np.exp(1j * th) * (1j * p + dp)
    return np.stack([v.real, v.imag], axis=-1)


def tangential_speed_deviation(sweep: SweepConfig, window: float | None = None, n: int = 2001) -> float:
    """Largest relative deviation of the crystal-frame speed from ``xi w_r tan(chi)/chi``."""
    window = sweep.chi if window is None else window
    t = np.linspace(-window, window, n) / sweep.omega_r
    speed = np.linalg.norm(rotating_frame_velocity(sweep, t), axis=-1)
    return float(np.max(np.abs(speed / sweep.kinematic_velocity - 1.0)))


def crystal_frame_path(sweep: SweepConfig, t) -> np.ndarray:
    return rotating_frame(beam_position(sweep, t), t, sweep.omega_r)


# --------------------------------------------------------------------------
# full crystal


def _is_planar(positions, spacing: float) -> bool:
    return float(np.ptp(positions[:, 2])) < 1e-6 * spacing


def swept_graph(
    crystal: IonCrystal,
    sweep: SweepConfig,
    trap: TrapConfig,
    omega: float | None = None,
) -> GraphWeights:
    """Edge phases from one sweep along the crystal-frame line ``x = xi``.

    Nearest-neighbour pairs among ions within ``3 sigma d`` of the line get
    ``epsilon * theta`` if the pair is parallel to the sweep (within 15
    degrees) and ``theta`` otherwise. All other pairs get zero.
    """
    pos = np.asarray(crystal.positions, dtype=float)
    d = crystal.spacing_d
    if not _is_planar(pos, d):
        raise PreconditionError("swept_graph needs a planar crystal")
    reach = 3.0 * sweep.waist_sigma * d
    near = np.flatnonzero(np.abs(pos[:, 0] - sweep.xi) <= reach)
    meta = _metadata(sweep)
    meta["line_x"] = sweep.xi
    if len(near) < 2:
        return GraphWeights({}, meta)
    th = theta(omega if omega is not None else 1.0, sweep, trap, d)
    eps = epsilon(sweep.waist_sigma)
    pairs = _neighbor_pairs(pos[:, :2], d)
    chosen = set(near.tolist())
    edges = {}
    cos_tol = math.cos(math.radians(PARALLEL_TOL_DEG))
    for i, j in pairs:
        if i not in chosen or j not in chosen:
            continue
        sep = pos[j, :2] - pos[i, :2]
        along = abs(sep[1]) / np.linalg.norm(sep)
        edges[(i, j)] = eps * th if along >= cos_tol else th
    return GraphWeights(edges, meta)


def _neighbor_pairs(xy: np.ndarray, d: float) -> list:
    if len(xy) == 2:
        cand = {(0, 1)}
    elif len(xy) == 3:
        cand = {(0, 1), (0, 2), (1, 2)}
    else:
        tri = Delaunay(xy)
        cand = set()
        for simplex in tri.simplices:
            a, b, c = sorted(int(v) for v in simplex)
            cand.update({(a, b), (a, c), (b, c)})
    return sorted(p for p in cand if np.linalg.norm(xy[p[0]] - xy[p[1]]) < NEIGHBOR_FACTOR * d)


def row_lines(crystal: IonCrystal, tol: float = 0.2) -> np.ndarray:
    """Crystal-frame x positions half-way between adjacent ion rows (clustered by x)."""
    x = np.sort(np.asarray(crystal.positions)[:, 0])
    d = crystal.spacing_d
    rows = [[x[0]]]
    for v in x[1:]:
        if v - rows[-1][-1] < tol * d:
            rows[-1].append(v)
        else:
            rows.append([v])
    centers = np.array([np.mean(r) for r in rows])
    return 0.5 * (centers[1:] + centers[:-1])
