"""Harmonic expansion about equilibrium: Hessian, normal modes, thermal occupations."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import kernels
from .crystal import IonCrystal, TrapConfig
from .errors import InstabilityError, PreconditionError

LATERAL = "lateral"
VERTICAL = "vertical"
MIXED = "mixed"


@dataclasses.dataclass(frozen=True)
class PhononModes:
    """Normal modes of a crystal.

    ``mode_matrix[3*i + c, K]`` is the weight of ion ``i``, Cartesian
    component ``c`` in mode ``K``. Columns are orthonormal.
    """

    frequencies: np.ndarray
    mode_matrix: np.ndarray
    polarization_labels: tuple
    mode_lengths: np.ndarray
    zero_modes: np.ndarray
    mass: float
    hbar: float
    omega_xy: float

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def wavevector_index(self) -> np.ndarray:
        return np.arange(self.n_modes)

    def ion_block(self, i: int) -> np.ndarray:
        """Rows of the mode matrix for ion ``i`` (shape ``(3, 3N)``)."""
        return self.mode_matrix[3 * i : 3 * i + 3]

    def mask(self, polarization: str | None = None) -> np.ndarray:
        if polarization is None:
            return np.ones(self.n_modes, dtype=bool)
        return np.array([lab == polarization for lab in self.polarization_labels])

    def to_dict(self) -> dict:
        return {
            "frequencies": self.frequencies.tolist(),
            "mode_matrix": self.mode_matrix.tolist(),
            "polarization_labels": list(self.polarization_labels),
            "mode_lengths": [None if not np.isfinite(a) else a for a in self.mode_lengths],
            "zero_modes": self.zero_modes.tolist(),
            "mass": self.mass,
            "hbar": self.hbar,
            "omega_xy": self.omega_xy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhononModes":
        return cls(
            frequencies=np.asarray(data["frequencies"], dtype=float),
            mode_matrix=np.asarray(data["mode_matrix"], dtype=float),
            polarization_labels=tuple(data["polarization_labels"]),
            mode_lengths=np.array([np.inf if a is None else a for a in data["mode_lengths"]], dtype=float),
            zero_modes=np.asarray(data["zero_modes"], dtype=bool),
            mass=float(data["mass"]),
            hbar=float(data["hbar"]),
            omega_xy=float(data["omega_xy"]),
        )


@dataclasses.dataclass(frozen=True)
class ThermalState:
    temperature: float
    occupations: np.ndarray

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "occupations": [None if not np.isfinite(n) else n for n in self.occupations],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ThermalState":
        occ = np.array([np.inf if n is None else n for n in data["occupations"]], dtype=float)
        return cls(float(data["temperature"]), occ)


def hessian(config: TrapConfig, crystal: IonCrystal, tol: float | None = None) -> np.ndarray:
    """Mass-weighted Hessian (s^-2), ion-major ordering ``3*i + c``."""
    limit = (1e-6 if tol is None else tol / config.force_unit) * config.force_unit
    if not crystal.gradient_norm <= limit:
        raise PreconditionError(
            f"crystal not converged: residual force {crystal.gradient_norm:.3e} N > {limit:.3e} N"
        )
    u = np.asarray(crystal.positions) / config.length_unit
    h = kernels.hessian(u, config.beta**2) * config.omega_xy**2
    return 0.5 * (h + h.T)


def _labels(mode_matrix: np.ndarray, threshold: float = 0.99) -> tuple:
    n3 = mode_matrix.shape[0]
    zw = np.sum(mode_matrix[2:n3:3] ** 2, axis=0)
    labels = []
    for w in zw:
        if w >= threshold:
            labels.append(VERTICAL)
        elif w <= 1 - threshold:
            labels.append(LATERAL)
        else:
            labels.append(MIXED)
    return tuple(labels)


def normal_modes(hess: np.ndarray, config: TrapConfig, zero_tol: float = 1e-6) -> PhononModes:
    """Diagonalize the mass-weighted Hessian.

    Modes with ``omega < zero_tol * omega_xy``, or with eigenvalues inside
    the numerical noise floor ``1e-10 * max|H|``, are flagged as zero modes.
    """
    hess = np.asarray(hess, dtype=float)
    if not np.allclose(hess, hess.T, rtol=0, atol=1e-12 * np.abs(hess).max()):
        raise PreconditionError("Hessian is not symmetric")
    evals, evecs = np.linalg.eigh(hess)
    scale = np.abs(hess).max()
    noise = 1e-10 * scale
    if evals[0] < -noise:
        raise InstabilityError(f"negative curvature {evals[0]:.3e} s^-2: unstable equilibrium")
    omegas = np.sqrt(np.clip(evals, 0.0, None))
    zero = (omegas < zero_tol * config.omega_xy) | (evals < noise)
    # deterministic sign: largest-magnitude entry of each column positive
    pivot = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[pivot, np.arange(evecs.shape[1])])
    evecs = evecs * np.where(signs == 0, 1.0, signs)
    with np.errstate(divide="ignore"):
        lengths = np.where(zero, np.inf, np.sqrt(config.hbar / (config.mass * np.where(zero, 1.0, omegas))))
    return PhononModes(
        frequencies=omegas,
        mode_matrix=evecs,
        polarization_labels=_labels(evecs),
        mode_lengths=lengths,
        zero_modes=zero,
        mass=config.mass,
        hbar=config.hbar,
        omega_xy=config.omega_xy,
    )


def modes_for(config: TrapConfig, crystal: IonCrystal) -> PhononModes:
    return normal_modes(hessian(config, crystal), config)


def bose_einstein(omega, temperature: float, hbar: float, k_B: float) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if temperature < 0:
        raise PreconditionError("temperature must be non-negative")
    if temperature == 0:
        return np.zeros_like(omega)
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / np.expm1(hbar * omega / (k_B * temperature))


def thermal_occupation(modes: PhononModes, temperature: float, k_B: float = 1.380649e-23) -> ThermalState:
    """Bose-Einstein occupations; zero modes get ``inf`` at finite temperature."""
    occ = bose_einstein(modes.frequencies, temperature, modes.hbar, k_B)
    if temperature > 0:
        occ = np.where(modes.zero_modes, np.inf, occ)
    else:
        occ = np.zeros(modes.n_modes)
    return ThermalState(float(temperature), occ)


def fixed_occupation(modes: PhononModes, nbar: float) -> ThermalState:
    """Every mode at the same mean occupation (used for oracle comparisons)."""
    return ThermalState(float("nan"), np.full(modes.n_modes, float(nbar)))


def spectrum_rows(modes: PhononModes):
    """``(index, omega_K / omega_xy, label)`` rows for the spectrum CSV."""
    for k, (w, lab) in enumerate(zip(modes.frequencies, modes.polarization_labels)):
        yield k, w / modes.omega_xy, lab


def spectral_bands(modes: PhononModes) -> dict:
    """Frequency range (rad/s) spanned by each polarization label."""
    out = {}
    for lab in (LATERAL, VERTICAL, MIXED):
        m = modes.mask(lab) & ~modes.zero_modes
        if m.any():
            out[lab] = (float(modes.frequencies[m].min()), float(modes.frequencies[m].max()))
    return out
