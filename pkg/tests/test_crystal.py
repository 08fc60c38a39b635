import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crystalgate import kernels
from crystalgate.crystal import (
    IonCrystal,
    TrapConfig,
    energy_gradient,
    equilibrium,
    minimize,
    potential_energy,
    seed_lattice,
)
from crystalgate.errors import ConfigError, ConvergenceError, DegenerateInputError

W = 2 * math.pi * 200e3


def test_two_ion_separation_matches_force_balance(trap2, crystal2):
    sep = np.linalg.norm(crystal2.positions[1] - crystal2.positions[0])
    # k q^2/s^2 = m w^2 s/2  ->  s^3 = 2 k / (m w^2)
    analytic = (2 * trap2.coulomb_constant / (trap2.mass * trap2.omega_xy**2)) ** (1 / 3)
    assert sep == pytest.approx(analytic, rel=1e-9)
    assert sep == pytest.approx(trap2.two_ion_separation(), rel=1e-12)
    assert np.all(np.abs(crystal2.positions[:, 2]) < 1e-12 * sep)


def test_single_ion_sits_at_origin():
    c = equilibrium(TrapConfig(1, W, 3 * W))
    np.testing.assert_allclose(c.positions, 0.0, atol=1e-20)
    assert c.spacing_d == 0.0


def test_beryllium_length_scale(trap147, crystal147):
    assert trap147.length_unit == pytest.approx(21.3e-6, rel=0.02)
    assert 17e-6 < crystal147.spacing_d < 22e-6


def test_large_crystal_is_converged_planar_minimum(trap147, crystal147):
    assert crystal147.gradient_norm < 1e-9 * trap147.force_unit
    assert np.ptp(crystal147.positions[:, 2]) < 1e-12
    u = crystal147.positions / trap147.length_unit
    evals = np.linalg.eigvalsh(kernels.hessian(u, trap147.beta**2))
    # one rotational zero mode, everything else stable
    assert evals[0] > -1e-8
    assert evals[1] > 1e-3


def test_gradient_consistent_with_energy(trap2):
    pos = np.array([[1e-5, 2e-6, 0.0], [-1.2e-5, 0.0, 1e-7]])
    g = energy_gradient(trap2, pos)
    h = 1e-11
    for i in range(2):
        for c in range(3):
            up, dn = pos.copy(), pos.copy()
            up[i, c] += h
            dn[i, c] -= h
            fd = (potential_energy(trap2, up) - potential_energy(trap2, dn)) / (2 * h)
            assert g[i, c] == pytest.approx(fd, rel=1e-5, abs=1e-30)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * math.pi), st.integers(0, 1000))
def test_energy_invariant_under_rotation_about_z(angle, seed):
    trap = TrapConfig(5, W, 5 * W)
    rng = np.random.default_rng(seed)
    pos = rng.normal(size=(5, 3)) * 2e-5
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert potential_energy(trap, pos @ rot.T) == pytest.approx(potential_energy(trap, pos), rel=1e-10)


def test_collinear_seed_escapes_line():
    trap = TrapConfig(3, W, 50 * W)
    s = trap.two_ion_separation()
    seed = np.array([[-s, 0, 0], [0, 0, 0], [s, 0, 0]])
    c = minimize(trap, seed)
    assert c.gradient_norm < 1e-9 * trap.force_unit


def test_coincident_ions_rejected():
    trap = TrapConfig(2, W, 50 * W)
    with pytest.raises(DegenerateInputError):
        minimize(trap, np.zeros((2, 3)))


def test_nonconvergence_returns_last_iterate():
    trap = TrapConfig(19, W, 50 * W)
    seed = seed_lattice(trap) * 1.7
    with pytest.raises(ConvergenceError) as info:
        minimize(trap, seed, max_iter=1, tol=1e-40)
    assert isinstance(info.value.last, IonCrystal)
    assert info.value.last.positions.shape == (19, 3)


@pytest.mark.parametrize("bad", [{"n_ions": 0}, {"omega_xy": -1.0}, {"omega_z": float("nan")}, {"n_ions": 2.5}])
def test_invalid_config(bad):
    kw = {"n_ions": 2, "omega_xy": W, "omega_z": 10 * W}
    kw.update(bad)
    with pytest.raises(ConfigError):
        TrapConfig(**kw)


def test_seed_size_mismatch():
    with pytest.raises(ConfigError):
        minimize(TrapConfig(3, W, 50 * W), np.zeros((2, 3)) + np.arange(2)[:, None])


def test_round_trip(trap2, crystal2):
    assert TrapConfig.from_dict(trap2.to_dict()) == trap2
    back = IonCrystal.from_dict(crystal2.to_dict())
    np.testing.assert_array_equal(back.positions, crystal2.positions)
    assert back.energy == crystal2.energy
    with pytest.raises(ConfigError):
        TrapConfig.from_dict({**trap2.to_dict(), "colour": 1})


def test_round_trap_gives_three_dimensional_crystal():
    trap = TrapConfig(30, W, 1.2 * W)
    c = equilibrium(trap)
    assert np.ptp(c.positions[:, 2]) > 0.3 * c.spacing_d
    assert c.gradient_norm < 1e-9 * trap.force_unit


def test_deterministic():
    trap = TrapConfig(19, W, 50 * W)
    a, b = equilibrium(trap), equilibrium(trap)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_center_pair_are_neighbours(crystal147):
    i, j = crystal147.center_pair()
    d = np.linalg.norm(crystal147.positions[i] - crystal147.positions[j])
    assert d < 1.2 * crystal147.spacing_d
