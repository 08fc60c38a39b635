import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants, optimize

from crystalgate import cluster, kernels
from crystalgate.crystal import IonCrystal, TrapConfig, _hex_disk
from crystalgate.errors import ConfigError, PreconditionError
from crystalgate.gatesim import LaserParams
from crystalgate.phonons import normal_modes

TWO_PI = 2 * math.pi
LASER = LaserParams(TWO_PI * 4e12, TWO_PI * 200e12, 0.0)
TRAP = TrapConfig(2, TWO_PI * 200e3, TWO_PI * 10e6)


def _sweep(sigma=0.2, **kw):
    base = dict(waist_sigma=sigma, xi=100e-6 * math.cos(0.2), R=100e-6, omega_r=TWO_PI * 10e3, laser=LASER)
    base.update(kw)
    return cluster.SweepConfig(**base)


# ---------------------------------------------------------------- epsilon


def test_epsilon_root_and_limits():
    root = optimize.brentq(cluster.epsilon, 0.5, 2.0)
    assert root == pytest.approx(math.sqrt(11 / 8), rel=1e-12)
    assert cluster.epsilon(1e3) == pytest.approx(-8.0, rel=1e-5)
    assert cluster.epsilon(0.05) < 1e-60


def test_epsilon_high_precision():
    mp.mp.dps = 40
    s = mp.mpf("0.2")
    ref = mp.e ** (-mp.mpf(3) / (8 * s**2)) * (11 - 8 * s**2) / (s**2 + 8)
    assert cluster.epsilon(0.2) == pytest.approx(float(ref), rel=1e-13)
    assert cluster.epsilon(0.2) == pytest.approx(1.126689990587426e-4, rel=1e-12)


def test_epsilon_rejects_bad_sigma():
    with pytest.raises(ConfigError):
        cluster.epsilon(0.0)


# ---------------------------------------------------------------- quadrature route


@settings(max_examples=12, deadline=None)
@given(st.floats(0.15, 2.0))
def test_quadrature_ratio_is_epsilon(sigma):
    cell = cluster.unit_cell()
    slanted = cluster.edge_integral(cell[0], cell[1], sigma)
    parallel = cluster.edge_integral(cell[0], cell[2], sigma)
    assert parallel / slanted == pytest.approx(cluster.epsilon(sigma), rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("sigma", [0.2, 0.5, 1.3])
def test_slanted_closed_form(sigma):
    cell = cluster.unit_cell()
    assert cluster.edge_integral(cell[1], cell[2], sigma) == pytest.approx(cluster.slanted_integral(sigma), rel=1e-10)


def test_pinned_cell_through_phonon_response():
    # stiffly pinned ions: the static phonon response reduces to dipolar coupling
    wp = TWO_PI * 50e6
    trap = TrapConfig(3, wp, wp)
    d = 10e-6
    pos = cluster.unit_cell(d)
    h = kernels.hessian(pos / trap.length_unit, 1.0) * wp**2
    modes = normal_modes(0.5 * (h + h.T), trap)
    for sigma in (0.6, 1.0):
        ints = cluster.cell_integrals_from_modes(modes, pos, sigma, d)
        assert ints[(0, 1)] == pytest.approx(ints[(1, 2)], rel=1e-9)
        assert ints[(0, 2)] / ints[(0, 1)] == pytest.approx(cluster.epsilon(sigma), rel=5e-3)


# ---------------------------------------------------------------- theta


def test_theta_high_precision():
    mp.mp.dps = 40
    sweep = _sweep(velocity_v=1.0)
    omega, d = TWO_PI * 10e6, 10e-6
    s = mp.mpf(sweep.waist_sigma)
    alpha2 = mp.mpf(TRAP.hbar) / (mp.mpf(TRAP.mass) * omega)
    ref = (
        mp.mpf(LASER.rabi) ** 4 / (mp.mpf(omega) ** 2 * mp.mpf(LASER.detuning) ** 2)
        * alpha2**2 / mp.mpf(d) ** 4
        * mp.mpf(constants.e) ** 2 / (mp.mpf(constants.hbar) * mp.mpf(constants.epsilon_0))
        * mp.e ** (-1 / (2 * s**2)) / (mp.sqrt(8 * mp.pi) * s) * (1 / s**2 + mp.mpf(1) / 8)
    )
    assert cluster.theta(omega, sweep, TRAP, d) == pytest.approx(float(ref), rel=1e-12)


def test_theta_scaling_laws():
    omega, d = TWO_PI * 10e6, 10e-6
    s = _sweep(velocity_v=1.0)
    base = cluster.theta(omega, s, TRAP, d)
    assert cluster.theta(2 * omega, s, TRAP, d) == pytest.approx(base / 16, rel=1e-12)
    assert cluster.theta(omega, s, TRAP, 2 * d) == pytest.approx(base / 16, rel=1e-12)
    assert cluster.theta(omega, _sweep(velocity_v=2.0), TRAP, d) == pytest.approx(base / 2, rel=1e-12)
    fast = _sweep(velocity_v=1.0, laser=LaserParams(2 * LASER.rabi, LASER.detuning, 0.0))
    assert cluster.theta(omega, fast, TRAP, d) == pytest.approx(16 * base, rel=1e-12)
    # sigma dependence follows the slanted-side integral
    for sig in (0.3, 0.7):
        ratio = cluster.theta(omega, _sweep(sig, velocity_v=1.0), TRAP, d) / base
        assert ratio == pytest.approx(cluster.slanted_integral(sig) / cluster.slanted_integral(0.2), rel=1e-12)


def test_carrier_theta_is_minus_half():
    d, nu = 10e-6, TWO_PI * 2.2e6
    plain = _sweep(velocity_v=1.0)
    mod = _sweep(velocity_v=1.0, carrier_nu=nu)
    assert cluster.theta(123.0, mod, TRAP, d) == pytest.approx(-0.5 * cluster.theta(nu, plain, TRAP, d), rel=1e-14)


def test_cell_weights():
    d, omega = 10e-6, TWO_PI * 10e6
    s = _sweep(0.5)
    g = cluster.cell_weights(s, TRAP, d, omega)
    th = cluster.theta(omega, s, TRAP, d)
    assert g[(0, 1)] == g[(2, 1)] == pytest.approx(th)
    assert g[(0, 2)] == pytest.approx(cluster.epsilon(0.5) * th)
    assert g.metadata["initial_state"] == "|+...+>"
    with pytest.raises(ConfigError):
        cluster.cell_weights(s, TRAP, d)


def test_graph_weights_normalize_and_round_trip():
    g = cluster.GraphWeights({(3, 1): 0.5, (0, 2): -1.0}, {"k": 1})
    assert g[(1, 3)] == 0.5 and g[(5, 6)] == 0.0
    back = cluster.GraphWeights.from_dict(g.to_dict())
    assert back.edges == g.edges and back.metadata == g.metadata
    with pytest.raises(ConfigError):
        cluster.GraphWeights({(2, 2): 1.0})


def test_sweep_validation_and_round_trip():
    with pytest.raises(ConfigError):
        _sweep(xi=200e-6)
    with pytest.raises(ConfigError):
        _sweep(-1.0)
    s = _sweep(carrier_nu=1e6)
    assert cluster.SweepConfig.from_dict(s.to_dict()) == s


# ---------------------------------------------------------------- kinematics


def test_trajectory_vanishes_at_window_edges():
    s = _sweep()
    t_edge = s.chi / s.omega_r
    dx, dy = cluster.sweep_trajectory(s, np.array([-t_edge, t_edge, 2 * t_edge]))
    np.testing.assert_allclose(dx, 0.0, atol=1e-18)
    np.testing.assert_allclose(dy, 0.0, atol=1e-18)
    # beam stays close to the crystal-frame line x = xi, offset O(chi^4)
    t = np.linspace(-t_edge, t_edge, 101)
    path = cluster.crystal_frame_path(s, t)
    assert np.max(np.abs(path[:, 0] / s.xi - 1)) < s.chi**4
    assert np.ptp(path[:, 1]) == pytest.approx(2 * s.xi * math.tan(s.chi), rel=1e-12)


def test_analytic_velocity_matches_finite_difference():
    s = _sweep()
    t = np.linspace(-0.9, 0.9, 41) * s.chi / s.omega_r
    h = 1e-4 / s.omega_r
    fd = (cluster.crystal_frame_path(s, t + h) - cluster.crystal_frame_path(s, t - h)) / (2 * h)
    np.testing.assert_allclose(cluster.rotating_frame_velocity(s, t), fd, rtol=1e-7, atol=1e-7 * s.speed)


def test_speed_is_nearly_uniform_for_small_chi():
    for chi, bound in [(0.2, 1e-3), (0.1, 1e-4), (0.05, 1e-5)]:
        s = _sweep(xi=100e-6 * math.cos(chi))
        assert s.chi == pytest.approx(chi)
        assert s.kinematic_velocity == pytest.approx(s.xi * s.omega_r * math.tan(chi) / chi)
        assert cluster.tangential_speed_deviation(s) < bound


# ---------------------------------------------------------------- full crystal


def _column_lattice(n=19, d=10e-6):
    pos = _hex_disk(n, d)
    rot = np.stack([-pos[:, 1], pos[:, 0], pos[:, 2]], axis=1)  # rows now run along y
    return IonCrystal(rot, 0.0, 0.0, d)


def test_swept_graph_on_perfect_lattice():
    crystal = _column_lattice()
    d = crystal.spacing_d
    xi = math.sqrt(3) / 4 * d
    s = _sweep(0.2, xi=xi, R=2 * xi)
    omega = TWO_PI * 10e6
    g = cluster.swept_graph(crystal, s, TRAP, omega)
    th = cluster.theta(omega, s, TRAP, d)
    vals = np.array(list(g.edges.values()))
    # columns of 5 and 4 ions either side of the line, 8 zig-zag bonds between
    assert np.sum(np.isclose(vals, th)) == 8
    assert np.sum(np.isclose(vals, cluster.epsilon(0.2) * th)) == 7
    assert len(g) == 15


def test_swept_graph_far_line_is_empty():
    crystal = _column_lattice()
    s = _sweep(0.2, xi=5 * crystal.spacing_d, R=10 * crystal.spacing_d)
    assert len(cluster.swept_graph(crystal, s, TRAP, 1.0)) == 0


def test_swept_graph_needs_planar_crystal():
    crystal = _column_lattice()
    pos = crystal.positions.copy()
    pos[0, 2] = 0.3 * crystal.spacing_d
    with pytest.raises(PreconditionError):
        cluster.swept_graph(IonCrystal(pos, 0.0, 0.0, crystal.spacing_d), _sweep(), TRAP, 1.0)


def test_row_lines_sit_between_columns():
    crystal = _column_lattice()
    lines = cluster.row_lines(crystal)
    step = math.sqrt(3) / 2 * crystal.spacing_d
    np.testing.assert_allclose(np.diff(lines), step, rtol=1e-9)
    assert np.min(np.abs(lines)) == pytest.approx(step / 2, rel=1e-9)
