import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crystalgate import network as nw
from crystalgate.errors import ConfigError

etas = st.floats(0.01, 1.0)


def _cfg(eta=1e-3, eta_prime=0.1, **kw):
    return nw.ProtocolConfig(eta, eta_prime, **kw)


def test_analytic_headline():
    c = _cfg()
    s = nw.two_click_analytic(c)
    assert s.success_probability == pytest.approx(1e-4)
    assert s.expected_time == pytest.approx(2 / (c.gamma_rad * 1e-4))
    assert s.expected_time == pytest.approx(3.183e-4, rel=1e-3)
    assert s.fidelity == 1.0


@settings(max_examples=25, deadline=None)
@given(etas, etas)
def test_density_model_matches_exact(a, b):
    eta, eta_p = min(a, b), max(a, b)
    c = _cfg(eta, eta_p)
    dm = nw.two_click_density_model(c)
    ex = nw.two_click_exact(c)
    assert dm.success_probability == pytest.approx(eta * eta_p / 2, rel=1e-10)
    assert dm.expected_time == pytest.approx(ex.expected_time, rel=1e-10)
    assert dm.fidelity == pytest.approx(1.0, abs=1e-12)


def test_first_round_herald_probability_from_density_model():
    for eta, eta_p in [(0.1, 0.3), (0.5, 0.5), (1.0, 1.0)]:
        res = nw._round(np.full((4, 4), 0.25), eta, eta_p)
        p = sum(np.trace(res[o]).real for o in (nw.PLUS, nw.MINUS))
        assert p == pytest.approx(nw.first_round_herald_probability(eta, eta_p), rel=1e-12)
        total = sum(np.trace(r).real for r in res.values())
        assert total == pytest.approx(1.0, rel=1e-12)


def test_perfect_collection_succeeds_half_the_time():
    assert nw.two_click_density_model(_cfg(1.0, 1.0)).success_probability == pytest.approx(0.5)


def test_no_eleven_in_heralded_states():
    for (o1, o2), rho in nw.heralded_states(0.3, 0.8).items():
        assert abs(rho[3, 3]) < 1e-15 and abs(rho[0, 0]) < 1e-15
    # after the first herald |11> survives: two photons bunch onto one detector
    for eta, eta_p in [(1.0, 1.0), (0.2, 0.6), (1e-3, 0.1)]:
        expect = 0.25 * (eta + eta_p - eta * eta_p) / nw.first_round_herald_probability(eta, eta_p)
        assert nw.eleven_population_after_first_click(eta, eta_p) == pytest.approx(expect, rel=1e-10)


def test_monte_carlo_agrees_with_exact_model():
    c = _cfg()
    mc = nw.two_click_monte_carlo(c, 1_000_000)
    exact = nw.two_click_exact(c)
    assert abs(mc.success_probability - exact.success_probability) < 5 * mc.std_error
    n_success = mc.success_probability * mc.n_trials
    assert mc.expected_time == pytest.approx(exact.expected_time, rel=5 / math.sqrt(n_success))
    assert mc.fidelity == pytest.approx(1.0)


def test_monte_carlo_deterministic():
    c = _cfg(0.2, 0.4, rng_seed=7)
    a = nw.two_click_monte_carlo(c, 20_000)
    b = nw.two_click_monte_carlo(c, 20_000)
    assert a == b
    other = nw.two_click_monte_carlo(c.replace(rng_seed=8), 20_000)
    assert other.success_probability != a.success_probability


def test_monte_carlo_rejects_zero_trials():
    with pytest.raises(ConfigError):
        nw.two_click_monte_carlo(_cfg(), 0)


def test_one_click_figures():
    c = _cfg(gamma_rad=1e8)
    s = nw.one_click_comparison(c, 1e-3)
    assert s.expected_time == pytest.approx(1 / (1e8 * c.eta * 1e-3))
    assert s.fidelity == pytest.approx(1 - 1e-3)
    with pytest.raises(ConfigError):
        nw.one_click_comparison(c, 0.0)


@settings(max_examples=50, deadline=None)
@given(etas, etas, st.floats(1e-6, 0.5))
def test_two_click_wins_iff_eta_prime_exceeds_twice_target(a, b, p):
    eta, eta_p = min(a, b), max(a, b)
    c = _cfg(eta, eta_p, target_infidelity=p)
    scheme, t = nw.time_to_target(c)
    if eta_p > 2 * p * (1 + 1e-9):
        assert scheme == "two-click"
    elif eta_p < 2 * p * (1 - 1e-9):
        assert scheme == "one-click"
    assert t == pytest.approx(min(nw.two_click_analytic(c).expected_time, 1 / (c.gamma_rad * eta * p)))


def test_time_to_target_reference_values():
    c = _cfg(target_infidelity=1e-4)
    scheme, t = nw.time_to_target(c)
    assert scheme == "two-click" and t == pytest.approx(3.183e-4, rel=1e-3)
    one = nw.one_click_comparison(c, 1e-4).expected_time
    assert one == pytest.approx(1 / (c.gamma_rad * 1e-7), rel=1e-12)
    assert nw.time_to_target(c.replace(eta_prime=1e-3))[1] == pytest.approx(3.183e-2, rel=1e-3)
    rows = nw.time_vs_target(c, [1e-4, 1e-2])
    assert rows[0][1] == rows[1][1] and rows[0][2] > rows[1][2]


def test_config_validation_and_round_trip():
    for bad in [dict(eta=0.0), dict(eta=0.6, eta_prime=0.5), dict(p_excite=1.0), dict(gamma_rad=-1.0)]:
        args = dict(eta=0.1, eta_prime=0.5)
        args.update(bad)
        with pytest.raises(ConfigError):
            nw.ProtocolConfig(**args)
    c = _cfg(rng_seed=3)
    assert nw.ProtocolConfig.from_dict(c.to_dict()) == c
    s = nw.two_click_exact(c)
    assert nw.ProtocolStats.from_dict(s.to_dict()) == s
