import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdmimo.config import (SystemConfig, bs_layout, load_config, pathloss_gain, place_users,
                           shadowing)
from fdmimo.errors import DomainError, ValidationError

from conftest import small_config

DOC = {"n_cells": 3, "m_tx": 64, "m_rx": 64, "k_dl": 5, "k_ul": 5, "p_ref_dbm": 40,
       "cell_radius_m": 2000}


def test_load_fills_defaults():
    c = load_config(json.dumps(DOC))
    assert c.alpha_db == -100.0 and c.beta_db == -100.0
    assert c.pathloss_exp == 3.8 and c.shadow_db == 8.0
    assert c.carrier_hz == 2.4e9 and c.boundary_fraction == 0.05
    assert (c.tau_si, c.tau_uu, c.tau_ud) == (64, 5, 5)


def test_missing_mandatory_field_is_named():
    doc = dict(DOC)
    del doc["m_tx"]
    with pytest.raises(ValidationError, match="m_tx missing"):
        load_config(json.dumps(doc))


@pytest.mark.parametrize("change, fragment", [
    ({"tau_uu": 3}, "tau_uu >= k_ul"),
    ({"tau_si": 10}, "tau_si >= m_tx"),
    ({"tau_ud": 1}, "tau_ud >= k_dl"),
    ({"n_cells": 0}, "n_cells"),
    ({"k_ul": -1}, "k_ul"),
    ({"boundary_fraction": 0.0}, "boundary_fraction"),
    ({"cell_radius_m": 0}, "cell_radius_m"),
    ({"total_symbols": 74}, "total_symbols > pilot overhead"),
    ({"scenario": "mesh"}, "scenario"),
    ({"m_rx": 2.5}, "integer"),
    ({"colour": 1}, "unknown config field"),
])
def test_invariant_violations_are_named(change, fragment):
    with pytest.raises(ValidationError, match=fragment):
        load_config(json.dumps({**DOC, **change}))


def test_bad_json():
    with pytest.raises(ValidationError):
        load_config("{n_cells: 3")
    with pytest.raises(ValidationError):
        load_config("[1, 2]")


def test_with_keeps_tied_pilot_lengths_in_step():
    c = small_config()
    assert c.with_(m_tx=16).tau_si == 16
    assert c.with_(k_ul=4).tau_uu == 4
    fixed = small_config(tau_si=20)
    assert fixed.with_(m_tx=16).tau_si == 20


def test_overheads():
    c = small_config(m_tx=64, k_ul=5, k_dl=5)
    assert c.overhead("nSPT") == 74
    assert c.overhead("SPT") == 69
    assert c.overhead("HD") == 10
    with pytest.raises(ValidationError):
        c.overhead("TDD")


def test_power_scaling():
    c = small_config(m_tx=64, p_ref_dbm=40.0)
    assert math.isclose(c.p_dl_mw, 1e4 / 8)
    assert math.isclose(small_config(power_scaling=False).p_dl_mw, 1e4)


def test_serving_distances_lie_in_boundary_annulus():
    c = small_config(n_cells=3, k_dl=5, k_ul=5, cell_radius_m=2000.0)
    g = place_users(c, 7)
    for i in range(3):
        for d in (g.dist_dl[i, i], g.dist_ul[i, i]):
            assert np.all((d >= 1900.0) & (d <= 2000.0))


def test_placement_bracket_over_many_seeds():
    c = small_config(n_cells=1, k_dl=1, k_ul=1, cell_radius_m=1000.0)
    d = np.array([[g.dist_dl[0, 0, 0], g.dist_ul[0, 0, 0]]
                  for g in (place_users(c, s) for s in range(10_000))]).ravel()
    assert d.min() >= 950.0 and d.max() <= 1000.0
    # uniform radius: 2e4 samples reach within 0.1 m of both edges
    assert d.min() < 950.1 and d.max() > 999.9


def test_empty_downlink():
    g = place_users(small_config(k_dl=0), 1)
    assert g.dl_user_positions.shape == (2, 0, 2)
    assert g.dist_dl.size == 0


def test_placement_deterministic():
    c = small_config()
    a, b = place_users(c, 42), place_users(c, 42)
    assert np.array_equal(a.dl_user_positions, b.dl_user_positions)
    assert np.array_equal(a.ul_user_positions, b.ul_user_positions)
    assert not np.array_equal(a.dl_user_positions, place_users(c, 43).dl_user_positions)


def test_layout_inter_site_distance():
    for n in (2, 3, 4, 7):
        bs = bs_layout(n, 500.0)
        adjacent = np.linalg.norm(bs - np.roll(bs, 1, axis=0), axis=1)
        assert np.allclose(adjacent, 1000.0)


def test_geometry_distances_symmetric_and_positive():
    g = place_users(small_config(n_cells=3), 3)
    assert np.allclose(g.dist_bs, g.dist_bs.T)
    assert np.all(g.dist_bs[~np.eye(3, dtype=bool)] > 0)
    assert np.all(g.dist_dl > 0) and np.all(g.dist_ul > 0) and np.all(g.dist_ue > 0)


def test_user_link_gain_example():
    c = small_config()
    # 1000^-3.8 = 10^-11.4
    assert math.isclose(pathloss_gain(1000.0, 1.0, "user-link", c), 10 ** -11.4, rel_tol=1e-12)
    assert math.isclose(10 ** -11.4, 3.98e-12, rel_tol=1e-3)


def test_self_interference_gain_example():
    c = small_config()
    assert math.isclose(c.wavelength_m, 0.125)
    expected = (0.125 / (4 * math.pi * 0.5)) ** 2
    assert math.isclose(pathloss_gain(0.5, 123.0, "self-interference", c), expected)
    assert math.isclose(expected, 3.96e-4, rel_tol=1e-3)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_nonpositive_distance_is_domain_error(d):
    with pytest.raises(DomainError):
        pathloss_gain(d, 1.0, "user-link", small_config())


def test_unknown_link_kind():
    with pytest.raises(ValidationError):
        pathloss_gain(1.0, 1.0, "satellite", small_config())


@settings(max_examples=200, deadline=None)
@given(d=st.floats(0.01, 1e5), factor=st.floats(1.001, 10.0), z=st.floats(0.01, 100.0),
       kind=st.sampled_from(["user-link", "bs-bs", "self-interference"]))
def test_gain_strictly_decreasing_in_distance(d, factor, z, kind):
    c = small_config()
    assert pathloss_gain(d * factor, z, kind, c) < pathloss_gain(d, z, kind, c)


def test_shadowing_spread():
    n = 100_000
    z = shadowing(np.random.default_rng(5), n, 8.0)
    sd = np.std(10 * np.log10(z), ddof=1)
    se = 8.0 / math.sqrt(2 * (n - 1))
    assert abs(sd - 8.0) < 3 * se
    # in dB-decades: log10 z has standard deviation 0.8
    assert abs(np.std(np.log10(z), ddof=1) - 0.8) < 3 * se / 10
