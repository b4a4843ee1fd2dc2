import math

import numpy as np
import pytest

from fdmimo.channel import (build_profile, dump_realization, load_realization_arrays,
                            sample_channels, substream)
from fdmimo.config import Geometry, place_users
from fdmimo.errors import ContractError

from conftest import flat_profile, small_config


def test_single_user_profile_matches_pathloss():
    c = small_config(n_cells=1, k_dl=1, k_ul=0, shadow_db=0.0)
    geo = Geometry(np.zeros((1, 2)), np.array([[[1000.0, 0.0]]]), np.zeros((1, 0, 2)))
    p = build_profile(c, geo, 0)
    assert math.isclose(p.d_dl[0, 0, 0], 1000.0 ** -3.8, rel_tol=1e-12)


def test_si_gains_do_not_depend_on_radius():
    a = small_config(cell_radius_m=500.0)
    b = a.with_(cell_radius_m=2000.0)
    pa = build_profile(a, place_users(a, 1), 1)
    pb = build_profile(b, place_users(b, 1), 1)
    assert np.array_equal(pa.d_si, pb.d_si)
    assert not np.array_equal(pa.d_dl, pb.d_dl)


def test_si_gains_symmetric_under_array_geometry():
    c = small_config(m_tx=6, m_rx=6)
    si = build_profile(c, place_users(c, 0), 0).d_si
    assert np.allclose(si, si.T)
    assert np.all(si > 0)
    # nearest pair is straight across the gap
    assert math.isclose(si[0, 0], (c.wavelength_m / (4 * math.pi * c.si_array_gap_m)) ** 2)


def test_si_row_sums_match_matrix():
    c = small_config(m_tx=5, m_rx=9)
    si = build_profile(c, place_users(c, 0), 0).si
    assert np.allclose(si.row_sums, si.matrix().sum(axis=1))
    assert math.isclose(si.total, si.matrix().sum())


def test_profile_deterministic_and_positive():
    c = small_config(n_cells=3)
    g = place_users(c, 9)
    a, b = build_profile(c, g, 9), build_profile(c, g, 9)
    for name in ("d_dl", "d_ul", "d_bs", "d_ue"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert np.all(a.d_dl > 0) and np.all(a.d_ul > 0) and np.all(a.d_ue > 0)
    assert np.all(a.d_bs[~np.eye(3, dtype=bool)] > 0)
    a.check(c)
    with pytest.raises(ContractError):
        a.check(c.with_(k_dl=3))


def test_unit_gain_coefficient_moments():
    p = flat_profile()
    n = 100_000
    x = np.array([sample_channels(p, 11, t).h_dl[0, 0, 0, 0] for t in range(n)])
    se = 1 / math.sqrt(n)
    assert abs(x.mean().real) < 3 * se * math.sqrt(0.5)
    assert abs(x.mean().imag) < 3 * se * math.sqrt(0.5)
    p2 = np.abs(x) ** 2
    assert abs(p2.mean() - 1.0) < 3 * p2.std() / math.sqrt(n)


def test_composed_gain_second_moment():
    c = small_config(n_cells=2, k_dl=2, k_ul=1, m_tx=4, m_rx=4)
    p = build_profile(c, place_users(c, 2), 2)
    trials = 20_000
    g = np.stack([sample_channels(p, 3, t).g_dl for t in range(trials)])  # (T, N, N, K, M)
    power = np.abs(g) ** 2 / p.d_dl[None, ..., None]
    est = power.mean(axis=0)
    se = power.std(axis=0) / math.sqrt(trials)
    assert np.all(np.abs(est - 1.0) < 4 * se)


def test_composition_is_exact():
    c = small_config()
    p = build_profile(c, place_users(c, 4), 4)
    r = sample_channels(p, 4, 0)
    assert np.array_equal(r.g_dl, r.h_dl * np.sqrt(p.d_dl)[..., None])
    assert np.array_equal(r.g_ul, r.h_ul * np.sqrt(p.d_ul)[..., None])
    assert np.array_equal(r.g_ue, r.h_ue * np.sqrt(p.d_ue))
    assert np.array_equal(r.g_bs[0, 0], r.h_bs[0, 0] * np.sqrt(p.d_si))
    assert np.array_equal(r.g_bs[0, 1], r.h_bs[0, 1] * math.sqrt(p.d_bs[0, 1]))


def test_realizations_deterministic_per_trial():
    p = flat_profile(n=2, k_dl=2, k_ul=2, m_rx=3, m_tx=3)
    a, b = sample_channels(p, 5, 3), sample_channels(p, 5, 3)
    assert np.array_equal(a.h_bs, b.h_bs)
    assert not np.array_equal(a.h_bs, sample_channels(p, 5, 4).h_bs)


def test_substreams_independent_of_trial_count():
    first = substream(1, 2, 0).standard_normal(4)
    for t in range(1, 5):
        substream(1, 2, t).standard_normal(4)
    assert np.array_equal(first, substream(1, 2, 0).standard_normal(4))


def test_distinct_coefficients_uncorrelated():
    p = flat_profile(m_tx=2)
    n = 20_000
    h = np.array([sample_channels(p, 8, t).h_dl[0, 0, 0] for t in range(n)])
    corr = np.mean(h[:, 0] * h[:, 1].conj()) / np.sqrt(
        np.mean(np.abs(h[:, 0]) ** 2) * np.mean(np.abs(h[:, 1]) ** 2))
    assert abs(corr) < 3 / math.sqrt(n)


def test_dump_round_trip():
    p = flat_profile(n=2, k_dl=2, k_ul=1, m_rx=3, m_tx=2)
    r = sample_channels(p, 0, 0)
    arrays = load_realization_arrays(dump_realization(r))
    for got, want in zip(arrays, (r.h_dl, r.h_ul, r.h_bs, r.h_ue)):
        assert got.shape == want.shape
        assert np.allclose(got, want.astype(np.complex64))
    with pytest.raises(ContractError):
        load_realization_arrays(b"XXXX")
