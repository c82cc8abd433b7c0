import numpy as np
import pytest

from conftest import random_beams
from nfisac.rates import (BeamState, allocate_common, check_feasibility,
                          compute_rates, received_powers)

SIG2 = 3.98e-12


def brute_force_powers(p_mat, channels, noise_user, noise_eve):
    """Per-stream power bookkeeping via explicit loops over users/streams."""
    h = channels.user_channels
    g = channels.eve_channel
    k = h.shape[0]
    s_kc = np.zeros(k)
    s_kp = np.zeros(k)
    i_kp = np.zeros(k)
    i_kc = np.zeros(k)
    for kk in range(k):
        s_kc[kk] = abs(h[kk].conj() @ p_mat[:, 0]) ** 2
        s_kp[kk] = abs(h[kk].conj() @ p_mat[:, kk + 1]) ** 2
        other = 0.0
        for i in range(1, k + 1):
            if i != kk + 1:
                other += abs(h[kk].conj() @ p_mat[:, i]) ** 2
        i_kp[kk] = other + noise_user
        i_kc[kk] = s_kp[kk] + i_kp[kk]
    s_ec = abs(g.conj() @ p_mat[:, 0]) ** 2
    s_ek = np.array([abs(g.conj() @ p_mat[:, i + 1]) ** 2 for i in range(k)])
    i_ek = np.zeros(k)
    for kk in range(k):
        tot = 0.0
        for i in range(1, k + 1):
            if i != kk + 1:
                tot += abs(g.conj() @ p_mat[:, i]) ** 2
        i_ek[kk] = tot + noise_eve
    i_ec = float(np.sum(np.abs(g.conj() @ p_mat[:, 1:]) ** 2)) + noise_eve
    return s_kc, s_kp, i_kp, i_kc, s_ec, s_ek, i_ek, i_ec


def test_received_powers_matches_loops(desk_channels):
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = random_beams(rng)
        pd = received_powers(p, desk_channels, SIG2, SIG2)
        ref = brute_force_powers(p, desk_channels, SIG2, SIG2)
        for got, want in zip((pd.s_kc, pd.s_kp, pd.i_kp, pd.i_kc, pd.s_ec,
                              pd.s_ek, pd.i_ek, pd.i_ec), ref):
            assert np.allclose(got, want, rtol=1e-12)


def test_compute_rates_against_direct_formulas(desk_channels):
    """Fused rate evaluator vs direct per-term log2 expressions, 1000
    random instances (part of acceptance criterion 3 plumbing)."""
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p = random_beams(rng)
        pd = received_powers(p, desk_channels, SIG2, SIG2)
        alloc = rng.uniform(0, 0.2, size=2)
        rep = compute_rates(pd, alloc)
        r_kc = np.log2(1 + pd.s_kc / pd.i_kc)
        r_kp = np.log2(1 + pd.s_kp / pd.i_kp)
        r_ec = np.log2(1 + pd.s_ec / pd.i_ec)
        r_ek = np.log2(1 + pd.s_ek / (pd.i_ek + pd.s_ec))
        assert np.allclose(rep.r_kc, r_kc, atol=1e-12)
        assert np.allclose(rep.r_kp, r_kp, atol=1e-12)
        assert rep.r_ec == pytest.approx(r_ec, abs=1e-12)
        assert np.allclose(rep.r_ek, r_ek, atol=1e-12)
        assert np.allclose(rep.secrecy_total,
                           np.maximum(r_kp - r_ek, 0) + alloc, atol=1e-12)


def test_common_stream_jams_eavesdropper(desk_channels):
    """The common stream's power appears as interference in every private
    eavesdropping ratio."""
    rng = np.random.default_rng(4)
    p = random_beams(rng)
    boosted = p.copy()
    boosted[:, 0] *= 3.0
    pd0 = received_powers(p, desk_channels, SIG2, SIG2)
    pd1 = received_powers(boosted, desk_channels, SIG2, SIG2)
    r0 = compute_rates(pd0, np.zeros(2))
    r1 = compute_rates(pd1, np.zeros(2))
    assert np.all(r1.r_ek <= r0.r_ek + 1e-12)


def test_allocate_common_exhausts_budget_and_levels():
    priv = np.array([1.0, 3.0, 0.5])
    budget = 2.0
    alloc = allocate_common(priv, budget)
    assert alloc.min() >= 0
    assert alloc.sum() == pytest.approx(budget, rel=1e-12)
    # water-filling: the resulting min total should beat any random split
    best = np.min(priv + alloc)
    rng = np.random.default_rng(3)
    for _ in range(200):
        w = rng.uniform(0, 1, size=3)
        w = budget * w / w.sum()
        assert np.min(priv + w) <= best + 1e-9


def test_allocate_common_zero_budget():
    assert np.allclose(allocate_common(np.array([1.0, 2.0]), 0.0), 0.0)


def test_allocate_common_large_budget_even_tail():
    priv = np.array([0.0, 1.0])
    alloc = allocate_common(priv, 10.0)
    # levels equalize then rise together
    assert np.ptp(priv + alloc) < 1e-9
    assert alloc.sum() == pytest.approx(10.0)


def test_check_feasibility_zero_beam(desk_scenario, desk_channels, desk_sensing):
    state = BeamState(digital_full=np.zeros((16, 3), dtype=complex),
                      analog=np.exp(1j * np.zeros((16, 4))),
                      digital=np.zeros((4, 3), dtype=complex),
                      common_alloc=np.zeros(2))
    rep = check_feasibility(state, desk_scenario, desk_channels, desk_sensing)
    assert rep.power <= 0  # no power used
    assert np.isinf(rep.crb_angle) or rep.crb_angle > 0  # CRB blown up


def test_check_feasibility_flags_power_violation(desk_scenario, desk_channels,
                                                 desk_sensing):
    rng = np.random.default_rng(8)
    p = random_beams(rng, power=desk_scenario.power_budget * 4)
    f = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(16, 4)))
    w = np.linalg.pinv(f) @ p
    state = BeamState(digital_full=p, analog=f, digital=w,
                      common_alloc=np.zeros(2))
    rep = check_feasibility(state, desk_scenario, desk_channels, desk_sensing)
    assert rep.power > 0
    assert rep.max_violation() > 0
