import dataclasses

import numpy as np
import pytest

from conftest import random_beams, random_scenario
from nfisac import driver, inner
from nfisac.crb import crb_closed_form, crb_joint, fim
from nfisac.geometry import build_channels, build_sensing_model
from nfisac.rates import check_feasibility, compute_rates, received_powers

SIG2 = 3.98e-12


def residual(p, f, w):
    return np.linalg.norm(p - f @ w) ** 2


def test_digital_update_matches_per_column_lstsq():
    rng = np.random.default_rng(0)
    f = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(16, 4)))
    p = random_beams(rng)
    w = driver.digital_update(f, p)
    for col in range(3):
        ref, *_ = np.linalg.lstsq(f, p[:, col], rcond=None)
        assert np.allclose(w[:, col], ref, atol=1e-10)


def test_analog_update_descends_and_stays_unit_modulus():
    rng = np.random.default_rng(1)
    f = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(16, 4)))
    p = random_beams(rng)
    w = driver.digital_update(f, p)
    base = residual(p, f, w)
    f2 = driver.analog_update(f, w, p, sweeps=1)
    assert np.allclose(np.abs(f2), 1.0, atol=1e-12)
    assert residual(p, f2, w) <= base + 1e-12
    f3 = driver.analog_update(f2, w, p, sweeps=2)
    assert residual(p, f3, w) <= residual(p, f2, w) + 1e-12


def test_analog_update_entry_is_optimal_phase():
    """Brute-force phase grid cannot beat the closed-form update of the
    last-visited entry (earlier entries go stale as the sweep proceeds)."""
    rng = np.random.default_rng(2)
    f = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(8, 3)))
    p = random_beams(rng, n=8)
    w = driver.digital_update(f, p)
    f2 = driver.analog_update(f, w, p, sweeps=1)
    base = residual(p, f2, w)
    for phi in np.linspace(0, 2 * np.pi, 73):
        probe = f2.copy()
        probe[7, 2] = np.exp(1j * phi)  # row-major sweep ends here
        assert residual(p, probe, w) >= base - 1e-10


def test_initialize_properties(desk_geom, desk_scenario, desk_channels):
    p, f, w = driver.initialize(desk_geom, desk_scenario, desk_channels)
    assert np.allclose(np.abs(f), 1.0, atol=1e-12)
    assert np.linalg.norm(p) ** 2 == pytest.approx(desk_scenario.power_budget,
                                                   rel=1e-9)
    # the common stream starts with nonnegative secrecy (eve is nulled)
    pd = received_powers(p, desk_channels, SIG2, SIG2)
    rep = compute_rates(pd, np.zeros(2))
    assert rep.r_ec < 1e-9
    assert np.min(rep.r_kc) > 0


def test_initialize_without_common_column(desk_geom, desk_scenario, desk_channels):
    p, f, w = driver.initialize(desk_geom, desk_scenario, desk_channels,
                                include_common=False)
    assert np.allclose(p[:, 0], 0.0)
    assert np.linalg.norm(p) ** 2 == pytest.approx(desk_scenario.power_budget,
                                                   rel=1e-9)


def _thresholded(geom, scen, margin=10.0):
    ch = build_channels(geom, scen)
    sm = build_sensing_model(geom, scen)
    p0, _, _ = driver.initialize(geom, scen, ch)
    cj = crb_joint(fim(p0, sm, scen.noise_eve, scen.slots))
    scen = dataclasses.replace(scen, crb_angle_max=margin * cj[0, 0],
                               crb_range_max=margin * cj[1, 1])
    return scen, ch, sm


def test_penalty_bcd_end_to_end(desk_geom):
    rng = np.random.default_rng(3)
    scen, ch, sm = _thresholded(desk_geom, random_scenario(rng))
    rep = driver.penalty_bcd(desk_geom, scen, ch, sm)
    assert rep.status == "converged"
    state = rep.state
    # factorization residual within the schedule tolerance
    assert residual(state.digital_full, state.analog, state.digital) <= \
        1e-4 * scen.power_budget
    assert np.allclose(np.abs(state.analog), 1.0, atol=1e-12)
    # reported hybrid beams satisfy power and exact CRB limits (1% slack)
    hybrid = state.hybrid
    assert np.linalg.norm(hybrid) ** 2 <= scen.power_budget * 1.0001
    for which, lim in (("angle", scen.crb_angle_max),
                       ("range", scen.crb_range_max)):
        assert crb_closed_form(hybrid, sm, scen.noise_eve, scen.slots,
                               which) <= 1.01 * lim
    fr = check_feasibility(state, scen, ch, sm)
    assert fr.alloc_budget <= 1e-9
    assert fr.alloc_nonneg <= 0
    assert rep.secrecy > 0


def test_penalty_bcd_fully_digital_skips_factorization(desk_geom):
    rng = np.random.default_rng(4)
    scen, ch, sm = _thresholded(desk_geom, random_scenario(rng))
    rep = driver.penalty_bcd(desk_geom, scen, ch, sm,
                             opts=inner.InnerOptions(include_penalty=False))
    assert rep.status == "converged"
    assert rep.outer_iters == 1


def test_penalty_bcd_mismatched_evaluation_channels(desk_geom):
    """Metrics evaluated against a different channel set differ from the
    design-time ones."""
    rng = np.random.default_rng(5)
    scen, ch, sm = _thresholded(desk_geom, random_scenario(rng))
    from nfisac.geometry import build_far_field_channels
    far = build_far_field_channels(desk_geom, scen)
    rep_true = driver.penalty_bcd(desk_geom, scen, far, sm)
    rep_mm = driver.penalty_bcd(desk_geom, scen, far, sm, eval_channels=ch)
    assert rep_mm.secrecy != pytest.approx(rep_true.secrecy, rel=1e-6)


def test_infeasible_thresholds_are_reported(desk_geom):
    """CRB limits far below anything achievable trigger relaxation, and the
    report says so."""
    rng = np.random.default_rng(6)
    scen, ch, sm = _thresholded(desk_geom, random_scenario(rng))
    tight = dataclasses.replace(scen, crb_angle_max=scen.crb_angle_max * 1e-12,
                                crb_range_max=scen.crb_range_max * 1e-12)
    rep = driver.penalty_bcd(desk_geom, tight, ch, sm)
    assert rep.status in ("relaxed", "infeasible", "non_converged")
    if rep.status == "relaxed":
        assert rep.relax_used > 1.0
