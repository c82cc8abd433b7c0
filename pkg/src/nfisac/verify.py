"""Built-in numerical self-checks, exposed through the `verify` subcommand.

Each check recomputes a quantity through an independent route (finite
differences, explicit loops, full matrix inverses) and compares against the
production implementation on a fixed small instance.
"""

from __future__ import annotations

import numpy as np

from . import inner
from .crb import crb_closed_form, crb_joint, fim, hermitian_split
from .geometry import (PolarPoint, Scenario, SystemGeometry, build_channels,
                       build_sensing_model, rx_array_response,
                       tx_array_response)
from .rates import compute_rates, received_powers


def _fixture():
    geom = SystemGeometry.half_wavelength(16, 8, 4, 30e9)
    sig2 = 3.98e-12
    scen = Scenario(
        users=(PolarPoint(12.0, 0.3), PolarPoint(15.0, -0.5)),
        target=PolarPoint(10.0, 0.6), noise_user=sig2, noise_eve=sig2,
        power_budget=0.1, crb_angle_max=1.0, crb_range_max=1.0, slots=64)
    channels = build_channels(geom, scen)
    sensing = build_sensing_model(geom, scen)
    rng = np.random.default_rng(7)
    p = rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3))
    p *= np.sqrt(scen.power_budget) / np.linalg.norm(p)
    return geom, scen, channels, sensing, p


def check_derivatives() -> float:
    """Analytic steering derivatives vs central finite differences."""
    from .geometry import _steering_and_derivatives

    geom, scen, _, _, _ = _fixture()
    t = scen.target
    a, b, da_dth, da_dr, db_dth, db_dr = _steering_and_derivatives(geom, t)
    worst = 0.0
    for which, step, exact in (
        ("angle", 1e-6, (da_dth, db_dth)),
        ("range", 1e-4, (da_dr, db_dr)),
    ):
        if which == "angle":
            hi = PolarPoint(t.range_m, t.angle_rad + step)
            lo = PolarPoint(t.range_m, t.angle_rad - step)
        else:
            hi = PolarPoint(t.range_m + step, t.angle_rad)
            lo = PolarPoint(t.range_m - step, t.angle_rad)
        for resp, ex in zip((tx_array_response, rx_array_response), exact):
            fd = (resp(geom, hi) - resp(geom, lo)) / (2 * step)
            worst = max(worst, float(np.max(np.abs(ex - fd)) / np.max(np.abs(ex))))
    return worst


def check_crb_routes() -> float:
    """Closed-form per-parameter CRB vs full Fisher-matrix inversion with the
    other parameter's derivative zeroed (decoupled-case equivalence)."""
    import dataclasses

    geom, scen, _, sensing, p = _fixture()
    worst = 0.0
    zero = np.zeros_like(sensing.g_dtheta)
    for i, which in enumerate(("angle", "range")):
        sens_dec = dataclasses.replace(
            sensing,
            g_dtheta=sensing.g_dtheta if which == "angle" else zero,
            g_drange=sensing.g_drange if which == "range" else zero)
        j4 = fim(p, sens_dec, scen.noise_eve, scen.slots).j
        keep = [i, 2, 3]  # drop the zeroed parameter's row/column
        oracle = float(np.linalg.inv(j4[np.ix_(keep, keep)])[0, 0])
        cf = crb_closed_form(p, sensing, scen.noise_eve, scen.slots, which)
        worst = max(worst, abs(cf - oracle) / oracle)
    return worst


def check_rate_identity() -> float:
    """tau - WMSE at the optimal equalizer/weight equals the rate."""
    geom, scen, channels, _, p = _fixture()
    pd = received_powers(p, channels, scen.noise_user, scen.noise_eve)
    rep = compute_rates(pd, np.zeros(2))
    eq_c, eq_p, w_c, w_p = inner.update_wmmse(p, channels, scen.noise_user)
    h = channels.user_channels
    worst = 0.0
    for k in range(2):
        t_all = np.sum(np.abs(h[k].conj() @ p) ** 2) + scen.noise_user
        d = (abs(eq_c[k]) ** 2 * t_all
             - 2 * np.real(eq_c[k] * (h[k].conj() @ p[:, 0])) + 1)
        worst = max(worst, abs(inner.TAU - (w_c[k] * d - np.log2(w_c[k])) - rep.r_kc[k]))
    return worst


def check_transform_tightness() -> float:
    """Quadratic-transform surrogate equals -(eavesdropping rate) at its optimum."""
    geom, scen, channels, _, p = _fixture()
    pd = received_powers(p, channels, scen.noise_user, scen.noise_eve)
    rep = compute_rates(pd, np.zeros(2))
    x_ec, x_ek = inner.update_quadratic_aux(p, channels, scen.noise_eve)
    t0 = inner.eve_decoupling_matrix(p, channels, scen.noise_eve, 0)
    worst = abs(inner.eve_surrogate_value(x_ec, t0, p, channels, scen.noise_eve)
                + rep.r_ec)
    for k in range(2):
        tk = inner.eve_decoupling_matrix(p, channels, scen.noise_eve, k + 1)
        worst = max(worst, abs(
            inner.eve_surrogate_value(x_ek[k], tk, p, channels, scen.noise_eve)
            + rep.r_ek[k]))
    return float(worst)


def check_split_reconstruction() -> float:
    """Hermitian difference-of-PSD split reproduces Re Tr(A X) exactly."""
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        x_half = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
        x = x_half @ x_half.conj().T
        split = hermitian_split(a)
        direct = float(np.real(np.trace(a @ x)))
        via = float(np.real(np.trace(split.m_plus @ x)))
        via -= float(np.real(np.trace(split.m_minus @ x)))
        worst = max(worst, abs(direct - via) / max(abs(direct), 1.0))
    return worst


CHECKS = (
    ("steering-derivatives-vs-finite-differences", check_derivatives, 1e-5),
    ("crb-closed-form-vs-fisher-inverse", check_crb_routes, 1e-8),
    ("rate-vs-wmse-identity", check_rate_identity, 1e-9),
    ("eavesdropper-transform-tightness", check_transform_tightness, 1e-9),
    ("psd-split-reconstruction", check_split_reconstruction, 1e-10),
)


def run_all():
    """Run every check; returns [(name, error, tolerance, passed)]."""
    results = []
    for name, fn, tol in CHECKS:
        err = fn()
        results.append((name, err, tol, err <= tol))
    return results
