import numpy as np
import pytest

from nfisac.geometry import (SPEED_OF_LIGHT, DomainError, PolarPoint,
                             SystemGeometry, build_channels,
                             build_far_field_channels, build_sensing_model,
                             complex_gain, far_field_response,
                             roundtrip_gain, rx_array_response,
                             tx_array_response)


def scalar_tx_phase(geom, p, n):
    """Per-element recomputation of the transmit response (1-based n)."""
    k = 2 * np.pi / geom.wavelength
    nd = n * geom.spacing
    s, c = np.sin(p.angle_rad), np.cos(p.angle_rad)
    return np.exp(-1j * k * (-nd * s + nd**2 * c**2 / (2 * p.range_m)))


def scalar_rx_phase(geom, p, m):
    k = 2 * np.pi / geom.wavelength
    md = m * geom.spacing
    s, c = np.sin(p.angle_rad), np.cos(p.angle_rad)
    return np.exp(-1j * k * (md * s + md**2 * c**2 / (2 * p.range_m)))


def test_tx_response_matches_scalar_loop(desk_geom):
    p = PolarPoint(11.0, 0.4)
    a = tx_array_response(desk_geom, p)
    for n in range(1, desk_geom.n_tx + 1):
        assert a[n - 1] == pytest.approx(scalar_tx_phase(desk_geom, p, n), abs=1e-14)


def test_rx_response_matches_scalar_loop(desk_geom):
    p = PolarPoint(13.0, -0.7)
    b = rx_array_response(desk_geom, p)
    for m in range(1, desk_geom.n_rx + 1):
        assert b[m - 1] == pytest.approx(scalar_rx_phase(desk_geom, p, m), abs=1e-14)


def test_responses_are_unit_modulus(desk_geom):
    p = PolarPoint(10.0, 0.6)
    for v in (tx_array_response(desk_geom, p), rx_array_response(desk_geom, p),
              far_field_response(desk_geom, 0.6)):
        assert np.allclose(np.abs(v), 1.0, atol=1e-14)


def test_far_field_is_large_range_limit(desk_geom):
    """The spherical response converges to the plane-wave one as r grows,
    up to conjugate sign convention on the linear term."""
    far = far_field_response(desk_geom, 0.5)
    near = tx_array_response(desk_geom, PolarPoint(1e7, 0.5))
    # linear phase terms: far-field uses +nd sin(theta), near-field -(-nd sin)
    assert np.max(np.abs(near - far)) < 1e-5


def test_complex_gain_magnitude_and_phase(desk_geom):
    r = 10.0
    g = complex_gain(desk_geom, r)
    lam = desk_geom.wavelength
    assert abs(g) == pytest.approx(
        SPEED_OF_LIGHT / (4 * np.pi * desk_geom.carrier_hz * r), rel=1e-12)
    assert np.angle(g) == pytest.approx(np.angle(np.exp(-2j * np.pi * r / lam)), abs=1e-9)


def test_roundtrip_gain_is_squared_one_way(desk_geom):
    r = 12.5
    assert roundtrip_gain(desk_geom, r) == pytest.approx(complex_gain(desk_geom, r) ** 2,
                                                         rel=1e-12)


def test_gain_decays_inverse_range(desk_geom):
    assert abs(complex_gain(desk_geom, 20.0)) == pytest.approx(
        0.5 * abs(complex_gain(desk_geom, 10.0)), rel=1e-12)


def test_build_channels_shapes_and_gain(desk_geom, desk_scenario, desk_channels):
    k, n = desk_scenario.n_users, desk_geom.n_tx
    assert desk_channels.user_channels.shape == (k, n)
    assert desk_channels.eve_channel.shape == (n,)
    assert desk_channels.eve_gain == pytest.approx(
        complex_gain(desk_geom, desk_scenario.target.range_m), rel=1e-12)
    # each row is gain * unit-modulus response
    assert np.allclose(np.abs(desk_channels.eve_channel),
                       abs(desk_channels.eve_gain), atol=1e-18)


def test_far_field_channels_keep_true_path_gains(desk_geom, desk_scenario):
    near = build_channels(desk_geom, desk_scenario)
    far = build_far_field_channels(desk_geom, desk_scenario)
    assert np.allclose(np.abs(far.user_channels), np.abs(near.user_channels))
    assert far.eve_gain == near.eve_gain


def test_sensing_model_outer_product_structure(desk_geom, desk_scenario, desk_sensing):
    a = tx_array_response(desk_geom, desk_scenario.target)
    b = rx_array_response(desk_geom, desk_scenario.target)
    assert np.allclose(desk_sensing.g_tilde, np.outer(b, a), atol=1e-14)
    assert desk_sensing.gain == pytest.approx(
        roundtrip_gain(desk_geom, desk_scenario.target.range_m), rel=1e-12)


@pytest.mark.parametrize("which,step,tol", [("angle", 1e-6, 1e-5),
                                            ("range", 1e-4, 1e-5)])
def test_echo_derivatives_match_finite_differences(desk_geom, which, step, tol):
    """Analytic angle/range derivatives of the echo matrix vs central FD,
    20 random targets (acceptance criterion 5)."""
    from nfisac.geometry import Scenario

    rng = np.random.default_rng(3)
    for _ in range(20):
        r = float(rng.uniform(5, 25))
        th = float(rng.uniform(-1.2, 1.2))
        users = (PolarPoint(10.0, 0.1),)

        def model(rr, tt):
            scen = Scenario(users=users, target=PolarPoint(rr, tt),
                            noise_user=1e-12, noise_eve=1e-12, power_budget=0.1,
                            crb_angle_max=1.0, crb_range_max=1.0, slots=1)
            return build_sensing_model(desk_geom, scen)

        sm = model(r, th)
        if which == "angle":
            hi, lo = model(r, th + step), model(r, th - step)
            exact = sm.g_dtheta
        else:
            hi, lo = model(r + step, th), model(r - step, th)
            exact = sm.g_drange
        fd = (hi.g_tilde - lo.g_tilde) / (2 * step)
        err = np.linalg.norm(exact - fd) / np.linalg.norm(exact)
        assert err < tol


def test_domain_errors(desk_geom):
    with pytest.raises(DomainError):
        PolarPoint(-1.0, 0.0)
    with pytest.raises(DomainError):
        SystemGeometry.half_wavelength(0, 8, 4, 30e9)


def test_scenario_invariants():
    with pytest.raises(DomainError):
        from nfisac.geometry import Scenario
        Scenario(users=(), target=PolarPoint(10, 0), noise_user=1e-12,
                 noise_eve=1e-12, power_budget=0.1, crb_angle_max=1.0,
                 crb_range_max=1.0, slots=4)
