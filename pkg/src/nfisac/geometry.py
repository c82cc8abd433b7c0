"""Array geometry, spherical-wavefront channels, and the sensing matrices.

Transmit antennas sit at (0, n*d) for n = 1..N, receive antennas at
(0, -m*d) for m = 1..M.  All steering vectors use the second-order
(Fresnel) expansion of the exact propagation distance, so every element
is a pure phase term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8


class DomainError(ValueError):
    """Raised for physically invalid inputs (e.g. non-positive range)."""


@dataclass(frozen=True)
class SystemGeometry:
    """Physical description of the transceiver array."""

    n_tx: int
    n_rx: int
    n_rf: int
    spacing: float
    carrier_hz: float

    def __post_init__(self):
        if min(self.n_tx, self.n_rx, self.n_rf) < 1:
            raise DomainError("antenna and RF-chain counts must be >= 1")
        if self.n_rf > self.n_tx:
            raise DomainError("n_rf must not exceed n_tx")
        if self.spacing <= 0:
            raise DomainError("spacing must be positive")
        if self.carrier_hz <= 0:
            raise DomainError("carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @classmethod
    def half_wavelength(cls, n_tx, n_rx, n_rf, carrier_hz):
        lam = SPEED_OF_LIGHT / carrier_hz
        return cls(n_tx, n_rx, n_rf, lam / 2.0, carrier_hz)


@dataclass(frozen=True)
class PolarPoint:
    range_m: float
    angle_rad: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise DomainError("range must be positive")


@dataclass(frozen=True)
class Scenario:
    """One problem instance: positions, noise, budget, sensing thresholds."""

    users: tuple  # tuple of PolarPoint, length K
    target: PolarPoint
    noise_user: float  # Watts
    noise_eve: float  # Watts
    power_budget: float  # Watts
    crb_angle_max: float  # rad^2
    crb_range_max: float  # m^2
    slots: int
    sensing_gain: complex | None = None  # round-trip gain; None -> two-way default

    def __post_init__(self):
        if len(self.users) < 1:
            raise DomainError("need at least one user")
        if self.noise_user <= 0 or self.noise_eve <= 0:
            raise DomainError("noise powers must be positive")
        if self.power_budget <= 0:
            raise DomainError("power budget must be positive")
        if self.crb_angle_max <= 0 or self.crb_range_max <= 0:
            raise DomainError("CRB thresholds must be positive")
        if self.slots < 1:
            raise DomainError("slots must be >= 1")

    @property
    def n_users(self) -> int:
        return len(self.users)


@dataclass(frozen=True)
class ChannelSet:
    user_channels: np.ndarray  # (K, N) complex
    eve_channel: np.ndarray  # (N,) complex
    eve_gain: complex


@dataclass(frozen=True)
class SensingModel:
    g_tilde: np.ndarray  # (M, N)
    g_dtheta: np.ndarray  # (M, N)
    g_drange: np.ndarray  # (M, N)
    gain: complex


def _tx_phase_exponent(geom: SystemGeometry, p: PolarPoint) -> np.ndarray:
    """Distance-expansion term for the transmit array, without the 2*pi/lambda."""
    n = np.arange(1, geom.n_tx + 1)
    nd = n * geom.spacing
    s, c = np.sin(p.angle_rad), np.cos(p.angle_rad)
    return -nd * s + nd**2 * c**2 / (2.0 * p.range_m)


def _rx_phase_exponent(geom: SystemGeometry, p: PolarPoint) -> np.ndarray:
    m = np.arange(1, geom.n_rx + 1)
    md = m * geom.spacing
    s, c = np.sin(p.angle_rad), np.cos(p.angle_rad)
    return md * s + md**2 * c**2 / (2.0 * p.range_m)


def tx_array_response(geom: SystemGeometry, p: PolarPoint) -> np.ndarray:
    """Spherical-wavefront steering vector of the transmit array, length N."""
    if p.range_m <= 0:
        raise DomainError("range must be positive")
    k = 2.0 * np.pi / geom.wavelength
    return np.exp(-1j * k * _tx_phase_exponent(geom, p))


def rx_array_response(geom: SystemGeometry, p: PolarPoint) -> np.ndarray:
    """Spherical-wavefront steering vector of the receive array, length M."""
    if p.range_m <= 0:
        raise DomainError("range must be positive")
    k = 2.0 * np.pi / geom.wavelength
    return np.exp(-1j * k * _rx_phase_exponent(geom, p))


def far_field_response(geom: SystemGeometry, angle_rad: float) -> np.ndarray:
    """Plane-wave steering vector, used only by the far-field benchmark."""
    n = np.arange(1, geom.n_tx + 1)
    k = 2.0 * np.pi / geom.wavelength
    return np.exp(1j * k * n * geom.spacing * np.sin(angle_rad))


def complex_gain(geom: SystemGeometry, r: float) -> complex:
    """One-way path gain (c / 4*pi*f*r) with the common carrier phase."""
    if r <= 0:
        raise DomainError("range must be positive")
    amp = SPEED_OF_LIGHT / (4.0 * np.pi * geom.carrier_hz * r)
    return amp * np.exp(-2j * np.pi * r / geom.wavelength)


def roundtrip_gain(geom: SystemGeometry, r: float) -> complex:
    """Default two-way gain: squared path loss, doubled phase."""
    if r <= 0:
        raise DomainError("range must be positive")
    amp = SPEED_OF_LIGHT / (4.0 * np.pi * geom.carrier_hz * r)
    return amp**2 * np.exp(-4j * np.pi * r / geom.wavelength)


def build_channels(geom: SystemGeometry, scenario: Scenario) -> ChannelSet:
    """Assemble user channels h_k and the eavesdropper channel g_e."""
    rows = []
    for u in scenario.users:
        rows.append(complex_gain(geom, u.range_m) * tx_array_response(geom, u))
    t = scenario.target
    beta_e = complex_gain(geom, t.range_m)
    g_e = beta_e * tx_array_response(geom, t)
    return ChannelSet(
        user_channels=np.asarray(rows), eve_channel=g_e, eve_gain=beta_e
    )


def build_far_field_channels(geom: SystemGeometry, scenario: Scenario) -> ChannelSet:
    """Channels built from the plane-wave response; path gains stay range-true."""
    rows = []
    for u in scenario.users:
        rows.append(complex_gain(geom, u.range_m) * far_field_response(geom, u.angle_rad))
    t = scenario.target
    beta_e = complex_gain(geom, t.range_m)
    g_e = beta_e * far_field_response(geom, t.angle_rad)
    return ChannelSet(
        user_channels=np.asarray(rows), eve_channel=g_e, eve_gain=beta_e
    )


def _steering_and_derivatives(geom: SystemGeometry, p: PolarPoint):
    """a, b and their analytic derivatives w.r.t. angle and range."""
    k = 2.0 * np.pi / geom.wavelength
    s, c = np.sin(p.angle_rad), np.cos(p.angle_rad)
    r = p.range_m

    n = np.arange(1, geom.n_tx + 1) * geom.spacing
    a = np.exp(-1j * k * (-n * s + n**2 * c**2 / (2.0 * r)))
    da_dth = a * (-1j * k) * (-n * c - n**2 * s * c / r)
    da_dr = a * (1j * k) * (n**2 * c**2 / (2.0 * r**2))

    m = np.arange(1, geom.n_rx + 1) * geom.spacing
    b = np.exp(-1j * k * (m * s + m**2 * c**2 / (2.0 * r)))
    db_dth = b * (-1j * k) * (m * c - m**2 * s * c / r)
    db_dr = b * (1j * k) * (m**2 * c**2 / (2.0 * r**2))

    return a, b, da_dth, da_dr, db_dth, db_dr


def build_sensing_model(geom: SystemGeometry, scenario: Scenario) -> SensingModel:
    """Outer-product echo matrix and its analytic angle/range derivatives."""
    t = scenario.target
    a, b, da_dth, da_dr, db_dth, db_dr = _steering_and_derivatives(geom, t)
    g_tilde = np.outer(b, a)
    g_dtheta = np.outer(db_dth, a) + np.outer(b, da_dth)
    g_drange = np.outer(db_dr, a) + np.outer(b, da_dr)
    gain = scenario.sensing_gain
    if gain is None:
        gain = roundtrip_gain(geom, t.range_m)
    return SensingModel(g_tilde=g_tilde, g_dtheta=g_dtheta, g_drange=g_drange, gain=gain)
