import numpy as np
import pytest

from nfisac.geometry import (PolarPoint, Scenario, SystemGeometry,
                             build_channels, build_sensing_model)

SIG2 = 3.98e-12  # -84 dBm


@pytest.fixture(scope="session")
def desk_geom():
    return SystemGeometry.half_wavelength(16, 8, 4, 30e9)


@pytest.fixture(scope="session")
def desk_scenario():
    return Scenario(
        users=(PolarPoint(12.0, 0.3), PolarPoint(15.0, -0.5)),
        target=PolarPoint(10.0, 0.6),
        noise_user=SIG2, noise_eve=SIG2, power_budget=0.1,
        crb_angle_max=1.0, crb_range_max=1.0, slots=64)


@pytest.fixture(scope="session")
def desk_channels(desk_geom, desk_scenario):
    return build_channels(desk_geom, desk_scenario)


@pytest.fixture(scope="session")
def desk_sensing(desk_geom, desk_scenario):
    return build_sensing_model(desk_geom, desk_scenario)


def random_beams(rng, n=16, k=2, power=0.1):
    p = rng.standard_normal((n, k + 1)) + 1j * rng.standard_normal((n, k + 1))
    return p * np.sqrt(power) / np.linalg.norm(p)


def random_scenario(rng, k=2, slots=64):
    pts = [PolarPoint(float(rng.uniform(10, 20)), float(rng.uniform(0, np.pi / 2)))
           for _ in range(k + 1)]
    return Scenario(users=tuple(pts[1:]), target=pts[0], noise_user=SIG2,
                    noise_eve=SIG2, power_budget=0.1, crb_angle_max=1.0,
                    crb_range_max=1.0, slots=slots)
