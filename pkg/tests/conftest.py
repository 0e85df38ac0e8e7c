import numpy as np
import pytest

from copterftc.scenario import load_packaged_scenario
from copterftc.sim import run_scenario
from copterftc.vehicle import VehicleParams


def make_hexacopter(config="PPNNPN", **overrides):
    """Test vehicle matching the packaged defaults unless overridden."""
    kw = dict(
        arm_length=0.275,
        mass=1.5,
        inertia=(0.035, 0.035, 0.06),
        kappa_t=1.0e-5,
        kappa_mu=0.02,
        kappa_d=0.06,
        kappa_r=0.04,
        f_max=6.0,
        tau_motor=0.02,
        gravity=9.81,
    )
    kw.update(overrides)
    return VehicleParams.symmetric(config, **kw)


@pytest.fixture(scope="session")
def hexa_ppnnpn():
    return make_hexacopter("PPNNPN")


@pytest.fixture(scope="session")
def hexa_pnpnpn():
    return make_hexacopter("PNPNPN")


@pytest.fixture(scope="session")
def hover_scenario():
    return load_packaged_scenario("scenario_hover.yaml")


@pytest.fixture(scope="session")
def hover_log(hover_scenario):
    return run_scenario(hover_scenario)


@pytest.fixture(scope="session")
def controllable_faults_scenario():
    return load_packaged_scenario("scenario_faults_controllable.yaml")


@pytest.fixture(scope="session")
def controllable_faults_log(controllable_faults_scenario):
    return run_scenario(controllable_faults_scenario)


@pytest.fixture(scope="session")
def rotor5_scenario():
    return load_packaged_scenario("scenario_rotor5_uncontrollable.yaml")


@pytest.fixture(scope="session")
def rotor5_log(rotor5_scenario):
    return run_scenario(rotor5_scenario)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
