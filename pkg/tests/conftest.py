import numpy as np
import pytest

from resomod.electrical import ElectricalParams
from resomod.model import ResonatorParams
from resomod.thermal import ThermalParams

# Optical card with the measured device's flavor: resonance near 1566.7 nm,
# ~8 GHz/V detuning (65 pm/V), loss decreasing (tau_l rising) under reverse
# bias, moderately over-coupled (tau_c < tau_l).
DEMO_RESONATOR = dict(
    lambda_ref=1566.7e-9,
    lambda0_coeffs=(1566.7e-9, 65e-12, -3e-12),
    tau_c_coeffs=(30e-12, 0.5e-12, 0.05e-12),
    tau_l_coeffs=(45e-12, 3e-12, 0.2e-12),
    v_range=(-1.0, 3.0),
    gamma=2.51e-7,
)

# Faster, more strongly loaded optical card for the data-rate studies:
# broad linewidth keeps the optical filter quick so the voltage-dependent
# junction capacitance visibly shapes the eye edges.
FAST_RESONATOR = dict(
    lambda_ref=1566.7e-9,
    lambda0_coeffs=(1566.7e-9, 65e-12, -3e-12),
    tau_c_coeffs=(14e-12, 0.5e-12, 0.05e-12),
    tau_l_coeffs=(20e-12, 1.5e-12, 0.2e-12),
    v_range=(-1.0, 3.0),
    gamma=2.51e-7,
)

# Extracted electrical parameters of the fabricated device.
TABLE_ELECTRICAL = dict(
    Cj0=143e-15, Vbi=1.328, mj=0.5,
    Rs=79.28, Cox=65.3e-15, RSi=1.4e3, Cpad=20.3e-15,
    Z0=50.0, Rh=8e3,
)

DEMO_THERMAL = dict(gamma=2.51e-7, Rh=8e3, tau_h=15e-6, dynamic=False)


@pytest.fixture(scope="session")
def resonator() -> ResonatorParams:
    return ResonatorParams(**DEMO_RESONATOR)


@pytest.fixture(scope="session")
def resonator_fast() -> ResonatorParams:
    return ResonatorParams(**FAST_RESONATOR)


@pytest.fixture(scope="session")
def electrical() -> ElectricalParams:
    return ElectricalParams(**TABLE_ELECTRICAL)


@pytest.fixture(scope="session")
def thermal() -> ThermalParams:
    return ThermalParams(**DEMO_THERMAL)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
