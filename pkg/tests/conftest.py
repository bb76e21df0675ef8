import numpy as np
import pytest

from windlq.coefficients import default_surface
from windlq.control import (
    GainSchedule,
    build_power_speed_table,
    desired_speed,
    region_external_inputs,
)
from windlq.equilibrium import compute_equilibrium
from windlq.synthesis import default_scaled_weights, synthesize_vertex_set
from windlq.turbine import ExternalInput, default_parameters

P_REF_FRACTION = 0.8


@pytest.fixture(scope="session")
def params():
    return default_parameters()


@pytest.fixture(scope="session")
def surface():
    return default_surface()


@pytest.fixture(scope="session")
def table(params, surface):
    return build_power_speed_table(params, surface)


@pytest.fixture(scope="session")
def p_ref(params):
    return P_REF_FRACTION * params.p_rated


@pytest.fixture(scope="session")
def w_region3(params, surface, table, p_ref):
    """Runtime-style region-3 external input at the reference wind speed."""
    return ExternalInput(v=14.8, omega_d=desired_speed(table, p_ref), p_d=p_ref)


@pytest.fixture(scope="session")
def eq_region3(params, surface, w_region3):
    return compute_equilibrium(params, surface, w_region3)


@pytest.fixture(scope="session")
def region_syntheses(params, surface, table, p_ref):
    """Certified vertex-set syntheses for both regions (expensive, shared)."""
    out = {}
    for region in (2, 3):
        w_list = region_external_inputs(params, surface, table, region, p_ref)
        out[region] = synthesize_vertex_set(
            params, surface, w_list, default_scaled_weights(region)
        )
    return out


@pytest.fixture(scope="session")
def schedule(region_syntheses):
    return GainSchedule(
        k2=region_syntheses[2].k_physical,
        k3=region_syntheses[3].k_physical,
        delta_v=0.5,
    )


@pytest.fixture(scope="session")
def zero_schedule():
    return GainSchedule(k2=np.zeros((2, 7)), k3=np.zeros((2, 7)), delta_v=0.5)
