import numpy as np
import pytest

from steadywaves import vorticity as vort
from steadywaves.solver import PhysicalParams, continue_in_amplitude, unit_depth_flux

GRAVITY = 9.81


@pytest.fixture(scope="session")
def params():
    """Unit-depth normalization: the irrotational laminar flow at bifurcation
    has depth exactly 1."""
    return PhysicalParams(gravity=GRAVITY, mass_flux=unit_depth_flux(GRAVITY))


@pytest.fixture(scope="session")
def small_wave(params):
    """Converged irrotational wave, amplitude 1e-3, 65x65."""
    spec = vort.zero().bound_to_flux(params.mass_flux)
    trace = continue_in_amplitude(spec, params, (65, 65), target_amplitude=1e-3, steps=1)
    return trace


@pytest.fixture(scope="session")
def standard_wave(params):
    """Converged irrotational wave, amplitude 0.05, 65x65 (5 members)."""
    spec = vort.zero().bound_to_flux(params.mass_flux)
    return continue_in_amplitude(spec, params, (65, 65), target_amplitude=0.05, steps=5)


@pytest.fixture(scope="session")
def standard_wave_fine(params):
    """Same wave as standard_wave on a 129x129 grid."""
    spec = vort.zero().bound_to_flux(params.mass_flux)
    return continue_in_amplitude(spec, params, (129, 129), target_amplitude=0.05, steps=5)


def observed_order(coarse, fine):
    return float(np.log2(coarse / fine))
