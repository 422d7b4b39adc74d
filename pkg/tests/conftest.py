import functools

import pytest

from eprsim import engine
from eprsim.geometry import ExperimentGeometry, Mode, SourceRegion
from eprsim.kinematics import BeamParameters

BEAM = BeamParameters()
WAVELENGTH = BEAM.de_broglie_wavelength

# reference configurations: (slit separation, detector half-width) per mode
REFERENCE = {"dds": (100e-6, 0.75e-3), "ghost": (50e-6, 1e-3)}


def reference_geometry(mode: str) -> ExperimentGeometry:
    d, _ = REFERENCE[mode]
    return ExperimentGeometry(5e-3, 25e-3, d, 0.5, 60e-6, Mode(mode))


@functools.lru_cache(maxsize=None)
def converged(mode: str, extent_x: float, n: int = 201) -> engine.ConvergedPattern:
    """Converged 201x201 pattern for a reference geometry, cached per session."""
    _, window = REFERENCE[mode]
    return engine.integrate_converged(
        reference_geometry(mode), SourceRegion(extent_x, 10e-6, 0.0),
        engine.GridSpec(window, n), WAVELENGTH, tolerance=1e-3)


@pytest.fixture
def dds_geometry():
    return reference_geometry("dds")


@pytest.fixture
def ghost_geometry():
    return reference_geometry("ghost")
