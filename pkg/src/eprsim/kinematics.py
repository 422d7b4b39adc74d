"""Beam kinematics: recoil velocity, de Broglie wavelength and free fall.

All quantities are SI base units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PLANCK = 6.62607015e-34  # J s, exact (SI 2019)
GRAVITY = 9.81  # m/s^2

HE4_MASS = 6.646e-27  # kg, metastable helium-4
HE_LASER_WAVELENGTH = 1.083e-6  # m
VELOCITY_SPREAD_X = 0.0044
VELOCITY_SPREAD_YZ = 0.091

# (1/pi) * sqrt(21/8): momentum spread of a uniformly filled box source
_BOX_SPREAD_FACTOR = math.sqrt(21.0 / 8.0) / math.pi


class DomainError(ValueError):
    """An input lies outside the domain of a physical formula."""


@dataclass(frozen=True)
class PhysicalConstants:
    planck_constant: float = PLANCK
    gravity: float = GRAVITY

    def __post_init__(self):
        if not (self.planck_constant > 0 and self.gravity > 0):
            raise DomainError("physical constants must be strictly positive")


DEFAULT_CONSTANTS = PhysicalConstants()


def recoil_velocity(laser_wavelength: float, atomic_mass: float,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Single-photon recoil speed ``h / (lambda_L * m)``."""
    if not laser_wavelength > 0:
        raise DomainError(f"laser wavelength must be > 0, got {laser_wavelength!r}")
    if not atomic_mass > 0:
        raise DomainError(f"atomic mass must be > 0, got {atomic_mass!r}")
    return constants.planck_constant / (laser_wavelength * atomic_mass)


@dataclass(frozen=True)
class BeamParameters:
    """Laser/atom pair and the velocity spreads of the scattered atoms.

    The spreads are fractions of the recoil velocity and are taken as
    inputs; they depend on trap parameters that are not modeled here.
    """

    laser_wavelength: float = HE_LASER_WAVELENGTH
    atomic_mass: float = HE4_MASS
    velocity_spread_x: float = VELOCITY_SPREAD_X
    velocity_spread_yz: float = VELOCITY_SPREAD_YZ
    constants: PhysicalConstants = field(default=DEFAULT_CONSTANTS, repr=False)

    def __post_init__(self):
        # raises on non-positive inputs
        recoil_velocity(self.laser_wavelength, self.atomic_mass, self.constants)
        for name in ("velocity_spread_x", "velocity_spread_yz"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {value!r}")

    @property
    def recoil_velocity(self) -> float:
        return recoil_velocity(self.laser_wavelength, self.atomic_mass, self.constants)

    @property
    def de_broglie_wavelength(self) -> float:
        # h / (m * h / (lambda_L m)) collapses to lambda_L; evaluate it that way
        # so the identity holds exactly instead of to rounding.
        return self.laser_wavelength

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.de_broglie_wavelength

    def momentum_spread_fraction(self, source_extent_x: float) -> float:
        return momentum_spread_fraction(source_extent_x, self.de_broglie_wavelength)


def fall_time(drop_height: float, initial_upward_speed: float,
              gravity: float = GRAVITY) -> float:
    """Time to fall ``drop_height`` when launched upward at ``initial_upward_speed``.

    Positive root of ``-v0 t + g t^2 / 2 = H``.
    """
    if drop_height < 0:
        raise DomainError(f"drop height must be >= 0, got {drop_height!r}")
    if not gravity > 0:
        raise DomainError("gravity must be > 0")
    v0 = initial_upward_speed
    disc = math.sqrt(v0 * v0 + 2.0 * gravity * drop_height)
    if v0 >= 0:
        return (v0 + disc) / gravity
    # v0 < 0: avoid cancellation in (v0 + disc)
    return 2.0 * drop_height / (disc - v0)


@dataclass(frozen=True)
class FallSolution:
    fall_time: float
    lateral_reach: float


def solve_fall(beam: BeamParameters, drop_height: float) -> FallSolution:
    v = beam.recoil_velocity
    t = fall_time(drop_height, v, beam.constants.gravity)
    return FallSolution(fall_time=t, lateral_reach=v * t)


def lateral_reach(beam: BeamParameters, drop_height: float) -> float:
    """Largest ``L1 + L2`` reachable by an atom moving horizontally at v_rec."""
    return solve_fall(beam, drop_height).lateral_reach


def momentum_spread_fraction(source_extent_x: float,
                             de_broglie_wavelength: float = HE_LASER_WAVELENGTH) -> float:
    """Relative momentum spread ``dp_x / p`` of a box source of width ``S_x``."""
    if not source_extent_x > 0:
        raise DomainError(f"source extent must be > 0, got {source_extent_x!r}")
    return _BOX_SPREAD_FACTOR * de_broglie_wavelength / source_extent_x
