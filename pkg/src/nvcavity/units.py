"""Physical constants and unit conversions.

Internal physics is SI throughout. Electronvolts appear only at the
boundary (threshold ledger, photon energies in reports).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants as _sc

from .errors import DomainError

#: the single eV <-> J conversion factor used by the whole package
EV = _sc.electron_volt
C = _sc.c
HBAR = _sc.hbar
H = _sc.h
EPS0 = _sc.epsilon_0
N_DIAMOND = 2.4


@dataclass(frozen=True)
class Constants:
    speed_of_light: float = C
    reduced_planck: float = HBAR
    vacuum_permittivity: float = EPS0
    diamond_refractive_index: float = N_DIAMOND

    @property
    def diamond_permittivity(self) -> float:
        return self.vacuum_permittivity * self.diamond_refractive_index**2


CONSTANTS = Constants()


@dataclass(frozen=True)
class PhotonEnergy:
    """Photon energy, stored in eV."""

    value: float

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise DomainError(f"photon energy must be positive, got {self.value!r} eV")

    @classmethod
    def from_joules(cls, joules: float) -> "PhotonEnergy":
        return cls(joules / EV)

    @classmethod
    def from_wavelength(cls, wavelength: float) -> "PhotonEnergy":
        return energy_from_wavelength(wavelength)

    @classmethod
    def from_omega(cls, omega: float) -> "PhotonEnergy":
        return cls(HBAR * omega / EV)

    @property
    def eV(self) -> float:
        return self.value

    @property
    def joules(self) -> float:
        return self.value * EV

    @property
    def omega(self) -> float:
        """Angular frequency in rad/s."""
        return self.joules / HBAR

    @property
    def wavelength(self) -> float:
        """Vacuum wavelength in m."""
        return H * C / self.joules


def energy_from_wavelength(wavelength: float) -> PhotonEnergy:
    if not wavelength > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength!r} m")
    return PhotonEnergy(H * C / wavelength / EV)


def omega_from_wavelength(wavelength):
    """2*pi*c/lambda; accepts arrays."""
    return 2.0 * math.pi * C / wavelength


def wavelength_from_omega(omega):
    return 2.0 * math.pi * C / omega


def dielectric_constant(n: float) -> float:
    """Permittivity eps0*n**2 of a medium with refractive index ``n``."""
    if not n >= 1:
        raise DomainError(f"refractive index must be >= 1, got {n!r}")
    return EPS0 * n * n
