"""
International Standard Atmosphere with a temperature offset

Provides the ISA temperature/pressure/density profile shifted by a
temperature deviation dT, the CAS/TAS/Mach conversions, and the CAS/Mach
crossover altitude. All altitudes are geopotential metres; all speeds m/s.

The pressure profile always follows the ISA (dT = 0) law; dT only shifts
temperature and, through it, density and the speed of sound.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.optimize import bisect

from utils.errors import DomainError, NoCrossoverError


H_MIN = -500.0
H_MAX = 50000.0
CROSSOVER_SPAN = 10000.0  # searched above the tropopause


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants of the standard atmosphere (SI units)."""

    g: float = 9.80665
    R: float = 287.05287
    kappa: float = 1.4
    beta: float = -0.0065
    T0: float = 288.15
    p0: float = 101325.0
    h_trop: float = 11000.0

    def __post_init__(self):
        for name in ("g", "R", "kappa", "T0", "p0", "h_trop"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        if not self.beta < 0:
            raise DomainError("beta must be strictly negative")

    @property
    def rho0(self) -> float:
        return self.p0 / (self.R * self.T0)

    @property
    def mu(self) -> float:
        return (self.kappa - 1.0) / self.kappa

    @property
    def T_trop(self) -> float:
        """ISA temperature at and above the tropopause."""
        return self.T0 + self.beta * self.h_trop

    @property
    def p_trop(self) -> float:
        return self.p0 * (self.T_trop / self.T0) ** (-self.g / (self.beta * self.R))


ISA = PhysicalConstants()


@dataclass(frozen=True)
class AtmosphereState:
    """Air properties at one altitude."""

    temperature: float
    pressure: float
    density: float
    speed_of_sound: float


def _check_altitude(h: float) -> None:
    if not H_MIN <= h <= H_MAX:
        raise DomainError(f"altitude {h} m outside [{H_MIN}, {H_MAX}]")


def _check_speed(v: float, what: str) -> None:
    if not v > 0:
        raise DomainError(f"{what} must be strictly positive, got {v}")


def isa_temperature(h: float, const: PhysicalConstants = ISA) -> float:
    """ISA temperature without offset, constant above the tropopause."""
    return const.T0 + const.beta * min(h, const.h_trop)


def isa_pressure(h: float, const: PhysicalConstants = ISA) -> float:
    """ISA pressure: power law in the troposphere, exponential above."""
    if h <= const.h_trop:
        return const.p0 * (isa_temperature(h, const) / const.T0) ** (-const.g / (const.beta * const.R))
    return const.p_trop * math.exp(-const.g / (const.R * const.T_trop) * (h - const.h_trop))


def atmosphere_at(h: float, dT: float = 0.0, const: PhysicalConstants = ISA) -> AtmosphereState:
    """
    Air properties at altitude h with temperature offset dT.

    Args:
        h: Geopotential altitude in metres, within [-500, 50000].
        dT: Temperature offset from ISA in kelvin.
        const: Atmosphere constants.

    Returns:
        The temperature, pressure, density and speed of sound.

    Raises:
        DomainError: If the altitude is out of range.
    """
    _check_altitude(h)
    temperature = isa_temperature(h, const) + dT
    pressure = isa_pressure(h, const)
    return AtmosphereState(
        temperature=temperature,
        pressure=pressure,
        density=pressure / (const.R * temperature),
        speed_of_sound=math.sqrt(const.kappa * const.R * temperature),
    )


# Conversions on an already evaluated atmosphere, used by the vector fields.

def cas_to_tas_at(v_cas: float, atm: AtmosphereState, const: PhysicalConstants = ISA) -> float:
    mu = const.mu
    inner = (1.0 + mu / 2.0 * const.rho0 / const.p0 * v_cas * v_cas) ** (1.0 / mu) - 1.0
    outer = (1.0 + const.p0 / atm.pressure * inner) ** mu - 1.0
    return math.sqrt(2.0 / mu * atm.pressure / atm.density * outer)


def tas_to_cas_at(v_tas: float, atm: AtmosphereState, const: PhysicalConstants = ISA) -> float:
    mu = const.mu
    inner = (1.0 + mu / 2.0 * atm.density / atm.pressure * v_tas * v_tas) ** (1.0 / mu) - 1.0
    outer = (1.0 + atm.pressure / const.p0 * inner) ** mu - 1.0
    return math.sqrt(2.0 / mu * const.p0 / const.rho0 * outer)


def cas_to_tas(v_cas: float, h: float, dT: float = 0.0, const: PhysicalConstants = ISA) -> float:
    """
    Convert calibrated to true airspeed (compressible flow).

    Args:
        v_cas: Calibrated airspeed in m/s.
        h: Altitude in metres.
        dT: Temperature offset in kelvin.

    Returns:
        True airspeed in m/s.
    """
    _check_speed(v_cas, "CAS")
    if h == 0.0 and dT == 0.0:
        return float(v_cas)  # sea-level ISA: CAS and TAS coincide
    return cas_to_tas_at(v_cas, atmosphere_at(h, dT, const), const)


def tas_to_cas(v_tas: float, h: float, dT: float = 0.0, const: PhysicalConstants = ISA) -> float:
    """Convert true to calibrated airspeed; exact inverse of cas_to_tas."""
    _check_speed(v_tas, "TAS")
    if h == 0.0 and dT == 0.0:
        return float(v_tas)
    return tas_to_cas_at(v_tas, atmosphere_at(h, dT, const), const)


def mach_to_tas(mach: float, h: float, dT: float = 0.0, const: PhysicalConstants = ISA) -> float:
    _check_speed(mach, "Mach")
    return mach * atmosphere_at(h, dT, const).speed_of_sound


def tas_to_mach(v_tas: float, h: float, dT: float = 0.0, const: PhysicalConstants = ISA) -> float:
    _check_speed(v_tas, "TAS")
    return v_tas / atmosphere_at(h, dT, const).speed_of_sound


@lru_cache(maxsize=4096)
def crossover_altitude(v_cas: float, mach: float) -> float:
    """
    Altitude where a constant-CAS climb reaches the given Mach number.

    Solved by bisection in the ISA (dT = 0) to 0.1 m.

    Args:
        v_cas: Calibrated airspeed in m/s.
        mach: Mach number.

    Returns:
        Crossover altitude in metres.

    Raises:
        NoCrossoverError: If the two TAS curves do not cross in
            [0, h_trop + 10000].
    """
    _check_speed(v_cas, "CAS")
    _check_speed(mach, "Mach")

    def gap(h: float) -> float:
        return cas_to_tas(v_cas, h) - mach_to_tas(mach, h)

    h_hi = ISA.h_trop + CROSSOVER_SPAN
    if not (gap(0.0) < 0.0 < gap(h_hi)):
        raise NoCrossoverError(
            f"no CAS/Mach crossover for CAS {v_cas:.3f} m/s and Mach {mach:.4f}"
        )
    return bisect(gap, 0.0, h_hi, xtol=0.1)
