"""
Aircraft Performance Model

Maximum climb thrust, drag polar, energy share factor and flight envelope
limits for a jet aircraft, driven by a flat coefficient file. The shipped
coefficients are a synthetic A320-like set and are not authoritative
performance data.
"""

import logging
from dataclasses import dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple

from utils.atmosphere import ISA, AtmosphereState, PhysicalConstants, atmosphere_at, tas_to_cas_at
from utils.errors import ConfigError, DomainError, EnvelopeError
from utils.modes import AccelMode, AltitudeBand, Mode, SpeedMode
from utils.units import FT, KT


logger = logging.getLogger(__name__)


OPTIONAL_DEFAULTS = {
    "esf_acc": 0.3,
    "esf_dec": 1.7,
    "c_red": 1.0,
    "v1_ref": 250.0,
    "v2_ref": 310.0,
    "mach_ref": 0.78,
}


@dataclass(frozen=True)
class AircraftPerfModel:
    """
    Performance coefficients of one aircraft type.

    Units follow the coefficient file: masses in kg, wing area in m^2,
    ctc1 in N, ctc2 in ft, ctc3 in 1/ft^2, speeds in kt CAS, ceiling in ft.
    """

    label: str
    mass_ref: float
    mass_min: float
    mass_max: float
    wing_area: float
    cd0: float
    cd2: float
    ctc1: float
    ctc2: float
    ctc3: float
    v_stall: float
    v_mo: float
    m_mo: float
    h_max: float
    c_red: float = 1.0
    esf_acc: float = 0.3
    esf_dec: float = 1.7
    v1_ref: float = 250.0
    v2_ref: float = 310.0
    mach_ref: float = 0.78

    def __post_init__(self):
        if not 0 < self.mass_min < self.mass_ref < self.mass_max:
            raise ConfigError("mass", "expected 0 < mass_min < mass_ref < mass_max")
        for key in ("wing_area", "cd0", "cd2", "ctc1", "ctc2", "h_max", "m_mo"):
            if not getattr(self, key) > 0:
                raise ConfigError(key, "must be strictly positive")
        if not 0 < self.c_red <= 1:
            raise ConfigError("c_red", "must lie in (0, 1]")
        if not 0 < self.esf_acc < 1 < self.esf_dec:
            raise ConfigError("esf", "expected 0 < esf_acc < 1 < esf_dec")
        if not 0 < self.v_stall < self.v_mo:
            raise ConfigError("v_stall", "expected 0 < v_stall < v_mo")
        if not 0 < self.v1_ref <= self.v2_ref:
            raise ConfigError("v1_ref", "expected 0 < v1_ref <= v2_ref")
        if not 0 < self.mach_ref <= self.m_mo:
            raise ConfigError("mach_ref", "expected 0 < mach_ref <= m_mo")

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "AircraftPerfModel":
        """
        Build a model from raw key/value pairs, applying optional defaults.

        Unknown keys are logged and ignored.

        Raises:
            ConfigError: On missing, non-numeric or invalid values.
        """
        known = {f.name for f in fields(cls)}
        for key in sorted(set(values) - known):
            logger.warning(f"Unknown aircraft coefficient ignored: {key}")

        kwargs: Dict[str, Any] = {}
        for f in fields(cls):
            raw = values.get(f.name)
            if raw is None or (isinstance(raw, str) and not raw.strip()):
                if f.name in OPTIONAL_DEFAULTS:
                    kwargs[f.name] = OPTIONAL_DEFAULTS[f.name]
                    continue
                raise ConfigError(f.name, "missing required key")
            if f.name == "label":
                kwargs[f.name] = str(raw).strip()
                continue
            try:
                kwargs[f.name] = float(raw)
            except (TypeError, ValueError):
                raise ConfigError(f.name, f"not a decimal number: {raw!r}") from None
        return cls(**kwargs)

    @property
    def h_max_m(self) -> float:
        return self.h_max * FT

    @property
    def v_stall_ms(self) -> float:
        return self.v_stall * KT

    @property
    def v_mo_ms(self) -> float:
        return self.v_mo * KT


# ===================== THRUST AND DRAG =====================

def thrust_at(h: float, model: AircraftPerfModel) -> float:
    """Maximum climb thrust polynomial without envelope checks."""
    h_ft = h / FT
    return max(0.0, model.ctc1 * (1.0 - h_ft / model.ctc2 + model.ctc3 * h_ft * h_ft))


def max_climb_thrust(h: float, dT: float, model: AircraftPerfModel) -> float:
    """
    Maximum climb thrust.

    The temperature offset has no effect on thrust in this model.

    Args:
        h: Altitude in metres, within [0, ceiling].
        dT: Temperature offset in kelvin (unused).
        model: Aircraft coefficients.

    Returns:
        Thrust in newtons, never negative.

    Raises:
        EnvelopeError: If h is above the ceiling.
    """
    if h < 0:
        raise DomainError(f"altitude {h} m below sea level")
    if h > model.h_max_m:
        raise EnvelopeError(f"altitude {h:.1f} m above ceiling {model.h_max_m:.1f} m")
    return thrust_at(h, model)


def drag_at(v_tas: float, density: float, m: float, model: AircraftPerfModel,
            const: PhysicalConstants = ISA) -> float:
    q_s = 0.5 * density * v_tas * v_tas * model.wing_area
    cl = m * const.g / q_s
    return (model.cd0 + model.cd2 * cl * cl) * q_s


def drag(v_tas: float, h: float, dT: float, m: float, model: AircraftPerfModel) -> float:
    """
    Drag from the parabolic polar, with lift equal to weight.

    Args:
        v_tas: True airspeed in m/s.
        h: Altitude in metres.
        dT: Temperature offset in kelvin.
        m: Mass in kg.
        model: Aircraft coefficients.

    Returns:
        Drag in newtons.
    """
    if not v_tas > 0:
        raise DomainError(f"TAS must be strictly positive, got {v_tas}")
    if not m > 0:
        raise DomainError(f"mass must be strictly positive, got {m}")
    return drag_at(v_tas, atmosphere_at(h, dT).density, m, model)


# ===================== ENERGY SHARE FACTOR =====================

def esf_at(mach: float, temperature: float, dT: float, q: Mode, model: AircraftPerfModel,
           const: PhysicalConstants = ISA) -> float:
    if q.q3 is AccelMode.ACC:
        return model.esf_acc
    if q.q3 is AccelMode.DEC:
        return model.esf_dec
    if q.q1 is SpeedMode.MACH and q.q2 is AltitudeBand.HIGH:
        return 1.0

    kappa = const.kappa
    m2 = mach * mach
    lapse = kappa * const.R * const.beta / (2.0 * const.g) * m2 * (temperature - dT) / temperature
    if q.q1 is SpeedMode.MACH:
        f = 1.0 / (1.0 + lapse)
    else:
        base = 1.0 + (kappa - 1.0) / 2.0 * m2
        compress = base ** (-1.0 / (kappa - 1.0)) * (base ** (kappa / (kappa - 1.0)) - 1.0)
        if q.q2 is AltitudeBand.LOW:
            f = 1.0 / (1.0 + lapse + compress)
        else:
            f = 1.0 / (1.0 + compress)
    return min(max(f, model.esf_acc), model.esf_dec)


def energy_share_factor(v_tas: float, h: float, dT: float, q: Mode,
                        model: AircraftPerfModel) -> float:
    """
    Fraction of excess power spent on climbing in flight condition q.

    Acceleration and deceleration use the configured constants; the four
    constant-speed conditions follow the total-energy derivation for
    constant Mach or constant CAS, below or above the tropopause.

    Returns:
        The factor, bounded to [esf_acc, esf_dec].
    """
    atm = atmosphere_at(h, dT)
    return esf_at(v_tas / atm.speed_of_sound, atm.temperature, dT, q, model)


# ===================== FLIGHT ENVELOPE =====================

@dataclass(frozen=True)
class EnvelopeReport:
    """Envelope violations found at one state (empty means ok)."""

    violations: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def envelope_check_at(v_tas: float, h: float, atm: Optional[AtmosphereState],
                      model: AircraftPerfModel) -> EnvelopeReport:
    violations = []
    if atm is None:
        violations.append("altitude")
    else:
        cas = tas_to_cas_at(v_tas, atm)
        if cas < model.v_stall_ms:
            violations.append("stall")
        if cas > model.v_mo_ms:
            violations.append("overspeed")
        if v_tas / atm.speed_of_sound > model.m_mo:
            violations.append("mach")
    if h > model.h_max_m:
        violations.append("ceiling")
    return EnvelopeReport(tuple(violations))


def envelope_check(v_tas: float, h: float, dT: float, model: AircraftPerfModel) -> EnvelopeReport:
    """
    Check speed and altitude limits.

    Args:
        v_tas: True airspeed in m/s.
        h: Altitude in metres.
        dT: Temperature offset in kelvin.
        model: Aircraft coefficients.

    Returns:
        Report listing any of: stall, overspeed, mach, ceiling, altitude.
    """
    try:
        atm = atmosphere_at(h, dT)
    except DomainError:
        atm = None
    if not v_tas > 0:
        ceiling = ("ceiling",) if h > model.h_max_m else ()
        return EnvelopeReport(("stall",) + ceiling)
    return envelope_check_at(v_tas, h, atm, model)
