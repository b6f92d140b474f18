"""
Climb Hybrid System

Discrete mode functions, the target speed schedule and the two continuous
vector fields of the vertical-plane climb: the rate of climb from the
total-energy balance and the along-track acceleration.

A HybridSystem bundles the slope functions the integrator needs.
ClimbSystem is the aircraft model; any other subclass (for instance an
analytic test system) can be stepped by the same integrator.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, List, Mapping, Optional, Sequence, Tuple

from utils.atmosphere import (
    ISA,
    AtmosphereState,
    atmosphere_at,
    cas_to_tas_at,
    crossover_altitude,
)
from utils.errors import ConfigError, DomainError, NumericalError
from utils.modes import AccelMode, AltitudeBand, Mode, SpeedMode, all_modes
from utils.performance import AircraftPerfModel, drag_at, esf_at, thrust_at
from utils.units import FL, KT

__all__ = [
    "AccelMode",
    "AltitudeBand",
    "ClimbSystem",
    "DynamicsConfig",
    "HybridSystem",
    "Mode",
    "ParamBounds",
    "SpeedMode",
    "State",
    "TuningParams",
    "acceleration",
    "all_modes",
    "mode_of",
    "rate_of_climb",
    "target_speed",
]

logger = logging.getLogger(__name__)


DEFAULT_BELOW_FL60_SCHEDULE = [(15, 170.0), (30, 185.0), (40, 200.0), (50, 220.0), (60, 240.0)]
SPEED_LIMIT_FL = 100
SPEED_LIMIT_KT = 250.0


@dataclass(frozen=True)
class TuningParams:
    """
    The five tuned parameters.

    Attributes:
        m: Mass in kg.
        dT: Temperature offset in kelvin.
        v1: CAS in kt between FL60 and FL100.
        v2: CAS in kt between FL100 and the crossover altitude.
        mach: Mach number above the crossover altitude.
    """

    m: float
    dT: float
    v1: float
    v2: float
    mach: float

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not math.isfinite(value):
                raise DomainError(f"parameter {name} is not finite: {value}")
        if not self.m > 0:
            raise DomainError(f"mass must be strictly positive, got {self.m}")
        if not 0 < self.v1 <= self.v2:
            raise DomainError(f"expected 0 < v1 <= v2, got v1={self.v1} v2={self.v2}")
        if not self.mach > 0:
            raise DomainError(f"Mach must be strictly positive, got {self.mach}")

    @classmethod
    def nominal(cls, model: AircraftPerfModel) -> "TuningParams":
        """Default parameters: reference mass, ISA, and the procedure speeds."""
        return cls(m=model.mass_ref, dT=0.0, v1=model.v1_ref, v2=model.v2_ref, mach=model.mach_ref)

    def with_values(self, **changes: float) -> "TuningParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {"m": self.m, "dT": self.dT, "v1": self.v1, "v2": self.v2, "mach": self.mach}

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.m, self.dT, self.v1, self.v2, self.mach)

    def check_mass(self, model: AircraftPerfModel) -> None:
        """
        Raises:
            DomainError: If the mass lies outside the aircraft mass range.
        """
        if not model.mass_min <= self.m <= model.mass_max:
            raise DomainError(
                f"mass {self.m:.1f} kg outside [{model.mass_min:.1f}, {model.mass_max:.1f}]"
            )


PARAM_NAMES = ("m", "dT", "v1", "v2", "mach")

DEFAULT_BOUNDS = {
    "m": (45000.0, 77000.0),
    "dT": (-20.0, 20.0),
    "v1": (200.0, 250.0),
    "v2": (240.0, 350.0),
    "mach": (0.70, 0.82),
}


@dataclass(frozen=True)
class ParamBounds:
    """
    Search box for the tuning parameters, one (low, high) pair each.

    Units: kg, K, kt, kt, Mach.
    """

    m: Tuple[float, float] = DEFAULT_BOUNDS["m"]
    dT: Tuple[float, float] = DEFAULT_BOUNDS["dT"]
    v1: Tuple[float, float] = DEFAULT_BOUNDS["v1"]
    v2: Tuple[float, float] = DEFAULT_BOUNDS["v2"]
    mach: Tuple[float, float] = DEFAULT_BOUNDS["mach"]

    def __post_init__(self):
        for name in PARAM_NAMES:
            low, high = getattr(self, name)
            if not (math.isfinite(low) and math.isfinite(high)) or not low < high:
                raise ConfigError(name, f"expected low < high, got ({low}, {high})")

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "ParamBounds":
        """Build from {name: [low, high]}; missing names keep the shipped bounds."""
        for key in sorted(set(values) - set(PARAM_NAMES)):
            logger.warning(f"Unknown bound ignored: {key}")
        kwargs = {}
        for name in PARAM_NAMES:
            if name not in values:
                continue
            pair = values[name]
            try:
                low, high = (float(x) for x in pair)
            except (TypeError, ValueError):
                raise ConfigError(name, f"expected a [low, high] pair, got {pair!r}") from None
            kwargs[name] = (low, high)
        return cls(**kwargs)

    def check_model(self, model: AircraftPerfModel) -> None:
        """
        Raises:
            ConfigError: If the mass bounds leave the aircraft mass range.
        """
        low, high = self.m
        if low < model.mass_min or high > model.mass_max:
            raise ConfigError(
                "m", f"bounds ({low}, {high}) outside [{model.mass_min}, {model.mass_max}]"
            )

    @property
    def lows(self) -> List[float]:
        return [getattr(self, name)[0] for name in PARAM_NAMES]

    @property
    def highs(self) -> List[float]:
        return [getattr(self, name)[1] for name in PARAM_NAMES]

    def contains(self, theta: TuningParams, tol: float = 1e-9) -> bool:
        for name, value in zip(PARAM_NAMES, theta.as_tuple()):
            low, high = getattr(self, name)
            span = high - low
            if value < low - tol * span or value > high + tol * span:
                return False
        return True


@dataclass(frozen=True)
class State:
    """Hybrid state: time (s), mode, altitude (m), true airspeed (m/s)."""

    t: float
    q: Mode
    h: float
    v: float


class DynamicsConfig:
    """
    Configuration of the hybrid system.

    Args:
        epsilon_kt: Half-width of the CST band around the target speed, kt TAS.
        below_fl60_schedule: Ordered (FL ceiling, kt CAS) pairs ending at FL60.
        cap_250_below_fl100: Cap v1 at 250 kt below FL100.
    """

    def __init__(
        self,
        epsilon_kt: float = 2.0,
        below_fl60_schedule: Optional[Sequence[Tuple[float, float]]] = None,
        cap_250_below_fl100: bool = True,
    ):
        self.epsilon_kt = float(epsilon_kt)
        schedule = DEFAULT_BELOW_FL60_SCHEDULE if below_fl60_schedule is None else below_fl60_schedule
        self.below_fl60_schedule = [(float(fl), float(kt)) for fl, kt in schedule]
        self.cap_250_below_fl100 = bool(cap_250_below_fl100)
        self.validate()

    def validate(self) -> None:
        if not self.epsilon_kt > 0:
            raise ConfigError("epsilon_kt", "must be strictly positive")
        if not self.below_fl60_schedule:
            raise ConfigError("below_fl60_schedule", "must not be empty")
        ceilings = [fl for fl, _ in self.below_fl60_schedule]
        if any(b <= a for a, b in zip(ceilings, ceilings[1:])):
            raise ConfigError("below_fl60_schedule", "FL ceilings must be strictly increasing")
        if ceilings[-1] != 60:
            raise ConfigError("below_fl60_schedule", "last FL ceiling must be 60")
        if any(kt <= 0 for _, kt in self.below_fl60_schedule):
            raise ConfigError("below_fl60_schedule", "speeds must be strictly positive")

    @classmethod
    def from_dict(cls, values: Optional[Mapping[str, Any]]) -> "DynamicsConfig":
        values = dict(values or {})
        known = {"epsilon_kt", "below_fl60_schedule", "cap_250_below_fl100"}
        for key in sorted(set(values) - known):
            logger.warning(f"Unknown dynamics setting ignored: {key}")
        try:
            return cls(**{k: v for k, v in values.items() if k in known})
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError("dynamics", str(e)) from None

    @property
    def epsilon(self) -> float:
        """Hysteresis half-width in m/s."""
        return self.epsilon_kt * KT


# ===================== HYBRID SYSTEMS =====================

class HybridSystem:
    """
    Slope functions of a two-state hybrid system.

    Subclasses supply the mode function and the two vector fields
    f1 (altitude rate) and f2 (speed rate, given the altitude rate).
    """

    def mode(self, t: float, h: float, v: float) -> Mode:
        raise NotImplementedError

    def f1(self, t: float, h: float, v: float, q: Mode) -> float:
        raise NotImplementedError

    def f2(self, t: float, h: float, v: float, hdot: float) -> float:
        raise NotImplementedError

    def slope(self, t: float, h: float, v: float) -> Tuple[Mode, float, float]:
        """Evaluate the mode and both slopes at one point."""
        q = self.mode(t, h, v)
        dh = self.f1(t, h, v, q)
        return q, dh, self.f2(t, h, v, dh)

    def ceiling(self) -> float:
        """Altitude at which simulation stops climbing."""
        return math.inf


class ClimbSystem(HybridSystem):
    """
    Aircraft climb under the total-energy model for one parameter vector.

    Args:
        params: Tuning parameters.
        cfg: Dynamics configuration.
        model: Aircraft coefficients.
    """

    def __init__(self, params: TuningParams, cfg: DynamicsConfig, model: AircraftPerfModel):
        self.params = params
        self.cfg = cfg
        self.model = model
        self.h_cross = crossover_altitude(params.v2 * KT, params.mach)
        self.h_fl60 = 60 * FL
        self.h_fl100 = SPEED_LIMIT_FL * FL
        self.schedule = [(fl * FL, kt * KT) for fl, kt in cfg.below_fl60_schedule]
        v1 = min(params.v1, SPEED_LIMIT_KT) if cfg.cap_250_below_fl100 else params.v1
        self.v1_cas = v1 * KT
        self.v2_cas = params.v2 * KT
        self.epsilon = cfg.epsilon
        self.weight = params.m * ISA.g

    def ceiling(self) -> float:
        return self.model.h_max_m

    def _atmosphere(self, h: float, v: float) -> AtmosphereState:
        if not (math.isfinite(h) and math.isfinite(v)) or not v > 0:
            raise NumericalError(f"invalid state h={h} v={v}")
        try:
            return atmosphere_at(h, self.params.dT)
        except DomainError as e:
            raise NumericalError(str(e)) from None

    def target_at(self, h: float, atm: AtmosphereState) -> float:
        """Target TAS at altitude h for an already evaluated atmosphere."""
        if h > self.h_cross:
            return self.params.mach * atm.speed_of_sound
        if h <= self.h_fl60:
            cas = self.schedule[-1][1]
            for ceiling, kt in self.schedule:
                if h <= ceiling:
                    cas = kt
                    break
        elif h <= self.h_fl100:
            cas = self.v1_cas
        else:
            cas = self.v2_cas
        return cas_to_tas_at(cas, atm)

    def mode_at(self, h: float, v: float, target: float) -> Mode:
        q1 = SpeedMode.CAS if h <= self.h_cross else SpeedMode.MACH
        q2 = AltitudeBand.LOW if h <= ISA.h_trop else AltitudeBand.HIGH
        if v <= target - self.epsilon:
            q3 = AccelMode.ACC
        elif v >= target + self.epsilon:
            q3 = AccelMode.DEC
        else:
            q3 = AccelMode.CST
        return Mode(q1, q2, q3)

    def mode(self, t: float, h: float, v: float) -> Mode:
        atm = self._atmosphere(h, v)
        return self.mode_at(h, v, self.target_at(h, atm))

    def forces(self, h: float, v: float, atm: AtmosphereState) -> Tuple[float, float]:
        """Maximum climb thrust and drag in newtons."""
        return thrust_at(h, self.model), drag_at(v, atm.density, self.params.m, self.model)

    def roc_at(self, v: float, q: Mode, atm: AtmosphereState, excess: float) -> float:
        dT = self.params.dT
        temp_ratio = (atm.temperature - dT) / atm.temperature
        f = esf_at(v / atm.speed_of_sound, atm.temperature, dT, q, self.model)
        return self.model.c_red * temp_ratio * excess * v / self.weight * f

    def accel_at(self, v: float, hdot: float, excess: float) -> float:
        sin_gamma = min(1.0, max(-1.0, hdot / v))
        return (excess - self.weight * sin_gamma) / self.params.m

    def f1(self, t: float, h: float, v: float, q: Mode) -> float:
        atm = self._atmosphere(h, v)
        thrust, drag = self.forces(h, v, atm)
        return self.roc_at(v, q, atm, thrust - drag)

    def f2(self, t: float, h: float, v: float, hdot: float) -> float:
        atm = self._atmosphere(h, v)
        thrust, drag = self.forces(h, v, atm)
        return self.accel_at(v, hdot, thrust - drag)

    def slope(self, t: float, h: float, v: float) -> Tuple[Mode, float, float]:
        atm = self._atmosphere(h, v)
        q = self.mode_at(h, v, self.target_at(h, atm))
        thrust, drag = self.forces(h, v, atm)
        excess = thrust - drag
        dh = self.roc_at(v, q, atm, excess)
        return q, dh, self.accel_at(v, dh, excess)


# ===================== PUBLIC VECTOR FIELDS =====================

def _check_state(v: float, h: float) -> None:
    if not v > 0:
        raise DomainError(f"TAS must be strictly positive, got {v}")
    atmosphere_at(h)


def mode_of(v: float, h: float, params: TuningParams, cfg: DynamicsConfig,
            model: AircraftPerfModel) -> Mode:
    """
    Mode of the hybrid system at (v, h).

    q1 is CAS up to the crossover altitude of (v2, mach), q2 is LOW up to
    the tropopause, q3 compares v with the target TAS within +/- epsilon.
    """
    _check_state(v, h)
    return ClimbSystem(params, cfg, model).mode(0.0, h, v)


def target_speed(h: float, params: TuningParams, cfg: DynamicsConfig,
                 model: AircraftPerfModel) -> float:
    """
    Target true airspeed of the climb schedule at altitude h.

    Below FL60 the configured departure schedule applies regardless of
    the parameters; v1 up to FL100, v2 up to the crossover, then Mach.

    Returns:
        Target TAS in m/s.
    """
    system = ClimbSystem(params, cfg, model)
    return system.target_at(h, atmosphere_at(h, params.dT))


def rate_of_climb(v: float, h: float, q: Mode, params: TuningParams,
                  model: AircraftPerfModel) -> float:
    """
    Rate of climb from the total-energy balance.

    c_red * (T - dT)/T * (Thr - D) * v / (m g) * f(v, h, q)

    Args:
        v: True airspeed in m/s.
        h: Altitude in metres.
        q: Current mode.
        params: Tuning parameters (mass and dT are used).
        model: Aircraft coefficients.

    Returns:
        Rate of climb in m/s, negative when drag exceeds thrust.
    """
    _check_state(v, h)
    atm = atmosphere_at(h, params.dT)
    thrust = thrust_at(h, model)
    drag = drag_at(v, atm.density, params.m, model)
    temp_ratio = (atm.temperature - params.dT) / atm.temperature
    f = esf_at(v / atm.speed_of_sound, atm.temperature, params.dT, q, model)
    return model.c_red * temp_ratio * (thrust - drag) * v / (params.m * ISA.g) * f


def acceleration(h: float, v: float, hdot: float, params: TuningParams,
                 model: AircraftPerfModel) -> float:
    """
    Along-track acceleration (Thr - D - m g sin(gamma)) / m.

    sin(gamma) = hdot / v, clamped to [-1, 1].
    """
    _check_state(v, h)
    atm = atmosphere_at(h, params.dT)
    thrust = thrust_at(h, model)
    drag = drag_at(v, atm.density, params.m, model)
    sin_gamma = min(1.0, max(-1.0, hdot / v))
    return (thrust - drag - params.m * ISA.g * sin_gamma) / params.m


def schedule_breakpoints(params: TuningParams, cfg: DynamicsConfig) -> List[float]:
    """Altitudes (m) where the target CAS/Mach changes."""
    points = [fl * FL for fl, _ in cfg.below_fl60_schedule]
    points.append(SPEED_LIMIT_FL * FL)
    points.append(crossover_altitude(params.v2 * KT, params.mach))
    return points
