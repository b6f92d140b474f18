"""
Hybrid RK4 Integrator

Fourth-order Runge-Kutta stepping of the coupled (h, V) system. The mode
is re-derived at each of the four slope points, and each speed slope uses
the altitude slope of the same point. Also: trajectory simulation with
level-off/horizon/ceiling termination, decimation to the observation grid,
and level padding of trajectory pairs.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from utils.atmosphere import atmosphere_at
from utils.dynamics import ClimbSystem, DynamicsConfig, HybridSystem, State, TuningParams
from utils.errors import DomainError, EnvelopeError, NumericalError
from utils.performance import AircraftPerfModel, envelope_check_at
from utils.units import FL


logger = logging.getLogger(__name__)

SPACING_RTOL = 1e-6


@dataclass
class Trajectory:
    """
    Uniformly sampled climb: time (s), altitude (m), TAS (m/s), rate of climb (m/s).

    Samples are stored as parallel numpy arrays of equal length.
    """

    t0: float
    dt: float
    t: np.ndarray
    h: np.ndarray
    v: np.ndarray
    roc: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.roc = np.asarray(self.roc, dtype=float)
        n = len(self.t)
        if n == 0:
            raise DomainError("trajectory must not be empty")
        if not (len(self.h) == len(self.v) == len(self.roc) == n):
            raise DomainError("trajectory columns differ in length")
        if not self.dt > 0:
            raise DomainError(f"sample interval must be strictly positive, got {self.dt}")
        if abs(self.t[0] - self.t0) > SPACING_RTOL * self.dt:
            raise DomainError(f"first timestamp {self.t[0]} differs from t0 {self.t0}")
        if n > 1:
            steps = np.diff(self.t)
            if np.any(np.abs(steps - self.dt) > SPACING_RTOL * self.dt):
                raise DomainError(f"timestamps are not spaced by {self.dt} s")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t0)

    def head(self, n: int) -> "Trajectory":
        """First n samples."""
        if not 1 <= n <= len(self):
            raise DomainError(f"cannot take {n} samples from a trajectory of {len(self)}")
        return Trajectory(self.t0, self.dt, self.t[:n], self.h[:n], self.v[:n], self.roc[:n])

    def until(self, duration: float) -> "Trajectory":
        """Samples with t - t0 <= duration."""
        n = int(math.floor(duration / self.dt + 1e-9)) + 1
        return self.head(min(n, len(self)))


class Termination(Enum):
    REACHED_LEVEL = "reached_level"
    HORIZON = "horizon"
    CEILING = "ceiling"


@dataclass
class SimulationOutcome:
    """Result of one simulation run."""

    trajectory: Trajectory
    termination: Termination
    clamp_incidents: int = 0
    mode_switch_count: int = 0
    envelope_violations: Tuple[str, ...] = field(default_factory=tuple)
    final_state: Optional[State] = None


# ===================== STEPPING =====================

def _checked_slope(system: HybridSystem, s: State, t: float, h: float, v: float):
    q, dh, dv = system.slope(t, h, v)
    if not (math.isfinite(dh) and math.isfinite(dv)):
        raise NumericalError(f"non-finite slope at t={t:.3f} h={h:.3f} v={v:.3f}", state=s)
    return q, dh, dv


def _rk4(system: HybridSystem, s: State, dt: float) -> Tuple[State, float, int]:
    """One step; also returns the first altitude slope and the sin(gamma) clamp count."""
    half = 0.5 * dt
    try:
        _, dh1, dv1 = _checked_slope(system, s, s.t, s.h, s.v)
        _, dh2, dv2 = _checked_slope(system, s, s.t + half, s.h + dh1 * half, s.v + dv1 * half)
        _, dh3, dv3 = _checked_slope(system, s, s.t + half, s.h + dh2 * half, s.v + dv2 * half)
        _, dh4, dv4 = _checked_slope(system, s, s.t + dt, s.h + dh3 * dt, s.v + dv3 * dt)
    except NumericalError as e:
        if e.state is None:
            e.state = s
        raise

    h = s.h + dt / 6.0 * (dh1 + 2.0 * dh2 + 2.0 * dh3 + dh4)
    v = s.v + dt / 6.0 * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
    if not (math.isfinite(h) and math.isfinite(v)):
        raise NumericalError(f"non-finite state after step from t={s.t:.3f}", state=s)

    clamps = 0
    for dh, vs in ((dh1, s.v), (dh2, s.v + dv1 * half), (dh3, s.v + dv2 * half), (dh4, s.v + dv3 * dt)):
        if abs(dh) > vs:
            clamps += 1

    t = s.t + dt
    try:
        q = system.mode(t, h, v)
    except NumericalError as e:
        e.state = s
        raise
    return State(t=t, q=q, h=h, v=v), dh1, clamps


def rk4_step(system: HybridSystem, s: State, dt: float) -> State:
    """
    Advance the hybrid state by one RK4 step.

    Args:
        system: Slope functions (ClimbSystem for the aircraft model).
        s: Current state.
        dt: Step in seconds.

    Returns:
        The new state, with its mode derived from the updated (h, V).

    Raises:
        NumericalError: If any intermediate value is not finite.
    """
    if not dt > 0:
        raise DomainError(f"step must be strictly positive, got {dt}")
    return _rk4(system, s, dt)[0]


# ===================== SIMULATION =====================

def integrate(
    system: HybridSystem,
    s0: State,
    level_h: Optional[float],
    horizon: float,
    dt: float = 1.0,
    hold_until: Optional[float] = None,
) -> SimulationOutcome:
    """
    Step a hybrid system and record one sample per step.

    Stops when the altitude reaches level_h (the last sample is clamped to
    the level with zero rate of climb), when t - t0 reaches the horizon, or
    when the system ceiling is reached. After a level-off, samples at the
    level are appended until t - t0 reaches hold_until.

    Args:
        system: Slope functions.
        s0: Initial state.
        level_h: Level-off altitude in metres, or None.
        horizon: Maximum simulated duration in seconds.
        dt: Step and sample interval in seconds.
        hold_until: Duration up to which the level is held, or None.

    Returns:
        SimulationOutcome with the trajectory and run statistics.
    """
    if not horizon > 0:
        raise DomainError(f"horizon must be strictly positive, got {horizon}")
    if not dt > 0:
        raise DomainError(f"step must be strictly positive, got {dt}")
    ceiling = system.ceiling()
    if level_h is not None and level_h > ceiling:
        raise EnvelopeError(f"level {level_h / FL:.1f} FL above ceiling {ceiling / FL:.1f} FL")

    s = replace(s0, q=system.mode(s0.t, s0.h, s0.v))
    ts: List[float] = []
    hs: List[float] = []
    vs: List[float] = []
    rocs: List[float] = []
    violations: List[str] = []
    clamps = 0
    switches = 0
    k = 0

    while True:
        for kind in _violations(system, s):
            if kind not in violations:
                violations.append(kind)
        if level_h is not None and s.h >= level_h:
            s = replace(s, h=level_h)
            ts.append(s.t)
            hs.append(level_h)
            vs.append(s.v)
            rocs.append(0.0)
            termination = Termination.REACHED_LEVEL
            break
        at_ceiling = s.h >= ceiling
        at_horizon = k * dt >= horizon * (1.0 - 1e-12)
        if at_ceiling or at_horizon:
            ts.append(s.t)
            hs.append(s.h)
            vs.append(s.v)
            rocs.append(_checked_slope(system, s, s.t, s.h, s.v)[1])
            termination = Termination.CEILING if at_ceiling else Termination.HORIZON
            break

        s_next, roc, n_clamps = _rk4(system, s, dt)
        ts.append(s.t)
        hs.append(s.h)
        vs.append(s.v)
        rocs.append(roc)
        clamps += n_clamps
        if s_next.q != s.q:
            switches += 1
        k += 1
        s = replace(s_next, t=s0.t + k * dt)

    if termination is Termination.REACHED_LEVEL and hold_until is not None:
        while k * dt < hold_until * (1.0 - 1e-12):
            k += 1
            ts.append(s0.t + k * dt)
            hs.append(level_h)
            vs.append(s.v)
            rocs.append(0.0)

    if clamps:
        logger.warning(f"sin(gamma) clamped {clamps} times during simulation")
    if violations:
        logger.warning(f"Flight envelope violated during simulation: {', '.join(violations)}")

    trajectory = Trajectory(t0=s0.t, dt=dt, t=ts, h=hs, v=vs, roc=rocs)
    return SimulationOutcome(
        trajectory=trajectory,
        termination=termination,
        clamp_incidents=clamps,
        mode_switch_count=switches,
        envelope_violations=tuple(violations),
        final_state=s,
    )


def _violations(system: HybridSystem, s: State) -> Tuple[str, ...]:
    if not isinstance(system, ClimbSystem):
        return ()
    try:
        atm = atmosphere_at(s.h, system.params.dT)
    except DomainError:
        atm = None
    return envelope_check_at(s.v, s.h, atm, system.model).violations


def simulate(
    params: TuningParams,
    s0: State,
    level_fl: Optional[float],
    horizon: float,
    dt: float,
    cfg: DynamicsConfig,
    model: AircraftPerfModel,
    hold_until: Optional[float] = None,
) -> SimulationOutcome:
    """
    Simulate a climb of the aircraft model.

    Args:
        params: Tuning parameters.
        s0: Initial state.
        level_fl: Cruise flight level, or None for no level-off.
        horizon: Maximum duration in seconds.
        dt: Step in seconds.
        cfg: Dynamics configuration.
        model: Aircraft coefficients.
        hold_until: Pad the level segment up to this duration.

    Returns:
        SimulationOutcome; identical inputs give identical outputs.

    Raises:
        EnvelopeError: If the level is above the ceiling.
        NumericalError: If the integration produced non-finite values.
    """
    level_h = None if level_fl is None else level_fl * FL
    return integrate(ClimbSystem(params, cfg, model), s0, level_h, horizon, dt, hold_until)


def initial_state(h: float, v_tas: float, t0: float, params: TuningParams,
                  cfg: DynamicsConfig, model: AircraftPerfModel) -> State:
    """State at (h, v_tas) with its mode derived from the dynamics."""
    system = ClimbSystem(params, cfg, model)
    return State(t=t0, q=system.mode(t0, h, v_tas), h=h, v=v_tas)


# ===================== GRID OPERATIONS =====================

def resample(traj: Trajectory, dt_out: float) -> Trajectory:
    """
    Keep every (dt_out / dt)-th sample starting at the first one.

    Raises:
        DomainError: If dt_out is not an integer multiple of the trajectory dt.
    """
    ratio = dt_out / traj.dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9 * max(1.0, ratio):
        raise DomainError(f"{dt_out} s is not a multiple of {traj.dt} s")
    if stride == 1:
        return traj
    return Trajectory(
        t0=traj.t0,
        dt=float(dt_out),
        t=traj.t[::stride],
        h=traj.h[::stride],
        v=traj.v[::stride],
        roc=traj.roc[::stride],
    )


def align_and_pad(pred: Trajectory, obs: Trajectory, level_fl: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Altitude sequences of equal length.

    The shorter sequence is extended with the level altitude: the
    observation when the prediction levels off later, the prediction when
    it levels off earlier.

    Returns:
        (predicted altitudes, observed altitudes) in metres.

    Raises:
        DomainError: If sample intervals or epochs differ.
    """
    if abs(pred.dt - obs.dt) > SPACING_RTOL * obs.dt:
        raise DomainError(f"sample intervals differ: {pred.dt} vs {obs.dt}")
    if abs(pred.t0 - obs.t0) > SPACING_RTOL * obs.dt:
        raise DomainError(f"epochs differ: {pred.t0} vs {obs.t0}")
    return pad_to(pred.h, obs.h, level_fl * FL)


def pad_to(a: np.ndarray, b: np.ndarray, level_h: float) -> Tuple[np.ndarray, np.ndarray]:
    n = max(len(a), len(b))
    return _pad(a, n, level_h), _pad(b, n, level_h)


def _pad(x: np.ndarray, n: int, value: float) -> np.ndarray:
    if len(x) >= n:
        return x
    return np.concatenate([x, np.full(n - len(x), value)])


def top_of_climb(traj: Trajectory) -> int:
    """Index of the first sample attaining the maximum altitude."""
    return int(np.argmax(traj.h))
