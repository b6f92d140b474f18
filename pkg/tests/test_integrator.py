"""
RK4 stepping, climb simulation and trajectory grid operations.

 Group 1 - Stepping on analytic systems: constants, exponential, convergence order
 Group 2 - Full model: self-convergence away from mode switches, numerical errors
 Group 3 - Simulation: termination, sample counts, determinism, level hold
 Group 4 - Grid operations: resample, align_and_pad, top of climb
"""

import math

import numpy as np
import pytest

from tests.helpers import start_state
from utils.dynamics import ClimbSystem, HybridSystem, State
from utils.errors import DomainError, EnvelopeError, NumericalError
from utils.integrator import (
    Termination,
    Trajectory,
    align_and_pad,
    integrate,
    initial_state,
    resample,
    rk4_step,
    simulate,
    top_of_climb,
)
from utils.modes import AccelMode, AltitudeBand, Mode, SpeedMode
from utils.units import FL

Q0 = Mode(SpeedMode.CAS, AltitudeBand.LOW, AccelMode.CST)


class ConstantSystem(HybridSystem):
    def __init__(self, rate):
        self.rate = rate

    def mode(self, t, h, v):
        return Q0

    def f1(self, t, h, v, q):
        return self.rate

    def f2(self, t, h, v, hdot):
        return 0.0


class ExponentialSystem(HybridSystem):
    """h' = h, v' = hdot: both grow like e^t."""

    def mode(self, t, h, v):
        return Q0

    def f1(self, t, h, v, q):
        return h

    def f2(self, t, h, v, hdot):
        return hdot


class BrokenSystem(ConstantSystem):
    def f1(self, t, h, v, q):
        return math.nan if h > 10.0 else 1.0


def _traj(n, dt=1.0, h=None):
    t = np.arange(n) * dt
    h = np.arange(n, dtype=float) if h is None else np.asarray(h, dtype=float)
    return Trajectory(t0=0.0, dt=dt, t=t, h=h, v=np.full(n, 100.0), roc=np.zeros(n))


# ── Analytic systems ─────────────────────────────────────────────────────────

class TestStepping:

    def test_constant_field_is_exact(self):
        s = rk4_step(ConstantSystem(3.0), State(0.0, Q0, 100.0, 50.0), 0.5)
        assert s.h == pytest.approx(101.5, abs=1e-12)
        assert s.v == 50.0
        assert s.t == 0.5

    def test_exponential_matches_taylor_polynomial(self):
        dt = 0.1
        s = rk4_step(ExponentialSystem(), State(0.0, Q0, 1.0, 1.0), dt)
        taylor = 1 + dt + dt ** 2 / 2 + dt ** 3 / 6 + dt ** 4 / 24
        assert s.h == pytest.approx(taylor, abs=1e-15)
        assert abs(s.h - math.exp(dt)) / math.exp(dt) < 1e-7

    def test_speed_slope_uses_altitude_slope(self):
        s = rk4_step(ExponentialSystem(), State(0.0, Q0, 1.0, 1.0), 0.1)
        assert s.v == pytest.approx(s.h, abs=1e-15)

    def test_fourth_order_convergence(self):
        def error(dt):
            s = State(0.0, Q0, 1.0, 1.0)
            for _ in range(int(round(1.0 / dt))):
                s = rk4_step(ExponentialSystem(), s, dt)
            return abs(s.h - math.e)

        assert 14.0 <= error(0.1) / error(0.05) <= 18.0

    def test_non_positive_step(self):
        with pytest.raises(DomainError):
            rk4_step(ConstantSystem(1.0), State(0.0, Q0, 0.0, 1.0), 0.0)

    def test_non_finite_slope_carries_state(self):
        s = State(0.0, Q0, 10.5, 1.0)
        with pytest.raises(NumericalError) as exc:
            rk4_step(BrokenSystem(1.0), s, 1.0)
        assert exc.value.state == s


# ── Full model ───────────────────────────────────────────────────────────────

class TestClimbSystem:

    def test_self_convergence_without_mode_switches(self, model, nominal, dyn_cfg):
        system = ClimbSystem(nominal, dyn_cfg, model)
        s0 = initial_state(3500.0, 100.0, 0.0, nominal, dyn_cfg, model)
        assert s0.q.q3 is AccelMode.ACC

        def endpoint(dt):
            outcome = integrate(system, s0, None, 60.0, dt)
            assert outcome.mode_switch_count == 0
            return outcome.final_state

        ref = endpoint(0.01)

        def error(dt):
            s = endpoint(dt)
            return abs(s.h - ref.h) + 10.0 * abs(s.v - ref.v)

        assert error(4.0) / error(2.0) >= 12.0

    def test_invalid_state_raises(self, model, nominal, dyn_cfg):
        system = ClimbSystem(nominal, dyn_cfg, model)
        s = State(0.0, Q0, 1000.0, -5.0)
        with pytest.raises(NumericalError):
            rk4_step(system, s, 1.0)


# ── Simulation ───────────────────────────────────────────────────────────────

class TestSimulate:

    def test_level_at_start(self, model, nominal, dyn_cfg):
        s0 = initial_state(15 * FL, 90.0, 0.0, nominal, dyn_cfg, model)
        outcome = simulate(nominal, s0, 15.0, 600.0, 1.0, dyn_cfg, model)
        assert len(outcome.trajectory) == 1
        assert outcome.termination is Termination.REACHED_LEVEL

    def test_horizon_sample_count(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        outcome = simulate(nominal, s0, None, 10.0, 1.0, dyn_cfg, model)
        assert len(outcome.trajectory) == 11
        assert outcome.termination is Termination.HORIZON

    def test_nominal_climb_to_cruise(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        outcome = simulate(nominal, s0, 350.0, 3600.0, 1.0, dyn_cfg, model)
        h = outcome.trajectory.h
        assert outcome.termination is Termination.REACHED_LEVEL
        assert np.all(np.diff(h) >= 0)
        assert h[-1] == 350.0 * FL
        assert outcome.trajectory.roc[-1] == 0.0
        assert outcome.mode_switch_count > 0

    @pytest.mark.parametrize("mass", [58000.0, 64000.0, 70000.0])
    def test_mode_switch_budget(self, model, nominal, dyn_cfg, mass):
        theta = nominal.with_values(m=mass)
        s0 = start_state(theta, dyn_cfg, model)
        outcome = simulate(theta, s0, 350.0, 3600.0, 1.0, dyn_cfg, model)
        assert 0 < outcome.mode_switch_count <= 64

    def test_deterministic(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        a = simulate(nominal, s0, 200.0, 900.0, 1.0, dyn_cfg, model).trajectory
        b = simulate(nominal, s0, 200.0, 900.0, 1.0, dyn_cfg, model).trajectory
        assert np.array_equal(a.h, b.h) and np.array_equal(a.v, b.v)

    def test_level_is_held(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        outcome = simulate(nominal, s0, 100.0, 1200.0, 1.0, dyn_cfg, model, hold_until=1200.0)
        traj = outcome.trajectory
        assert len(traj) == 1201
        toc = top_of_climb(traj)
        assert np.all(traj.h[toc:] == 100.0 * FL)
        assert np.all(traj.roc[toc:] == 0.0)

    def test_heavier_is_lower(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        light = simulate(nominal.with_values(m=50000.0), s0, None, 600.0, 1.0, dyn_cfg, model)
        heavy = simulate(nominal.with_values(m=75000.0), s0, None, 600.0, 1.0, dyn_cfg, model)
        assert light.trajectory.h[-1] > heavy.trajectory.h[-1]

    def test_level_above_ceiling(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        with pytest.raises(EnvelopeError):
            simulate(nominal, s0, 900.0, 600.0, 1.0, dyn_cfg, model)

    def test_non_positive_horizon(self, model, nominal, dyn_cfg):
        s0 = start_state(nominal, dyn_cfg, model)
        with pytest.raises(DomainError):
            simulate(nominal, s0, None, 0.0, 1.0, dyn_cfg, model)


# ── Grid operations ──────────────────────────────────────────────────────────

class TestGrid:

    def test_resample_decimates(self):
        out = resample(_traj(11), 5.0)
        assert list(out.t) == [0.0, 5.0, 10.0]
        assert out.dt == 5.0

    def test_resample_identity(self):
        traj = _traj(7)
        assert resample(traj, 1.0) is traj

    def test_resample_non_multiple(self):
        with pytest.raises(DomainError):
            resample(_traj(11, dt=2.0), 5.0)

    def test_pad_equal_lengths(self):
        pred_h, obs_h = align_and_pad(_traj(5), _traj(5), 350.0)
        assert np.array_equal(pred_h, np.arange(5.0)) and np.array_equal(obs_h, np.arange(5.0))

    def test_pad_observation(self):
        pred_h, obs_h = align_and_pad(_traj(10), _traj(8), 350.0)
        assert len(pred_h) == len(obs_h) == 10
        assert np.array_equal(obs_h[8:], [350.0 * FL, 350.0 * FL])

    def test_pad_prediction(self):
        pred_h, obs_h = align_and_pad(_traj(6), _traj(9), 350.0)
        assert len(pred_h) == 9
        assert np.array_equal(pred_h[6:], np.full(3, 350.0 * FL))

    def test_misaligned_epochs(self):
        shifted = Trajectory(t0=5.0, dt=1.0, t=np.arange(5) + 5.0, h=np.zeros(5),
                             v=np.ones(5), roc=np.zeros(5))
        with pytest.raises(DomainError):
            align_and_pad(_traj(5), shifted, 350.0)

    def test_irregular_spacing_rejected(self):
        with pytest.raises(DomainError):
            Trajectory(t0=0.0, dt=1.0, t=[0.0, 1.0, 2.5], h=[0, 0, 0], v=[1, 1, 1], roc=[0, 0, 0])

    def test_top_of_climb_first_maximum(self):
        assert top_of_climb(_traj(6, h=[0, 1, 3, 3, 3, 2])) == 2
