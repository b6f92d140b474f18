"""
Hybrid system: parameter types, mode functions, target speed and vector fields.
"""

from dataclasses import replace

import numpy as np
import pytest

from utils.atmosphere import ISA, atmosphere_at, cas_to_tas, crossover_altitude, mach_to_tas
from utils.dynamics import (
    ClimbSystem,
    DynamicsConfig,
    ParamBounds,
    TuningParams,
    acceleration,
    mode_of,
    rate_of_climb,
    schedule_breakpoints,
    target_speed,
)
from utils.errors import ConfigError, DomainError
from utils.modes import AccelMode, AltitudeBand, Mode, SpeedMode, all_modes
from utils.performance import drag, energy_share_factor, max_climb_thrust
from utils.units import FL, KT

CAS_LOW_CST = Mode(SpeedMode.CAS, AltitudeBand.LOW, AccelMode.CST)


class TestTypes:

    def test_mode_space_size(self):
        assert len(set(all_modes())) == 12

    def test_v2_below_v1_rejected(self):
        with pytest.raises(DomainError):
            TuningParams(m=64000.0, dT=0.0, v1=260.0, v2=250.0, mach=0.78)

    def test_check_mass(self, model, nominal):
        nominal.check_mass(model)
        with pytest.raises(DomainError):
            nominal.with_values(m=model.mass_max + 1).check_mass(model)

    def test_bounds_reject_inverted_pair(self):
        with pytest.raises(ConfigError) as exc:
            ParamBounds.from_dict({"dT": [5, -5]})
        assert exc.value.key == "dT"

    def test_bounds_outside_mass_range(self, model):
        with pytest.raises(ConfigError):
            ParamBounds(m=(30000.0, 77000.0)).check_model(model)

    def test_bounds_contain_defaults(self, nominal):
        assert ParamBounds().contains(nominal)

    def test_schedule_must_end_at_fl60(self):
        with pytest.raises(ConfigError):
            DynamicsConfig(below_fl60_schedule=[(20, 170), (50, 220)])

    def test_schedule_must_increase(self):
        with pytest.raises(ConfigError):
            DynamicsConfig(below_fl60_schedule=[(30, 170), (20, 180), (60, 240)])

    def test_epsilon_positive(self):
        with pytest.raises(ConfigError):
            DynamicsConfig(epsilon_kt=0.0)


class TestModes:

    def test_at_target_is_constant(self, model, nominal, dyn_cfg):
        h = 4000.0
        v = target_speed(h, nominal, dyn_cfg, model)
        assert mode_of(v, h, nominal, dyn_cfg, model).q3 is AccelMode.CST

    def test_below_target_accelerates(self, model, nominal, dyn_cfg):
        h = 4000.0
        v = target_speed(h, nominal, dyn_cfg, model) - 2 * dyn_cfg.epsilon
        assert mode_of(v, h, nominal, dyn_cfg, model).q3 is AccelMode.ACC

    def test_above_target_decelerates(self, model, nominal, dyn_cfg):
        h = 4000.0
        v = target_speed(h, nominal, dyn_cfg, model) + 2 * dyn_cfg.epsilon
        assert mode_of(v, h, nominal, dyn_cfg, model).q3 is AccelMode.DEC

    def test_altitude_band(self, model, nominal, dyn_cfg):
        h = ISA.h_trop + 1.0
        v = target_speed(h, nominal, dyn_cfg, model)
        q = mode_of(v, h, nominal, dyn_cfg, model)
        assert q.q2 is AltitudeBand.HIGH
        assert q.q1 is SpeedMode.MACH

    def test_speed_mode_follows_crossover(self, model, nominal, dyn_cfg):
        h_cross = crossover_altitude(nominal.v2 * KT, nominal.mach)
        below = mode_of(200.0, h_cross - 10.0, nominal, dyn_cfg, model)
        above = mode_of(200.0, h_cross + 10.0, nominal, dyn_cfg, model)
        assert below.q1 is SpeedMode.CAS and above.q1 is SpeedMode.MACH

    def test_hysteresis_never_jumps_across(self, model, nominal, dyn_cfg):
        h = 5000.0
        target = target_speed(h, nominal, dyn_cfg, model)
        step = 1.9 * dyn_cfg.epsilon
        path = np.concatenate([
            np.arange(target - 6 * dyn_cfg.epsilon, target + 6 * dyn_cfg.epsilon, step),
            np.arange(target + 6 * dyn_cfg.epsilon, target - 6 * dyn_cfg.epsilon, -step),
        ])
        modes = [mode_of(v, h, nominal, dyn_cfg, model).q3 for v in path]
        for a, b in zip(modes, modes[1:]):
            assert {a, b} != {AccelMode.ACC, AccelMode.DEC}


class TestTargetSpeed:

    def test_v1_band(self, model, dyn_cfg):
        theta = TuningParams(m=64000.0, dT=5.0, v1=240.0, v2=300.0, mach=0.78)
        h = 80 * FL
        assert target_speed(h, theta, dyn_cfg, model) == pytest.approx(cas_to_tas(240 * KT, h, 5.0), rel=1e-12)

    def test_v1_capped_at_250(self, model, dyn_cfg):
        theta = TuningParams(m=64000.0, dT=0.0, v1=270.0, v2=300.0, mach=0.78)
        h = 80 * FL
        assert target_speed(h, theta, dyn_cfg, model) == pytest.approx(cas_to_tas(250 * KT, h), rel=1e-12)
        uncapped = DynamicsConfig(cap_250_below_fl100=False)
        assert target_speed(h, theta, uncapped, model) == pytest.approx(cas_to_tas(270 * KT, h), rel=1e-12)

    def test_v2_band(self, model, nominal, dyn_cfg):
        h = 150 * FL
        assert target_speed(h, nominal, dyn_cfg, model) == pytest.approx(cas_to_tas(310 * KT, h), rel=1e-12)

    def test_mach_above_crossover(self, model, nominal, dyn_cfg):
        h = 10000.0
        assert target_speed(h, nominal, dyn_cfg, model) == pytest.approx(mach_to_tas(0.78, h), rel=1e-12)

    def test_low_schedule_lookup(self, model, nominal):
        cfg = DynamicsConfig(below_fl60_schedule=[(15, 170), (40, 180), (60, 240)])
        h = 30 * FL
        assert target_speed(h, nominal, cfg, model) == pytest.approx(cas_to_tas(180 * KT, h), rel=1e-12)

    def test_low_schedule_ignores_parameters(self, model, dyn_cfg, nominal):
        other = nominal.with_values(v1=210.0, v2=280.0, mach=0.72)
        h = 45 * FL
        assert target_speed(h, other, dyn_cfg, model) == target_speed(h, nominal, dyn_cfg, model)

    def test_breakpoint_count(self, nominal, dyn_cfg):
        points = schedule_breakpoints(nominal, dyn_cfg)
        assert len(points) <= 3 + len(dyn_cfg.below_fl60_schedule)
        assert points == sorted(points)


class TestVectorFields:

    def test_rate_of_climb_formula(self, model, nominal):
        v, h = 150.0, 3000.0
        atm = atmosphere_at(h, nominal.dT)
        thrust = max_climb_thrust(h, nominal.dT, model)
        d = drag(v, h, nominal.dT, nominal.m, model)
        f = energy_share_factor(v, h, nominal.dT, CAS_LOW_CST, model)
        expected = model.c_red * (thrust - d) * v / (nominal.m * ISA.g) * f * (atm.temperature - nominal.dT) / atm.temperature
        assert rate_of_climb(v, h, CAS_LOW_CST, nominal, model) == pytest.approx(expected, rel=1e-12)

    def test_zero_excess_power(self, model, nominal):
        balanced = replace(model, ctc1=drag(150.0, 0.0, 0.0, nominal.m, model))
        assert rate_of_climb(150.0, 0.0, CAS_LOW_CST, nominal, balanced) == pytest.approx(0.0, abs=1e-9)
        assert acceleration(0.0, 150.0, 0.0, nominal, balanced) == pytest.approx(0.0, abs=1e-9)

    def test_temperature_factor_is_one_without_offset(self, model, nominal):
        q = Mode(SpeedMode.MACH, AltitudeBand.HIGH, AccelMode.CST)
        v, h = 230.0, 11500.0
        excess = max_climb_thrust(h, 0.0, model) - drag(v, h, 0.0, nominal.m, model)
        assert rate_of_climb(v, h, q, nominal, model) == pytest.approx(excess * v / (nominal.m * ISA.g), rel=1e-12)

    def test_vertical_flight(self, model, nominal):
        v, h = 150.0, 3000.0
        excess = max_climb_thrust(h, 0.0, model) - drag(v, h, 0.0, nominal.m, model)
        expected = (excess - nominal.m * ISA.g) / nominal.m
        assert acceleration(h, v, v, nominal, model) == pytest.approx(expected, rel=1e-12)
        assert acceleration(h, v, 5 * v, nominal, model) == pytest.approx(expected, rel=1e-12)

    def test_acceleration_formula(self, model, nominal):
        v, h, hdot = 160.0, 2500.0, 12.0
        excess = max_climb_thrust(h, 0.0, model) - drag(v, h, 0.0, nominal.m, model)
        expected = (excess - nominal.m * ISA.g * hdot / v) / nominal.m
        assert acceleration(h, v, hdot, nominal, model) == pytest.approx(expected, rel=1e-12)

    def test_heavier_climbs_slower(self, model, nominal):
        rocs = [rate_of_climb(150.0, 3000.0, CAS_LOW_CST, nominal.with_values(m=m), model)
                for m in (50000.0, 60000.0, 70000.0)]
        assert rocs[0] > rocs[1] > rocs[2] > 0

    def test_warmer_climbs_slower(self, model, nominal):
        cold = rate_of_climb(150.0, 3000.0, CAS_LOW_CST, nominal, model)
        warm = rate_of_climb(150.0, 3000.0, CAS_LOW_CST, nominal.with_values(dT=10.0), model)
        assert 0 < warm < cold

    def test_slope_matches_public_functions(self, model, nominal, dyn_cfg):
        system = ClimbSystem(nominal, dyn_cfg, model)
        h, v = 3500.0, 140.0
        q, dh, dv = system.slope(0.0, h, v)
        assert q == mode_of(v, h, nominal, dyn_cfg, model)
        assert dh == pytest.approx(rate_of_climb(v, h, q, nominal, model), rel=1e-12)
        assert dv == pytest.approx(acceleration(h, v, dh, nominal, model), rel=1e-12)
