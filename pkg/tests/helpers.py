"""Climb builders shared by the test modules."""

import numpy as np

from utils.atmosphere import cas_to_tas
from utils.integrator import Trajectory, initial_state, resample, simulate
from utils.units import FL, FT, KT


def start_state(theta, cfg, model, alt_ft=1500.0, cas_kt=160.0):
    h0 = alt_ft * FT
    return initial_state(h0, cas_to_tas(cas_kt * KT, h0, theta.dT), 0.0, theta, cfg, model)


def observed_climb(theta, cfg, model, level_fl=350.0, duration=1500.0, noise_fl=0.0, seed=0):
    """Climb held at its level until duration, on the 5 s grid, optionally noisy."""
    s0 = start_state(theta, cfg, model)
    outcome = simulate(theta, s0, level_fl, duration, 1.0, cfg, model, hold_until=duration)
    traj = resample(outcome.trajectory, 5.0)
    if noise_fl <= 0:
        return traj
    rng = np.random.default_rng(seed)
    h = traj.h + rng.normal(0.0, noise_fl * FL, size=len(traj))
    return Trajectory(t0=traj.t0, dt=traj.dt, t=traj.t, h=h, v=traj.v, roc=np.gradient(h, traj.dt))
