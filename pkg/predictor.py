"""
Climb Trajectory Predictor

Core engine for tuning the five climb parameters (mass, temperature offset,
two CAS values and the climb Mach) against observed altitude tracks.

Offline: minimize the summed absolute altitude error (FL) between the
simulated and the observed climb up to the top of climb.

Online: from an observed prefix, fit a recency-weighted error plus an L1
pull towards the default parameters, pick the regularization weight on a
held-out validation window just before the present, and fall back to the
defaults when even the best fit validates poorly.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.cmaes import CmaConfig, minimize
from utils.dataio import load_yaml
from utils.dynamics import PARAM_NAMES, DynamicsConfig, ParamBounds, State, TuningParams
from utils.errors import ConfigError, DomainError, NoCrossoverError, NumericalError, PrefixTooShortError
from utils.integrator import (
    Trajectory,
    align_and_pad,
    initial_state,
    pad_to,
    resample,
    simulate,
    top_of_climb,
)
from utils.performance import AircraftPerfModel
from utils.units import FL


logger = logging.getLogger(__name__)

STRATEGIES = ("regularized", "naive")
WEIGHT_SCHEMES = ("linear",)


class PredictorConfig:
    """Configuration for the predictor."""

    def __init__(
        self,
        dt: float = 1.0,
        horizon_slack_s: float = 600.0,
        sentinel: float = 1e9,
        sigma0: float = 0.3,
        target_error_fl: float = 0.01,
    ):
        self.dt = float(dt)  # integration step, s
        self.horizon_slack_s = float(horizon_slack_s)  # simulated beyond the observation, s
        self.sentinel = float(sentinel)  # objective value for failed simulations
        self.sigma0 = float(sigma0)
        self.target_error_fl = float(target_error_fl)  # offline fit stops at this mean error, FL
        if not self.dt > 0:
            raise ConfigError("dt", "must be strictly positive")
        if self.horizon_slack_s < 0:
            raise ConfigError("horizon_slack_s", "must not be negative")
        if self.target_error_fl < 0:
            raise ConfigError("target_error_fl", "must not be negative")

    @classmethod
    def from_dict(cls, values: Optional[Mapping[str, Any]]) -> "PredictorConfig":
        return cls(**_known(values, {"dt", "horizon_slack_s", "sentinel", "sigma0", "target_error_fl"},
                          "predictor"))


class OnlineConfig:
    """
    Online predictor settings.

    Args:
        validation_points: Samples held out just before the present.
        lambda0: First regularization weight.
        lambda_growth: Factor between successive weights.
        fallback_threshold: Validation error (FL) above which the defaults are kept.
        weight_scheme: Recency weighting of the learning samples.
        evals_budget: Optimizer evaluations per fit.
        max_doublings: Growth steps after lambda0.
        convergence_tol: Stop growing once the fit is this close to the defaults (unit box, max norm).
        strategy: "regularized" or "naive" (unweighted, unregularized, no validation).
    """

    def __init__(
        self,
        validation_points: int = 36,
        lambda0: float = 100.0,
        lambda_growth: float = 2.0,
        fallback_threshold: float = 5.0,
        weight_scheme: str = "linear",
        evals_budget: int = 300,
        max_doublings: int = 12,
        convergence_tol: float = 1e-3,
        strategy: str = "regularized",
    ):
        self.validation_points = int(validation_points)
        self.lambda0 = float(lambda0)
        self.lambda_growth = float(lambda_growth)
        self.fallback_threshold = float(fallback_threshold)
        self.weight_scheme = weight_scheme
        self.evals_budget = int(evals_budget)
        self.max_doublings = int(max_doublings)
        self.convergence_tol = float(convergence_tol)
        self.strategy = strategy

        if self.validation_points < 1:
            raise ConfigError("validation_points", "must be at least 1")
        if not self.lambda0 > 0:
            raise ConfigError("lambda0", "must be strictly positive")
        if not self.lambda_growth > 1:
            raise ConfigError("lambda_growth", "must be greater than 1")
        if not self.fallback_threshold > 0:
            raise ConfigError("fallback_threshold", "must be strictly positive")
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise ConfigError("weight_scheme", f"must be one of {', '.join(WEIGHT_SCHEMES)}")
        if self.evals_budget < 1:
            raise ConfigError("evals_budget", "must be at least 1")
        if self.max_doublings < 0:
            raise ConfigError("max_doublings", "must not be negative")
        if self.strategy not in STRATEGIES:
            raise ConfigError("strategy", f"must be one of {', '.join(STRATEGIES)}")

    @classmethod
    def from_dict(cls, values: Optional[Mapping[str, Any]], **overrides: Any) -> "OnlineConfig":
        known = {
            "validation_points", "lambda0", "lambda_growth", "fallback_threshold", "weight_scheme",
            "evals_budget", "max_doublings", "convergence_tol", "strategy",
        }
        merged = _known(values, known, "online")
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**merged)


def _known(values: Optional[Mapping[str, Any]], known: set, section: str) -> dict:
    merged = dict(values or {})
    for key in sorted(set(merged) - known):
        logger.warning(f"Unknown {section} setting ignored: {key}")
        merged.pop(key)
    return merged


def load_online_config(path: Union[str, Path], **overrides: Any) -> OnlineConfig:
    return OnlineConfig.from_dict(load_yaml(path), **overrides)


@dataclass
class FitResult:
    """
    Outcome of one fit.

    Attributes:
        theta: Fitted parameters (the defaults when fell_back_to_default).
        objective: Objective value at theta.
        evals: Objective evaluations spent.
        lambda_used: Regularization weight of the chosen fit (online only).
        fell_back_to_default: The validation error exceeded the threshold.
        validation_error: Mean absolute validation error in FL (online only).
        lambda_trace: (lambda, validation error) per tried weight.
        repaired: v2 was raised to v1 when decoding the optimizer point.
    """

    theta: TuningParams
    objective: float
    evals: int
    lambda_used: Optional[float] = None
    fell_back_to_default: bool = False
    validation_error: Optional[float] = None
    lambda_trace: List[Tuple[float, float]] = field(default_factory=list)
    repaired: bool = False


# ===================== PARAMETER SCALING =====================

def normalize(theta: TuningParams, bounds: ParamBounds) -> np.ndarray:
    """
    Map parameters to the unit box.

    Raises:
        DomainError: If theta lies outside the bounds.
    """
    if not bounds.contains(theta):
        raise DomainError(f"parameters {theta.as_dict()} outside bounds")
    lows = np.asarray(bounds.lows)
    highs = np.asarray(bounds.highs)
    x = (np.asarray(theta.as_tuple()) - lows) / (highs - lows)
    return np.clip(x, 0.0, 1.0)


def denormalize(x: Sequence[float], bounds: ParamBounds) -> Tuple[TuningParams, bool]:
    """
    Map a unit-box point to parameters, raising v2 to v1 when needed.

    Returns:
        (parameters, whether v2 was repaired).

    Raises:
        DomainError: If x has the wrong size or leaves the unit box.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (len(PARAM_NAMES),):
        raise DomainError(f"expected {len(PARAM_NAMES)} coordinates, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
        raise DomainError(f"point {x} outside the unit box")
    lows = np.asarray(bounds.lows)
    highs = np.asarray(bounds.highs)
    values = dict(zip(PARAM_NAMES, (float(v) for v in lows + x * (highs - lows))))
    repaired = values["v2"] < values["v1"]
    if repaired:
        values["v2"] = values["v1"]
    return TuningParams(**values), repaired


def linear_weights(t: int) -> np.ndarray:
    """
    Recency weights i / (t - 1) for i = 0..t-1.

    Raises:
        DomainError: If t < 2.
    """
    if t < 2:
        raise DomainError(f"at least two samples are needed for weights, got {t}")
    return np.arange(t, dtype=float) / (t - 1)


def sum_abs_error_fl(pred_h: np.ndarray, obs_h: np.ndarray, i: int, j: int) -> float:
    """Sum of |pred - obs| in FL over indices i..j inclusive."""
    return float(np.sum(np.abs(pred_h[i: j + 1] - obs_h[i: j + 1]))) / FL


class ClimbPredictor:
    """
    Fitting engine bound to one aircraft model and configuration set.

    Workflow:
    1. Offline: fit_offline on a whole climb up to its top of climb.
    2. Online: predict_online on the prefix observed so far.
    """

    def __init__(
        self,
        model: AircraftPerfModel,
        bounds: Optional[ParamBounds] = None,
        dynamics: Optional[DynamicsConfig] = None,
        cma: Optional[CmaConfig] = None,
        online: Optional[OnlineConfig] = None,
        config: Optional[PredictorConfig] = None,
    ):
        """
        Initialize the predictor.

        Args:
            model: Aircraft coefficients.
            bounds: Parameter search box (shipped bounds if None).
            dynamics: Hybrid system configuration (defaults if None).
            cma: Optimizer settings (defaults if None).
            online: Online predictor settings (defaults if None).
            config: Predictor settings (defaults if None).
        """
        self.model = model
        self.bounds = bounds or ParamBounds()
        self.bounds.check_model(model)
        self.dynamics = dynamics or DynamicsConfig()
        self.cma = cma or CmaConfig(dimension=len(PARAM_NAMES))
        if self.cma.dimension != len(PARAM_NAMES):
            raise ConfigError("dimension", f"must be {len(PARAM_NAMES)} for parameter fits")
        self.online = online or OnlineConfig()
        self.config = config or PredictorConfig()
        self.theta_default = TuningParams.nominal(model)
        self.x_default = self._clamped_normalize(self.theta_default)

    def _clamped_normalize(self, theta: TuningParams) -> np.ndarray:
        lows = np.asarray(self.bounds.lows)
        highs = np.asarray(self.bounds.highs)
        return np.clip((np.asarray(theta.as_tuple()) - lows) / (highs - lows), 0.0, 1.0)

    def initial_state(self, obs: Trajectory) -> State:
        """State at the first observed sample."""
        return initial_state(float(obs.h[0]), float(obs.v[0]), obs.t0,
                             self.theta_default, self.dynamics, self.model)

    def predict(self, theta: TuningParams, s0: State, horizon: float,
                level_fl: Optional[float] = None, dt_out: float = 5.0) -> Trajectory:
        """
        Simulate from s0 over horizon seconds on the dt_out grid.

        After a level-off the level is held until the horizon.
        """
        outcome = simulate(theta, s0, level_fl, horizon, self.config.dt, self.dynamics,
                           self.model, hold_until=horizon)
        return resample(outcome.trajectory, dt_out)

    # ===================== OFFLINE FIT =====================

    def offline_objective(self, theta: TuningParams, obs: Trajectory, s0: State,
                          i: int, j: int, level_fl: float) -> float:
        """
        Summed absolute altitude error in FL over samples i..j inclusive.

        The prediction stops at the level; whichever sequence is shorter is
        padded with the level altitude.

        Returns:
            The error sum, or the sentinel if the simulation failed.

        Raises:
            DomainError: If i..j is not a valid index range of the padded pair.
        """
        horizon = obs.duration + self.config.horizon_slack_s
        try:
            outcome = simulate(theta, s0, level_fl, max(horizon, obs.dt), self.config.dt,
                               self.dynamics, self.model)
        except (NumericalError, NoCrossoverError) as e:
            logger.debug(f"simulation failed for {theta.as_dict()}: {e}")
            return self.config.sentinel
        pred = resample(outcome.trajectory, obs.dt)
        pred_h, obs_h = align_and_pad(pred, obs, level_fl)
        if not 0 <= i <= j < len(obs_h):
            raise DomainError(f"index range [{i}, {j}] outside 0..{len(obs_h) - 1}")
        return sum_abs_error_fl(pred_h, obs_h, i, j)

    def fit_offline(self, obs: Trajectory, s0: Optional[State] = None,
                    i: int = 0, j: Optional[int] = None,
                    level_fl: Optional[float] = None) -> FitResult:
        """
        Fit the parameters to a whole climb.

        Args:
            obs: Observed trajectory on the observation grid.
            s0: Initial state (the first observed sample if None).
            i: First sample of the error sum.
            j: Last sample of the error sum (the top of climb if None).
            level_fl: Level-off FL (the observed top-of-climb altitude if None).

        Returns:
            FitResult; never worse than the default parameters.
        """
        s0 = s0 or self.initial_state(obs)
        toc = top_of_climb(obs)
        j = toc if j is None else j
        level_fl = float(obs.h[toc] / FL) if level_fl is None else level_fl

        def objective(x: np.ndarray) -> float:
            theta, _ = denormalize(x, self.bounds)
            return self.offline_objective(theta, obs, s0, i, j, level_fl)

        target_f = self.cma.target_f
        if target_f is None:
            target_f = self.config.target_error_fl * (j - i + 1)
        cfg = self.cma.copy(sigma0=self.config.sigma0, target_f=target_f)
        f_default = objective(self.x_default)
        result = minimize(objective, cfg, x0=self.x_default)
        evals = result.evals_used + 1

        if f_default <= result.f_best:
            x_best, value = self.x_default, f_default
        else:
            x_best, value = result.x_best, result.f_best
        theta, repaired = denormalize(x_best, self.bounds)
        logger.info(f"Offline fit: objective {value:.3f} FL after {evals} evaluations")
        return FitResult(theta=theta, objective=value, evals=evals, repaired=repaired)

    # ===================== ONLINE PREDICTION =====================

    def _prefix_altitudes(self, theta: TuningParams, s0: State, prefix: Trajectory) -> np.ndarray:
        horizon = max(prefix.duration, prefix.dt)
        outcome = simulate(theta, s0, None, horizon, self.config.dt, self.dynamics, self.model)
        pred_h = resample(outcome.trajectory, prefix.dt).h[: len(prefix)]
        if len(pred_h) < len(prefix):
            pred_h, _ = pad_to(pred_h, prefix.h, float(pred_h[-1]))
        return pred_h

    def online_objective(self, theta: TuningParams, obs_prefix: Trajectory, s0: State,
                         alpha: np.ndarray, lam: float,
                         theta_default: Optional[TuningParams] = None) -> float:
        """
        Weighted absolute altitude error (FL) plus lam times the L1 distance
        to the defaults in unit-box coordinates.

        Raises:
            DomainError: If alpha does not match the prefix length.
        """
        if len(alpha) != len(obs_prefix):
            raise DomainError(f"{len(alpha)} weights for {len(obs_prefix)} samples")
        theta_default = theta_default or self.theta_default
        try:
            pred_h = self._prefix_altitudes(theta, s0, obs_prefix)
        except (NumericalError, NoCrossoverError) as e:
            logger.debug(f"simulation failed for {theta.as_dict()}: {e}")
            return self.config.sentinel
        error = float(np.sum(alpha * np.abs(pred_h - obs_prefix.h))) / FL
        if lam == 0:
            return error
        deviation = self._clamped_normalize(theta) - self._clamped_normalize(theta_default)
        return error + lam * float(np.sum(np.abs(deviation)))

    def validation_error(self, theta: TuningParams, prefix: Trajectory, s0: State,
                         n_points: int) -> float:
        """Mean absolute altitude error (FL) over the last n_points samples."""
        try:
            pred_h = self._prefix_altitudes(theta, s0, prefix)
        except (NumericalError, NoCrossoverError):
            return math.inf
        return float(np.mean(np.abs(pred_h[-n_points:] - prefix.h[-n_points:]))) / FL

    def _fit_online(self, learn: Trajectory, s0: State, alpha: np.ndarray,
                    lam: float, seed: int) -> Tuple[TuningParams, float, int, bool]:
        def objective(x: np.ndarray) -> float:
            theta, _ = denormalize(x, self.bounds)
            return self.online_objective(theta, learn, s0, alpha, lam)

        cfg = self.cma.copy(sigma0=self.config.sigma0, max_evals=self.online.evals_budget, seed=seed)
        result = minimize(objective, cfg, x0=self.x_default)
        theta, repaired = denormalize(result.x_best, self.bounds)
        return theta, result.f_best, result.evals_used, repaired

    def predict_online(self, obs_prefix: Trajectory, s0: Optional[State] = None,
                       horizon: float = 1200.0,
                       level_fl: Optional[float] = None) -> Tuple[FitResult, Trajectory]:
        """
        Tune on the observed prefix and predict the rest of the climb.

        Args:
            obs_prefix: Observations from the start up to the present.
            s0: Initial state (the first observed sample if None).
            horizon: Prediction length from s0, seconds.
            level_fl: Cleared cruise level, or None to climb unrestricted.

        Returns:
            (FitResult, predicted trajectory on the observation grid).

        Raises:
            PrefixTooShortError: If the prefix cannot hold the validation
                window plus ten learning samples.
        """
        s0 = s0 or self.initial_state(obs_prefix)
        if self.online.strategy == "naive":
            fit = self._predict_naive(obs_prefix, s0)
        else:
            fit = self._predict_regularized(obs_prefix, s0)
        prediction = self.predict(fit.theta, s0, horizon, level_fl, obs_prefix.dt)
        return fit, prediction

    def _predict_regularized(self, prefix: Trajectory, s0: State) -> FitResult:
        cfg = self.online
        n_val = cfg.validation_points
        if len(prefix) <= n_val + 10:
            raise PrefixTooShortError(
                f"prefix of {len(prefix)} samples is too short for a {n_val}-point validation window"
            )
        learn = prefix.head(len(prefix) - n_val)
        alpha = linear_weights(len(learn))

        trace: List[Tuple[float, float]] = []
        best: Optional[Tuple[float, TuningParams, float, float, bool]] = None
        evals = 0
        lam = cfg.lambda0
        for k in range(cfg.max_doublings + 1):
            theta, value, used, repaired = self._fit_online(learn, s0, alpha, lam, self.cma.seed + k)
            evals += used
            val_err = self.validation_error(theta, prefix, s0, n_val)
            trace.append((lam, val_err))
            logger.debug(f"lambda {lam:g}: objective {value:.3f}, validation error {val_err:.3f} FL")
            if best is None or val_err < best[0]:
                best = (val_err, theta, lam, value, repaired)
            distance = float(np.max(np.abs(self._clamped_normalize(theta) - self.x_default)))
            if distance < cfg.convergence_tol:
                break
            lam *= cfg.lambda_growth

        val_err, theta, lam_used, value, repaired = best
        if val_err > cfg.fallback_threshold:
            logger.warning(
                f"Best validation error {val_err:.2f} FL above {cfg.fallback_threshold:g} FL; "
                f"keeping the default parameters"
            )
            return FitResult(
                theta=self.theta_default,
                objective=self.online_objective(self.theta_default, learn, s0, alpha, lam_used),
                evals=evals,
                lambda_used=lam_used,
                fell_back_to_default=True,
                validation_error=val_err,
                lambda_trace=trace,
            )
        return FitResult(
            theta=theta,
            objective=value,
            evals=evals,
            lambda_used=lam_used,
            validation_error=val_err,
            lambda_trace=trace,
            repaired=repaired,
        )

    def _predict_naive(self, prefix: Trajectory, s0: State) -> FitResult:
        if len(prefix) < 2:
            raise PrefixTooShortError("the naive fit needs at least two samples")
        alpha = np.ones(len(prefix))
        theta, value, evals, repaired = self._fit_online(prefix, s0, alpha, 0.0, self.cma.seed)
        return FitResult(theta=theta, objective=value, evals=evals, lambda_used=0.0, repaired=repaired)
