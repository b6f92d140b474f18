"""
CMA-ES over the unit box

(mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
rank-one plus rank-mu covariance updates. Candidates leaving [0, 1]^n are
clamped before evaluation, and the squared clamping distance is added to
their ranking value. Strategy parameters follow the standard defaults.

Usage:
    es = CMAES(CmaConfig(dimension=5, seed=1))
    while not es.stop():
        xs = es.ask()
        es.tell(xs, [f(x) for x in xs])
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Mapping, Optional, Sequence

import numpy as np

from utils.errors import ConfigError, OptimizationError, UsageError


logger = logging.getLogger(__name__)

MAX_CONDITION = 1e14
STAGNATION_FACTOR = 30


class CmaConfig:
    """
    Optimizer settings.

    Args:
        dimension: Search space dimension.
        population: Candidates per generation (default 4 + floor(3 ln n)).
        sigma0: Initial step size in unit-box coordinates.
        max_evals: Total objective evaluation budget, restarts included.
        target_f: Stop once the best value is at or below this.
        seed: Seed of the normal variate stream.
        restarts: Extra independent runs after the first one stops.
        tolx: Stop when every coordinate standard deviation is below this.
        penalty: Weight of the squared box-clamping distance.
    """

    def __init__(
        self,
        dimension: int = 5,
        population: Optional[int] = None,
        sigma0: float = 0.3,
        max_evals: int = 5000,
        target_f: Optional[float] = None,
        seed: int = 42,
        restarts: int = 0,
        tolx: float = 1e-12,
        penalty: float = 1e4,
    ):
        self.dimension = int(dimension)
        self.population = (
            int(population) if population is not None
            else 4 + int(math.floor(3 * math.log(max(self.dimension, 1))))
        )
        self.sigma0 = float(sigma0)
        self.max_evals = int(max_evals)
        self.target_f = None if target_f is None else float(target_f)
        self.seed = int(seed)
        self.restarts = int(restarts)
        self.tolx = float(tolx)
        self.penalty = float(penalty)
        self.validate()

    def validate(self) -> None:
        if self.dimension < 1:
            raise ConfigError("dimension", "must be at least 1")
        if self.population < 4:
            raise ConfigError("population", "must be at least 4")
        if not self.sigma0 > 0:
            raise ConfigError("sigma0", "must be strictly positive")
        if self.max_evals < 1:
            raise ConfigError("max_evals", "must be at least 1")
        if self.restarts < 0:
            raise ConfigError("restarts", "must not be negative")
        if self.penalty < 0:
            raise ConfigError("penalty", "must not be negative")

    @classmethod
    def from_dict(cls, values: Optional[Mapping[str, Any]], **overrides: Any) -> "CmaConfig":
        """Build from a mapping; explicit overrides win over mapping values."""
        known = {
            "dimension", "population", "sigma0", "max_evals", "target_f",
            "seed", "restarts", "tolx", "penalty",
        }
        merged = dict(values or {})
        for key in sorted(set(merged) - known):
            logger.warning(f"Unknown optimizer setting ignored: {key}")
            merged.pop(key)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**merged)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError("cmaes", str(e)) from None

    def copy(self, **changes: Any) -> "CmaConfig":
        values = {
            "dimension": self.dimension, "population": self.population, "sigma0": self.sigma0,
            "max_evals": self.max_evals, "target_f": self.target_f, "seed": self.seed,
            "restarts": self.restarts, "tolx": self.tolx, "penalty": self.penalty,
        }
        values.update(changes)
        return CmaConfig(**values)


@dataclass
class OptResult:
    """
    Outcome of a minimization.

    Attributes:
        x_best: Best candidate, inside the unit box.
        f_best: Objective value at x_best.
        evals_used: Objective evaluations spent.
        converged: True unless the run stopped on the evaluation budget.
        history: Best-so-far value after each generation.
        stop_reason: Why the last run stopped.
    """

    x_best: np.ndarray
    f_best: float
    evals_used: int
    converged: bool
    history: List[float] = field(default_factory=list)
    stop_reason: str = ""


class CMAES:
    """
    Ask/tell CMA-ES on [0, 1]^n.

    Args:
        cfg: Optimizer settings.
        x0: Initial mean (default: the box centre); clamped into the box.
        seed: Overrides cfg.seed (used by restarts).
        evals_budget: Overrides cfg.max_evals (used by restarts).
    """

    def __init__(
        self,
        cfg: CmaConfig,
        x0: Optional[Sequence[float]] = None,
        seed: Optional[int] = None,
        evals_budget: Optional[int] = None,
    ):
        n = cfg.dimension
        self.cfg = cfg
        self.n = n
        self.lam = cfg.population
        self.mu = self.lam // 2
        self.max_evals = cfg.max_evals if evals_budget is None else evals_budget
        self.rng = np.random.default_rng(cfg.seed if seed is None else seed)

        raw = np.array([math.log(self.lam / 2 + 0.5) - math.log(i + 1) for i in range(self.mu)])
        self.weights = raw / raw.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)

        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1, 2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

        mean = np.full(n, 0.5) if x0 is None else np.asarray(x0, dtype=float)
        if mean.shape != (n,):
            raise ConfigError("x0", f"expected {n} coordinates, got {mean.shape}")
        self.mean = np.clip(mean, 0.0, 1.0)
        self.sigma = cfg.sigma0
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.ps = np.zeros(n)
        self.pc = np.zeros(n)

        self.generation = 0
        self.evals = 0
        self.x_best: Optional[np.ndarray] = None
        self.f_best = math.inf
        self.history: List[float] = []
        self._stale = 0
        self._pending_raw: Optional[np.ndarray] = None
        self._pending: Optional[np.ndarray] = None

    def ask(self) -> List[np.ndarray]:
        """
        Sample one generation.

        Returns:
            lambda candidates, each clamped into the unit box.

        Raises:
            UsageError: If the previous generation was not told.
        """
        if self._pending is not None:
            raise UsageError("ask called twice without tell")
        z = self.rng.standard_normal((self.lam, self.n))
        raw = self.mean + self.sigma * (z * self.D) @ self.B.T
        clamped = np.clip(raw, 0.0, 1.0)
        self._pending_raw = raw
        self._pending = clamped
        return [x.copy() for x in clamped]

    def tell(self, candidates: Sequence[Sequence[float]], values: Sequence[float]) -> None:
        """
        Rank the asked generation and update the search distribution.

        Args:
            candidates: The candidates returned by the last ask, in order.
            values: Their objective values.

        Raises:
            UsageError: On tell without ask or mismatched inputs.
            OptimizationError: If a value is not finite.
        """
        if self._pending is None:
            raise UsageError("tell called without a preceding ask")
        if len(candidates) != self.lam or len(values) != self.lam:
            raise UsageError(
                f"expected {self.lam} candidates and values, got {len(candidates)} and {len(values)}"
            )
        xs = np.asarray(candidates, dtype=float)
        if xs.shape != self._pending.shape or not np.array_equal(xs, self._pending):
            raise UsageError("candidates differ from the last ask")
        f = np.asarray(values, dtype=float)
        for k, value in enumerate(f):
            if not math.isfinite(value):
                raise OptimizationError(f"objective returned {value}", candidate=xs[k].copy())

        raw = self._pending_raw
        self._pending = None
        self._pending_raw = None
        self.evals += self.lam
        self.generation += 1

        k_best = int(np.argmin(f))
        if f[k_best] < self.f_best:
            self.f_best = float(f[k_best])
            self.x_best = xs[k_best].copy()
            self._stale = 0
        else:
            self._stale += 1
        self.history.append(self.f_best)

        ranked = f + self.cfg.penalty * np.sum((raw - xs) ** 2, axis=1)
        order = np.argsort(ranked, kind="stable")
        selected = raw[order[: self.mu]]

        old = self.mean
        self.mean = self.weights @ selected
        y = (self.mean - old) / self.sigma

        inv_sqrt = self.B @ np.diag(1.0 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (inv_sqrt @ y)
        ps_norm = float(np.linalg.norm(self.ps))
        hsig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) / self.chi_n < 1.4 + 2 / (self.n + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y

        steps = (selected - old) / self.sigma
        rank_mu = steps.T @ np.diag(self.weights) @ steps
        c1a = self.c1 * (1 - (1 - hsig) * self.cc * (2 - self.cc))
        self.C = (1 - c1a - self.cmu) * self.C + self.c1 * np.outer(self.pc, self.pc) + self.cmu * rank_mu
        self.sigma *= math.exp(min(1.0, self.cs / self.damps * (ps_norm / self.chi_n - 1)))
        self._decompose()

        logger.debug(
            f"generation {self.generation}: best {self.f_best:.6g} sigma {self.sigma:.3g} evals {self.evals}"
        )

    def _decompose(self) -> None:
        self.C = (self.C + self.C.T) / 2
        eigvals, eigvecs = np.linalg.eigh(self.C)
        top = float(np.max(eigvals))
        if not top > 0 or np.min(eigvals) <= top / MAX_CONDITION:
            eigvals = np.maximum(eigvals, max(top, 1e-300) / MAX_CONDITION)
            self.C = eigvecs @ np.diag(eigvals) @ eigvecs.T
            logger.debug(f"covariance repaired at generation {self.generation}")
        self.B = eigvecs
        self.D = np.sqrt(eigvals)

    def stop(self) -> Optional[str]:
        """Reason to stop, or None to continue."""
        if self.evals + self.lam > self.max_evals:
            return "max_evals"
        if self.cfg.target_f is not None and self.f_best <= self.cfg.target_f:
            return "target_f"
        if self._stale >= STAGNATION_FACTOR * self.n:
            return "stagnation"
        if self.generation > 0 and self.sigma * float(np.max(self.D)) < self.cfg.tolx:
            return "tolx"
        return None

    def result(self) -> OptResult:
        reason = self.stop() or ""
        x = self.x_best if self.x_best is not None else self.mean.copy()
        return OptResult(
            x_best=x.copy(),
            f_best=self.f_best,
            evals_used=self.evals,
            converged=reason not in ("", "max_evals"),
            history=list(self.history),
            stop_reason=reason,
        )


def minimize(
    objective: Callable[[np.ndarray], float],
    cfg: CmaConfig,
    x0: Optional[Sequence[float]] = None,
) -> OptResult:
    """
    Minimize an objective over [0, 1]^n.

    Runs ask/tell generations until a stop condition holds, then restarts
    with seed + k up to cfg.restarts times while budget remains. The
    global best across runs is returned.

    Args:
        objective: Function of a unit-box vector returning a finite value.
        cfg: Optimizer settings.
        x0: Initial mean of every run.

    Returns:
        OptResult of the best run, with evaluations and history accumulated.

    Raises:
        OptimizationError: If the objective returns a non-finite value.
    """
    best: Optional[OptResult] = None
    history: List[float] = []
    evals = 0
    reason = ""

    for k in range(cfg.restarts + 1):
        remaining = cfg.max_evals - evals
        if remaining < cfg.population:
            break
        es = CMAES(cfg, x0=x0, seed=cfg.seed + k, evals_budget=remaining)
        while es.stop() is None:
            xs = es.ask()
            es.tell(xs, [objective(x) for x in xs])
        run = es.result()
        evals += run.evals_used
        reason = run.stop_reason
        if best is None or run.f_best < best.f_best:
            best = run
        history = list(np.minimum.accumulate(history + run.history))
        if k > 0:
            logger.debug(f"restart {k}: best {run.f_best:.6g}, global best {best.f_best:.6g}")
        if reason == "target_f":
            break

    if best is None:
        raise ConfigError("max_evals", "budget smaller than one generation")
    return OptResult(
        x_best=best.x_best,
        f_best=best.f_best,
        evals_used=evals,
        converged=reason not in ("", "max_evals"),
        history=[float(f) for f in history],
        stop_reason=reason,
    )
