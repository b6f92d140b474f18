"""
Evaluation Protocol

Dataset filters, top-of-climb detection, metering-point errors, and the
offline and online experiment drivers. Each driver compares the nominal
prediction (default parameters) against the tuned one at fixed time
offsets, and reports per-offset means, standard deviations and paired
Wilcoxon p-values.
"""

import copy
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from predictor import ClimbPredictor
from utils.dataio import Flight
from utils.errors import DomainError, InsufficientDataError
from utils.integrator import Trajectory, top_of_climb
from utils.stats import summarize, wilcoxon_signed_rank
from utils.units import FL


logger = logging.getLogger(__name__)

MIN_TRAJECTORIES = 5
ZERO_ROC_LIMIT_S = 30.0
MIN_CRUISE_FL = 300.0
MIN_DURATION_S = 1100.0
REFERENCES = ("takeoff", "current_time")
REPORT_COLUMNS = (
    "slice_s", "offset_min", "mean_nominal_fl", "std_nominal_fl",
    "mean_tuned_fl", "std_tuned_fl", "p_value", "default_ratio", "n",
)

__all__ = [
    "EvaluationReport",
    "MeteringSpec",
    "filter_dataset",
    "format_report",
    "metering_errors",
    "run_offline_experiment",
    "run_online_experiment",
    "top_of_climb",
    "write_report_csv",
]


@dataclass(frozen=True)
class MeteringSpec:
    """Time offsets (minutes) measured from takeoff or from the present."""

    reference: str = "takeoff"
    offsets: Tuple[float, ...] = (2.0, 5.0, 10.0, 15.0, 20.0)

    def __post_init__(self):
        if self.reference not in REFERENCES:
            raise DomainError(f"reference must be one of {', '.join(REFERENCES)}")
        if not self.offsets:
            raise DomainError("at least one metering offset is required")
        if any(o <= 0 for o in self.offsets):
            raise DomainError("metering offsets must be positive")
        if any(b <= a for a, b in zip(self.offsets, self.offsets[1:])):
            raise DomainError("metering offsets must be strictly increasing")

    @property
    def offsets_s(self) -> List[float]:
        return [60.0 * o for o in self.offsets]


@dataclass
class ReportRow:
    offset_min: float
    mean_nominal: float
    std_nominal: float
    mean_tuned: float
    std_tuned: float
    p_value: float


@dataclass
class EvaluationReport:
    """Per-offset error statistics of one experiment (one time slice online)."""

    rows: List[ReportRow]
    default_choice_ratio: float
    n_trajectories: int
    slice_s: Optional[float] = None
    nominal_errors: Dict[float, List[float]] = field(default_factory=dict)
    tuned_errors: Dict[float, List[float]] = field(default_factory=dict)


# ===================== DATASET =====================

def _zero_roc_run_s(traj: Trajectory, stop: int) -> float:
    longest = run = 0
    for roc in traj.roc[:stop]:
        run = run + 1 if abs(roc) < 1e-12 else 0
        longest = max(longest, run)
    return longest * traj.dt


def rejection_reason(traj: Trajectory) -> Optional[str]:
    """Why a trajectory fails the dataset filters, or None if it passes."""
    toc = top_of_climb(traj)
    if _zero_roc_run_s(traj, toc) > ZERO_ROC_LIMIT_S:
        return "level-off"
    if traj.h[toc] < MIN_CRUISE_FL * FL - 1e-6:
        return "cruise"
    if traj.duration < MIN_DURATION_S - 1e-9:
        return "duration"
    return None


def filter_dataset(flights: Sequence[Flight]) -> Tuple[List[Flight], List[Tuple[Flight, str]]]:
    """
    Keep climbs without a zero rate-of-climb run longer than 30 s before
    the top of climb, reaching at least FL300, lasting at least 1100 s.

    Returns:
        (kept flights, [(rejected flight, reason)]), order preserved.
    """
    kept = []
    rejected = []
    for flight in flights:
        reason = rejection_reason(flight.trajectory)
        if reason is None:
            kept.append(flight)
        else:
            logger.warning(f"Rejected {flight.name}: {reason}")
            rejected.append((flight, reason))
    logger.info(f"Dataset filter kept {len(kept)} of {len(flights)} trajectories")
    return kept, rejected


# ===================== METERING =====================

def metering_errors(pred: Trajectory, obs: Trajectory, spec: MeteringSpec, t_ref: float) -> List[float]:
    """
    Absolute altitude error in FL at t_ref + each offset.

    The prediction is extended with its last altitude when it ends early;
    the observation must cover every metering time.

    Raises:
        DomainError: If the grids differ, a metering time is off the grid, or
            the observation does not reach it.
    """
    if abs(pred.dt - obs.dt) > 1e-9 or abs(pred.t0 - obs.t0) > 1e-9:
        raise DomainError("prediction and observation grids differ")
    errors = []
    for offset in spec.offsets_s:
        position = (t_ref + offset - obs.t0) / obs.dt
        index = int(round(position))
        if abs(position - index) > 1e-6 or index < 0:
            raise DomainError(f"metering time {t_ref + offset} s is off the {obs.dt} s grid")
        if index >= len(obs):
            raise DomainError(f"observation ends before metering time {t_ref + offset} s")
        h_pred = pred.h[min(index, len(pred) - 1)]
        errors.append(abs(float(h_pred - obs.h[index])) / FL)
    return errors


def _aggregate(nominal: Dict[float, List[float]], tuned: Dict[float, List[float]],
               spec: MeteringSpec) -> List[ReportRow]:
    rows = []
    for offset in spec.offsets:
        a = nominal[offset]
        b = tuned[offset]
        mean_n, std_n = summarize(a)
        mean_t, std_t = summarize(b)
        p = wilcoxon_signed_rank(a, b) if len(a) >= MIN_TRAJECTORIES else math.nan
        rows.append(ReportRow(offset, mean_n, std_n, mean_t, std_t, p))
    return rows


def _flight_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _for_flight(predictor: ClimbPredictor, index: int) -> ClimbPredictor:
    worker = copy.copy(predictor)
    worker.cma = predictor.cma.copy(seed=_flight_seed(predictor.cma.seed, index))
    return worker


def _run(func, tasks: Sequence, jobs: int, desc: str, progress: bool) -> List:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(tqdm(executor.map(func, tasks), total=len(tasks), desc=desc, disable=not progress))
    return [func(task) for task in tqdm(tasks, desc=desc, disable=not progress)]


def _require(flights: Sequence[Flight]) -> None:
    if len(flights) < MIN_TRAJECTORIES:
        raise InsufficientDataError(
            f"{len(flights)} trajectories available, at least {MIN_TRAJECTORIES} required"
        )


# ===================== OFFLINE EXPERIMENT =====================

def _offline_task(task) -> Tuple[List[float], List[float]]:
    predictor, flight, spec = task
    obs = flight.trajectory
    s0 = predictor.initial_state(obs)
    toc = top_of_climb(obs)
    level_fl = float(obs.h[toc] / FL)
    horizon = obs.duration

    nominal = predictor.predict(predictor.theta_default, s0, horizon, level_fl, obs.dt)
    fit = predictor.fit_offline(obs, s0, i=0, j=toc, level_fl=level_fl)
    tuned = predictor.predict(fit.theta, s0, horizon, level_fl, obs.dt)
    return metering_errors(nominal, obs, spec, obs.t0), metering_errors(tuned, obs, spec, obs.t0)


def run_offline_experiment(
    flights: Sequence[Flight],
    predictor: ClimbPredictor,
    spec: Optional[MeteringSpec] = None,
    jobs: int = 1,
    progress: bool = False,
) -> EvaluationReport:
    """
    Whole-climb fits: nominal versus tuned errors at offsets after takeoff.

    Args:
        flights: Pre-filtered dataset.
        predictor: Configured predictor.
        spec: Metering offsets (2, 5, 10, 15, 20 min after takeoff if None).
        jobs: Worker processes; results do not depend on it.
        progress: Show a tqdm progress bar.

    Returns:
        EvaluationReport with one row per offset.

    Raises:
        InsufficientDataError: If fewer than five flights are given.
    """
    spec = spec or MeteringSpec()
    _require(flights)
    logger.info("=" * 60)
    logger.info(f"OFFLINE EXPERIMENT: {len(flights)} trajectories, offsets {list(spec.offsets)} min")
    logger.info("=" * 60)

    tasks = [(_for_flight(predictor, i), flight, spec) for i, flight in enumerate(flights)]
    results = _run(_offline_task, tasks, jobs, "offline", progress)

    nominal = {o: [r[0][k] for r in results] for k, o in enumerate(spec.offsets)}
    tuned = {o: [r[1][k] for r in results] for k, o in enumerate(spec.offsets)}
    report = EvaluationReport(
        rows=_aggregate(nominal, tuned, spec),
        default_choice_ratio=0.0,
        n_trajectories=len(flights),
        nominal_errors=nominal,
        tuned_errors=tuned,
    )
    logger.info("Offline experiment complete")
    return report


# ===================== ONLINE EXPERIMENT =====================

def _online_task(task) -> List[Tuple[List[float], List[float], bool]]:
    predictor, flight, slices, spec = task
    obs = flight.trajectory
    s0 = predictor.initial_state(obs)
    toc = top_of_climb(obs)
    level_fl = float(obs.h[toc] / FL)
    horizon_extra = max(spec.offsets_s)

    results = []
    for present in slices:
        prefix = obs.until(present)
        horizon = present + horizon_extra
        fit, tuned = predictor.predict_online(prefix, s0, horizon, level_fl)
        nominal = predictor.predict(predictor.theta_default, s0, horizon, level_fl, obs.dt)
        t_ref = obs.t0 + present
        results.append((
            metering_errors(nominal, obs, spec, t_ref),
            metering_errors(tuned, obs, spec, t_ref),
            fit.fell_back_to_default,
        ))
    return results


def run_online_experiment(
    flights: Sequence[Flight],
    predictor: ClimbPredictor,
    slices: Sequence[float] = (400.0, 500.0, 600.0),
    spec: Optional[MeteringSpec] = None,
    jobs: int = 1,
    progress: bool = False,
) -> List[EvaluationReport]:
    """
    Online predictions at each present time P, nominal versus tuned errors
    at offsets after P, with paired p-values and the fallback ratio.

    Args:
        flights: Pre-filtered dataset.
        predictor: Configured predictor (its online settings apply).
        slices: Present times in seconds after takeoff.
        spec: Metering offsets (2, 5, 10 min after the present if None).
        jobs: Worker processes; results do not depend on it.
        progress: Show a tqdm progress bar.

    Returns:
        One EvaluationReport per slice, in slice order.

    Raises:
        InsufficientDataError: If fewer than five flights are given.
        DomainError: If a flight does not cover a slice plus the last offset.
    """
    spec = spec or MeteringSpec(reference="current_time", offsets=(2.0, 5.0, 10.0))
    if any(b <= a for a, b in zip(slices, slices[1:])) or any(s <= 0 for s in slices):
        raise DomainError("slices must be positive and strictly increasing")
    _require(flights)
    logger.info("=" * 60)
    logger.info(
        f"ONLINE EXPERIMENT: {len(flights)} trajectories, slices {list(slices)} s, "
        f"strategy {predictor.online.strategy}"
    )
    logger.info("=" * 60)

    tasks = [(_for_flight(predictor, i), flight, list(slices), spec) for i, flight in enumerate(flights)]
    results = _run(_online_task, tasks, jobs, "online", progress)

    reports = []
    for s, present in enumerate(slices):
        per_flight = [r[s] for r in results]
        nominal = {o: [p[0][k] for p in per_flight] for k, o in enumerate(spec.offsets)}
        tuned = {o: [p[1][k] for p in per_flight] for k, o in enumerate(spec.offsets)}
        ratio = sum(1 for p in per_flight if p[2]) / len(per_flight)
        reports.append(EvaluationReport(
            rows=_aggregate(nominal, tuned, spec),
            default_choice_ratio=ratio,
            n_trajectories=len(flights),
            slice_s=float(present),
            nominal_errors=nominal,
            tuned_errors=tuned,
        ))
        logger.info(f"Slice {present:g} s: default choice ratio {ratio:.1%}")
    return reports


# ===================== REPORTS =====================

def _fmt(value: float, spec: str) -> str:
    return "-" if value is None or (isinstance(value, float) and math.isnan(value)) else format(value, spec)


def format_report(reports: Iterable[EvaluationReport]) -> str:
    """Aligned text table, one block per report."""
    lines = []
    for report in reports:
        title = "Offline" if report.slice_s is None else f"Online, P = {report.slice_s:g} s"
        lines.append(f"{title}  (n = {report.n_trajectories}, default choice ratio "
                     f"{report.default_choice_ratio:.1%})")
        lines.append(f"{'offset':>8} {'nominal mean':>13} {'nominal std':>12} "
                     f"{'tuned mean':>11} {'tuned std':>10} {'p-value':>11}")
        for row in report.rows:
            lines.append(
                f"{row.offset_min:>6g} m {row.mean_nominal:>13.2f} {row.std_nominal:>12.2f} "
                f"{row.mean_tuned:>11.2f} {row.std_tuned:>10.2f} {_fmt(row.p_value, '>11.4g')}"
            )
        lines.append("")
    return "\n".join(lines)


def write_report_csv(reports: Iterable[EvaluationReport], path: Union[str, Path]) -> None:
    """Machine-readable report, one line per (slice, offset)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            slice_s = "" if report.slice_s is None else f"{report.slice_s:g}"
            for row in report.rows:
                writer.writerow([
                    slice_s,
                    f"{row.offset_min:g}",
                    f"{row.mean_nominal:.6f}",
                    f"{row.std_nominal:.6f}",
                    f"{row.mean_tuned:.6f}",
                    f"{row.std_tuned:.6f}",
                    "" if math.isnan(row.p_value) else f"{row.p_value:.6g}",
                    f"{report.default_choice_ratio:.6f}",
                    report.n_trajectories,
                ])
