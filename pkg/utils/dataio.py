"""
Trajectory files, configuration loaders and the synthetic dataset generator.

Trajectory CSV: header `t_s,alt_ft,tas_kt,roc_fpm`, one sample per line on
a regular time grid. Aviation units at the file boundary, SI inside.

Aircraft coefficient files are flat `key = value` text read with
python-dotenv; every other configuration file is YAML.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, IO, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from dotenv import dotenv_values
from tqdm import tqdm

from utils.atmosphere import cas_to_tas
from utils.dynamics import PARAM_NAMES, DynamicsConfig, ParamBounds, TuningParams
from utils.errors import ConfigError, ParseError
from utils.integrator import Trajectory, initial_state, resample, simulate
from utils.performance import AircraftPerfModel
from utils.units import FL, FPM, FT, KT


logger = logging.getLogger(__name__)

HEADER = ("t_s", "alt_ft", "tas_kt", "roc_fpm")
TRUTH_HEADER = ("file", "mass_kg", "dT_K", "v1_kt", "v2_kt", "mach")
TRUTH_FILE = "truth.csv"
OBS_DT = 5.0
GRID_TOL = 1e-6
NUMBER_FORMAT = "{:.15g}"

Source = Union[str, Path, IO[str]]


# ===================== TRAJECTORY CSV =====================

def _open_text(source: Source, mode: str = "r"):
    if isinstance(source, (str, Path)):
        return open(source, mode, newline="", encoding="utf-8"), True
    return source, False


def parse_trajectory_csv(source: Source, expected_dt: Optional[float] = OBS_DT) -> Trajectory:
    """
    Read a trajectory file.

    Args:
        source: Path or open text stream.
        expected_dt: Required sample interval in seconds; None accepts the
            interval of the first two samples.

    Returns:
        Trajectory in SI units.

    Raises:
        ParseError: On a missing column, bad number, non-increasing time or
            off-grid timestamp; the message names the file line.
    """
    stream, owned = _open_text(source)
    try:
        rows = list(csv.reader(stream))
    finally:
        if owned:
            stream.close()

    if not rows:
        raise ParseError("empty file", line=1)
    header = [name.strip() for name in rows[0]]
    missing = [name for name in HEADER if name not in header]
    if missing:
        raise ParseError(f"missing column(s): {', '.join(missing)}", line=1)
    index = [header.index(name) for name in HEADER]

    columns: List[List[float]] = [[], [], [], []]
    dt = expected_dt
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line_no)
        values = []
        for name, i in zip(HEADER, index):
            try:
                value = float(row[i])
            except ValueError:
                raise ParseError(f"{name} is not a number: {row[i]!r}", line=line_no) from None
            if not math.isfinite(value):
                raise ParseError(f"{name} is not finite", line=line_no)
            values.append(value)

        t = values[0]
        if columns[0]:
            prev = columns[0][-1]
            if t <= prev:
                raise ParseError(f"time {t} does not increase after {prev}", line=line_no)
            if dt is None:
                dt = t - prev
            if abs(t - prev - dt) > GRID_TOL * dt:
                raise ParseError(f"time {t} is off the {dt} s grid", line=line_no)
        for column, value in zip(columns, values):
            column.append(value)

    if not columns[0]:
        raise ParseError("no samples", line=len(rows))
    t, alt_ft, tas_kt, roc_fpm = (np.asarray(c) for c in columns)
    return Trajectory(
        t0=float(t[0]),
        dt=float(dt if dt is not None else OBS_DT),
        t=t,
        h=alt_ft * FT,
        v=tas_kt * KT,
        roc=roc_fpm * FPM,
    )


def write_trajectory_csv(traj: Trajectory, sink: Source) -> None:
    """Write a trajectory with the fixed header, 15 significant digits per value."""
    stream, owned = _open_text(sink, "w")
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(HEADER)
        for t, h, v, roc in zip(traj.t, traj.h, traj.v, traj.roc):
            writer.writerow([NUMBER_FORMAT.format(x) for x in (t, h / FT, v / KT, roc / FPM)])
    finally:
        if owned:
            stream.close()


# ===================== CONFIG FILES =====================

def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a YAML mapping.

    Raises:
        ConfigError: If the file is missing, malformed or not a mapping.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    except yaml.YAMLError as e:
        raise ConfigError(str(path), f"invalid YAML: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return data


def load_perf(path: Union[str, Path]) -> AircraftPerfModel:
    """
    Load aircraft coefficients from a `key = value` file.

    The label defaults to the file stem.

    Raises:
        ConfigError: Naming the offending key.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "file not found")
    values = dict(dotenv_values(path, interpolate=False))
    values.setdefault("label", path.stem)
    model = AircraftPerfModel.from_dict(values)
    logger.debug(f"Loaded aircraft model {model.label} from {path}")
    return model


def load_bounds(path: Union[str, Path], model: Optional[AircraftPerfModel] = None) -> ParamBounds:
    """
    Load parameter bounds ({m: [low, high], ...}) from YAML.

    Raises:
        ConfigError: On inverted pairs or mass bounds outside the model range.
    """
    bounds = ParamBounds.from_dict(load_yaml(path))
    if model is not None:
        bounds.check_model(model)
    return bounds


# ===================== SYNTHETIC DATA =====================

class SynthSpec:
    """
    Synthetic dataset settings.

    Ranges are (low, high) pairs sampled uniformly; speeds in kt CAS,
    altitude noise in FL, initial altitude in ft, durations in seconds.
    """

    def __init__(
        self,
        n_trajectories: int = 262,
        seed: int = 2024,
        mass_range: Sequence[float] = (55000.0, 72000.0),
        dT_range: Sequence[float] = (-10.0, 10.0),
        v1_range: Sequence[float] = (220.0, 250.0),
        v2_range: Sequence[float] = (280.0, 330.0),
        mach_range: Sequence[float] = (0.74, 0.80),
        cruise_fl_range: Sequence[float] = (300.0, 370.0),
        altitude_noise_sigma: float = 0.5,
        initial_altitude: float = 1500.0,
        initial_cas: float = 160.0,
        duration_s: float = 1500.0,
        dt: float = 1.0,
        sample_dt: float = OBS_DT,
    ):
        self.n_trajectories = int(n_trajectories)
        self.seed = int(seed)
        self.mass_range = _pair("mass_range", mass_range)
        self.dT_range = _pair("dT_range", dT_range)
        self.v1_range = _pair("v1_range", v1_range)
        self.v2_range = _pair("v2_range", v2_range)
        self.mach_range = _pair("mach_range", mach_range)
        self.cruise_fl_range = _pair("cruise_fl_range", cruise_fl_range)
        self.altitude_noise_sigma = float(altitude_noise_sigma)
        self.initial_altitude = float(initial_altitude)
        self.initial_cas = float(initial_cas)
        self.duration_s = float(duration_s)
        self.dt = float(dt)
        self.sample_dt = float(sample_dt)
        self.validate()

    def validate(self) -> None:
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories", "must be at least 1")
        if self.altitude_noise_sigma < 0:
            raise ConfigError("altitude_noise_sigma", "must not be negative")
        if self.v2_range[1] < self.v1_range[0]:
            raise ConfigError("v2_range", "no v2 at or above the lowest v1")
        if not self.initial_cas > 0:
            raise ConfigError("initial_cas", "must be strictly positive")
        if self.initial_altitude < 0:
            raise ConfigError("initial_altitude", "must not be negative")
        if not self.duration_s > 0 or not self.dt > 0:
            raise ConfigError("duration_s", "durations must be strictly positive")
        ratio = self.sample_dt / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("sample_dt", "must be a multiple of dt")

    def ranges(self) -> Dict[str, Tuple[float, float]]:
        return {
            "m": self.mass_range,
            "dT": self.dT_range,
            "v1": self.v1_range,
            "v2": self.v2_range,
            "mach": self.mach_range,
        }

    def check_bounds(self, bounds: ParamBounds, model: AircraftPerfModel) -> None:
        """
        Raises:
            ConfigError: If a sampling range leaves the bounds box, or the
                cruise range leaves the aircraft ceiling.
        """
        for name, (low, high) in self.ranges().items():
            b_low, b_high = getattr(bounds, name)
            if low < b_low or high > b_high:
                raise ConfigError(f"{name} range", f"({low}, {high}) outside bounds ({b_low}, {b_high})")
        if self.cruise_fl_range[1] * FL > model.h_max_m:
            raise ConfigError("cruise_fl_range", "above the aircraft ceiling")

    @classmethod
    def from_dict(cls, values: Optional[Mapping[str, Any]], **overrides: Any) -> "SynthSpec":
        known = {
            "n_trajectories", "seed", "mass_range", "dT_range", "v1_range", "v2_range",
            "mach_range", "cruise_fl_range", "altitude_noise_sigma", "initial_altitude",
            "initial_cas", "duration_s", "dt", "sample_dt",
        }
        merged = dict(values or {})
        for key in sorted(set(merged) - known):
            logger.warning(f"Unknown synthetic setting ignored: {key}")
            merged.pop(key)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**merged)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError("synth", str(e)) from None


def _pair(key: str, values: Sequence[float]) -> Tuple[float, float]:
    try:
        low, high = (float(x) for x in values)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a [low, high] pair, got {values!r}") from None
    if not low <= high:
        raise ConfigError(key, f"expected low <= high, got ({low}, {high})")
    return low, high


def load_synth(path: Union[str, Path], **overrides: Any) -> SynthSpec:
    return SynthSpec.from_dict(load_yaml(path), **overrides)


@dataclass
class Flight:
    """One trajectory of a dataset, with its generating parameters when known."""

    name: str
    trajectory: Trajectory
    truth: Optional[TuningParams] = None
    cruise_fl: Optional[float] = None


def _sample_params(rng: np.random.Generator, spec: SynthSpec) -> TuningParams:
    ranges = spec.ranges()
    for _ in range(1000):
        values = {name: float(rng.uniform(*ranges[name])) for name in PARAM_NAMES}
        if values["v2"] >= values["v1"]:
            return TuningParams(**values)
    raise ConfigError("v2_range", "could not draw v2 >= v1")


def synthesize_flight(
    index: int,
    spec: SynthSpec,
    model: AircraftPerfModel,
    cfg: DynamicsConfig,
) -> Flight:
    """
    Generate one flight of the dataset.

    Each flight draws from its own stream seeded by (spec.seed, index), so
    flights do not depend on each other or on generation order.
    """
    rng = np.random.default_rng([spec.seed, index])
    theta = _sample_params(rng, spec)
    low, high = spec.cruise_fl_range
    cruise_fl = float(min(high, max(low, 10.0 * round(rng.uniform(low, high) / 10.0))))

    h0 = spec.initial_altitude * FT
    v0 = cas_to_tas(spec.initial_cas * KT, h0, theta.dT)
    s0 = initial_state(h0, v0, 0.0, theta, cfg, model)
    outcome = simulate(theta, s0, cruise_fl, spec.duration_s, spec.dt, cfg, model,
                       hold_until=spec.duration_s)
    traj = resample(outcome.trajectory, spec.sample_dt)

    h = traj.h
    if spec.altitude_noise_sigma > 0:
        h = h + rng.normal(0.0, spec.altitude_noise_sigma * FL, size=len(h))
    roc = np.gradient(h, traj.dt) if len(h) > 1 else np.zeros(1)
    noisy = Trajectory(t0=traj.t0, dt=traj.dt, t=traj.t, h=h, v=traj.v, roc=roc)
    return Flight(name=f"flight_{index:04d}", trajectory=noisy, truth=theta, cruise_fl=cruise_fl)


def generate_synthetic(
    spec: SynthSpec,
    model: AircraftPerfModel,
    cfg: DynamicsConfig,
    progress: bool = False,
) -> List[Flight]:
    """
    Generate a synthetic climb dataset.

    Parameters are drawn uniformly from the configured ranges (v2 >= v1 by
    rejection), the climb is simulated to a random cruise level and held
    there until spec.duration_s, decimated to the observation grid, and
    Gaussian altitude noise is added before the rate of climb is
    recomputed by finite differences.

    Args:
        spec: Dataset settings.
        model: Aircraft coefficients.
        cfg: Dynamics configuration.
        progress: Show a tqdm progress bar.

    Returns:
        Flights with their generating parameters; identical for identical inputs.
    """
    logger.info(f"Generating {spec.n_trajectories} synthetic flights (seed {spec.seed})")
    flights = []
    for i in tqdm(range(spec.n_trajectories), desc="synth", unit="flight", disable=not progress):
        flights.append(synthesize_flight(i, spec, model, cfg))
    return flights


# ===================== DATASET DIRECTORIES =====================

def write_dataset(directory: Union[str, Path], flights: Sequence[Flight]) -> List[Path]:
    """
    Write one CSV per flight plus truth.csv for flights with known parameters.

    Returns:
        The trajectory file paths, in flight order.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    truth_rows = []
    for flight in flights:
        path = directory / f"{flight.name}.csv"
        write_trajectory_csv(flight.trajectory, path)
        paths.append(path)
        if flight.truth is not None:
            truth_rows.append([path.name] + [NUMBER_FORMAT.format(x) for x in flight.truth.as_tuple()])
    if truth_rows:
        with open(directory / TRUTH_FILE, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRUTH_HEADER)
            writer.writerows(truth_rows)
    logger.info(f"Wrote {len(paths)} trajectories to {directory}")
    return paths


def read_truth(path: Union[str, Path]) -> Dict[str, TuningParams]:
    """
    Read a truth manifest into {file name: parameters}.

    Raises:
        ParseError: On a malformed manifest.
    """
    result = {}
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRUTH_HEADER:
            raise ParseError(f"truth header must be {','.join(TRUTH_HEADER)}", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRUTH_HEADER):
                raise ParseError(f"expected {len(TRUTH_HEADER)} fields", line=line_no)
            try:
                result[row[0].strip()] = TuningParams(*(float(x) for x in row[1:]))
            except ValueError as e:
                raise ParseError(str(e), line=line_no) from None
    return result


def read_dataset(directory: Union[str, Path], expected_dt: Optional[float] = OBS_DT) -> List[Flight]:
    """
    Read every trajectory CSV of a directory, sorted by file name.

    Raises:
        ConfigError: If the directory does not exist.
        ParseError: If a file is malformed (the message names the file).
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(str(directory), "dataset directory not found")
    truth_path = directory / TRUTH_FILE
    truth = read_truth(truth_path) if truth_path.is_file() else {}

    flights = []
    for path in sorted(p for p in directory.glob("*.csv") if p.name != TRUTH_FILE):
        try:
            traj = parse_trajectory_csv(path, expected_dt=expected_dt)
        except ParseError as e:
            err = ParseError(f"{path.name}: {e}")
            err.line = e.line
            raise err from None
        flights.append(Flight(name=path.stem, trajectory=traj, truth=truth.get(path.name)))
    logger.info(f"Read {len(flights)} trajectories from {directory}")
    return flights

