#!/usr/bin/env python3
"""
Command-line front end for the climb trajectory predictor.

Subcommands:
    simulate          simulate one climb and write its trajectory
    fit               tune the parameters to one observed climb
    predict           online prediction from an observed prefix
    evaluate-offline  whole-climb fit experiment over a dataset
    evaluate-online   online prediction experiment over a dataset
    synth             generate a synthetic dataset
    mass-sweep        altitude-versus-time curves for several masses

Every flag can also be set in a YAML config file (--config or the
CLIMB_TP_CONFIG environment variable), one mapping per subcommand;
command-line flags win over the file, the file over built-in defaults.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from colorama import Fore, Style
from colorama import init as colorama_init
from dotenv import load_dotenv

from evaluation import (
    MeteringSpec,
    filter_dataset,
    format_report,
    run_offline_experiment,
    run_online_experiment,
    write_report_csv,
)
from predictor import ClimbPredictor, OnlineConfig, PredictorConfig, load_online_config
from utils.atmosphere import cas_to_tas
from utils.cmaes import CmaConfig
from utils.dataio import (
    Flight,
    SynthSpec,
    generate_synthetic,
    load_bounds,
    load_perf,
    load_synth,
    load_yaml,
    parse_trajectory_csv,
    read_dataset,
    write_dataset,
    write_trajectory_csv,
)
from utils.dynamics import PARAM_NAMES, DynamicsConfig, ParamBounds, TuningParams
from utils.errors import ClimbTPError, ConfigError, DomainError
from utils.integrator import Trajectory, initial_state, resample, simulate, top_of_climb
from utils.performance import AircraftPerfModel
from utils.units import FL, FPM, FT, KT


logger = logging.getLogger("climb_tp")

CONFIG_DIR = Path(__file__).resolve().parent / "config"
DEFAULT_AIRCRAFT = CONFIG_DIR / "a320_like.perf"
DEFAULT_BOUNDS = CONFIG_DIR / "bounds.yaml"
DEFAULT_SEED = 42
CONFIG_ENV = "CLIMB_TP_CONFIG"
CURVE_COLUMNS = (
    "t_s", "alt_fl_obs", "alt_fl_nominal", "alt_fl_tuned",
    "roc_fpm_obs", "roc_fpm_nominal", "roc_fpm_tuned",
)


# ===================== CONSOLE =====================

def _ok(message: str) -> None:
    print(f"{Fore.GREEN}{message}{Style.RESET_ALL}")


def _warn(message: str) -> None:
    print(f"{Fore.YELLOW}{message}{Style.RESET_ALL}")


def _fail(message: str) -> None:
    print(f"{Fore.RED}error: {message}{Style.RESET_ALL}", file=sys.stderr)


# ===================== SETTINGS =====================

class Settings:
    """Merged view of command-line flags over the config file section."""

    def __init__(self, args: argparse.Namespace, config: Dict[str, Any]):
        self.args = args
        self.config = config
        section = config.get(args.command) or {}
        if not isinstance(section, dict):
            raise ConfigError(args.command, "config section must be a mapping")
        self.section = section

    def get(self, name: str, default: Any = None) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        return self.section.get(name.replace("_", "-"), self.section.get(name, default))

    def block(self, name: str) -> Dict[str, Any]:
        value = self.config.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigError(name, "config section must be a mapping")
        return value


def _read_config(path: Optional[str]) -> Dict[str, Any]:
    load_dotenv()
    path = path or os.getenv(CONFIG_ENV)
    if not path:
        return {}
    logger.info(f"Using config file {path}")
    return load_yaml(path)


def _float_list(value: Any, key: str) -> List[float]:
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = [x for x in str(value).split(",") if x.strip()]
    try:
        return [float(x) for x in items]
    except ValueError:
        raise ConfigError(key, f"expected comma-separated numbers, got {value!r}") from None


def _model(settings: Settings) -> AircraftPerfModel:
    return load_perf(settings.get("aircraft", str(DEFAULT_AIRCRAFT)))


def _bounds(settings: Settings, model: AircraftPerfModel) -> ParamBounds:
    path = settings.get("bounds")
    if path is None:
        path = DEFAULT_BOUNDS if DEFAULT_BOUNDS.is_file() else None
    bounds = load_bounds(path) if path is not None else ParamBounds()
    bounds.check_model(model)
    return bounds


def _dynamics(settings: Settings) -> DynamicsConfig:
    return DynamicsConfig.from_dict(settings.block("dynamics"))


def _predictor(settings: Settings, budget_key: str = "max_evals") -> ClimbPredictor:
    model = _model(settings)
    bounds = _bounds(settings, model)
    seed = int(settings.get("seed", DEFAULT_SEED))
    budget = settings.get("budget")

    cma_overrides = {"seed": seed, "dimension": len(PARAM_NAMES)}
    if budget is not None and budget_key == "max_evals":
        cma_overrides["max_evals"] = int(budget)
    cma = CmaConfig.from_dict(settings.block("cmaes"), **cma_overrides)

    online_overrides = {"strategy": settings.get("strategy")}
    if budget is not None and budget_key == "evals_budget":
        online_overrides["evals_budget"] = int(budget)
    online_path = settings.get("online_config")
    if online_path is not None:
        online = load_online_config(online_path, **online_overrides)
    else:
        online = OnlineConfig.from_dict(settings.block("online"), **online_overrides)

    return ClimbPredictor(
        model,
        bounds=bounds,
        dynamics=_dynamics(settings),
        cma=cma,
        online=online,
        config=PredictorConfig.from_dict(settings.block("predictor")),
    )


def _params(pairs: Sequence[str], model: AircraftPerfModel) -> TuningParams:
    values = TuningParams.nominal(model).as_dict()
    for pair in pairs or []:
        key, sep, raw = str(pair).partition("=")
        key = key.strip()
        if not sep or key not in PARAM_NAMES:
            raise ConfigError("params", f"expected one of {', '.join(PARAM_NAMES)} as k=v, got {pair!r}")
        try:
            values[key] = float(raw)
        except ValueError:
            raise ConfigError(key, f"not a number: {raw!r}") from None
    theta = TuningParams(**values)
    theta.check_mass(model)
    return theta


def _check_filters(traj: Trajectory, name: str, skip: bool) -> None:
    if skip:
        return
    _, rejected = filter_dataset([Flight(name=name, trajectory=traj)])
    if rejected:
        raise DomainError(f"{name} rejected by the dataset filters ({rejected[0][1]}); use --no-filter")


def _write_json(data: Dict[str, Any], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def _theta_dict(theta: TuningParams) -> Dict[str, float]:
    return {name: float(value) for name, value in theta.as_dict().items()}


# ===================== SUBCOMMANDS =====================

def cmd_simulate(settings: Settings) -> int:
    model = _model(settings)
    cfg = _dynamics(settings)
    theta = _params(settings.get("params", []), model)
    dt = float(settings.get("dt", 1.0))
    sample_dt = float(settings.get("sample_dt", 5.0))
    horizon = float(settings.get("horizon", 3600.0))
    cruise_fl = settings.get("cruise_fl", 350.0)
    cruise_fl = None if cruise_fl is None else float(cruise_fl)

    h0 = float(settings.get("initial_alt", 1500.0)) * FT
    v0 = cas_to_tas(float(settings.get("initial_cas", 160.0)) * KT, h0, theta.dT)
    s0 = initial_state(h0, v0, 0.0, theta, cfg, model)
    outcome = simulate(theta, s0, cruise_fl, horizon, dt, cfg, model)
    traj = resample(outcome.trajectory, sample_dt)

    out = settings.get("out", "simulation.csv")
    write_trajectory_csv(traj, out)
    toc_t = float(outcome.trajectory.t[top_of_climb(outcome.trajectory)])
    _ok(f"termination: {outcome.termination.value}; top of climb at {toc_t:g} s; wrote {out}")
    if outcome.envelope_violations:
        _warn(f"envelope violations: {', '.join(outcome.envelope_violations)}")
    return 0


def _curve_rows(obs: Trajectory, nominal: Trajectory, tuned: Trajectory) -> List[List[str]]:
    n = len(obs)

    def fit_length(x: np.ndarray, fill: float) -> np.ndarray:
        return np.concatenate([x[:n], np.full(max(0, n - len(x)), fill)])

    columns = [
        obs.t,
        obs.h / FL,
        fit_length(nominal.h, nominal.h[-1]) / FL,
        fit_length(tuned.h, tuned.h[-1]) / FL,
        obs.roc / FPM,
        fit_length(nominal.roc, 0.0) / FPM,
        fit_length(tuned.roc, 0.0) / FPM,
    ]
    return [[f"{x:.10g}" for x in row] for row in zip(*columns)]


def cmd_fit(settings: Settings) -> int:
    predictor = _predictor(settings)
    obs_path = settings.get("obs")
    obs = parse_trajectory_csv(obs_path)
    _check_filters(obs, str(obs_path), bool(settings.get("no_filter", False)))

    s0 = predictor.initial_state(obs)
    toc = top_of_climb(obs)
    level_fl = float(obs.h[toc] / FL)
    fit = predictor.fit_offline(obs, s0, i=0, j=toc, level_fl=level_fl)

    report = {
        "aircraft": predictor.model.label,
        "theta": _theta_dict(fit.theta),
        "objective_fl": fit.objective,
        "mean_error_fl": fit.objective / (toc + 1),
        "evals": fit.evals,
        "v2_repaired": fit.repaired,
        "top_of_climb_s": float(obs.t[toc] - obs.t0),
        "seed": predictor.cma.seed,
    }
    out = settings.get("out", "fit.json")
    _write_json(report, out)

    curves = settings.get("curves")
    if curves:
        nominal = predictor.predict(predictor.theta_default, s0, obs.duration, level_fl, obs.dt)
        tuned = predictor.predict(fit.theta, s0, obs.duration, level_fl, obs.dt)
        with open(curves, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CURVE_COLUMNS)
            writer.writerows(_curve_rows(obs, nominal, tuned))
    _ok(f"objective {fit.objective:.3f} FL ({report['mean_error_fl']:.3f} FL per point); wrote {out}")
    return 0


def cmd_predict(settings: Settings) -> int:
    predictor = _predictor(settings, budget_key="evals_budget")
    obs = parse_trajectory_csv(settings.get("obs"))
    present = float(settings.get("present", 500.0))
    horizon = float(settings.get("horizon", 600.0))
    level = settings.get("cruise_fl")
    level_fl = None if level is None else float(level)

    prefix = obs.until(present)
    s0 = predictor.initial_state(obs)
    fit, prediction = predictor.predict_online(prefix, s0, present + horizon, level_fl)

    out = settings.get("out", "prediction.csv")
    write_trajectory_csv(prediction, out)
    report = {
        "theta": _theta_dict(fit.theta),
        "lambda_used": fit.lambda_used,
        "fell_back": fit.fell_back_to_default,
        "validation_error_fl": fit.validation_error,
        "lambda_trace": [[lam, err] for lam, err in fit.lambda_trace],
        "evals": fit.evals,
        "present_s": present,
        "strategy": predictor.online.strategy,
        "seed": predictor.cma.seed,
    }
    report_path = settings.get("report") or str(Path(out).with_suffix(".json"))
    _write_json(report, report_path)
    if fit.fell_back_to_default:
        _warn("validation error above threshold; default parameters used")
    _ok(f"lambda {fit.lambda_used}; fell back: {fit.fell_back_to_default}; wrote {out}")
    return 0


def _dataset(settings: Settings) -> list:
    flights = read_dataset(settings.get("dataset"))
    if not settings.get("no_filter", False):
        flights, rejected = filter_dataset(flights)
        if rejected:
            _warn(f"{len(rejected)} trajectories rejected by the dataset filters")
    return flights


def _write_reports(reports, settings: Settings, default: str) -> str:
    path = Path(settings.get("report", default))
    path.write_text(format_report(reports), encoding="utf-8")
    write_report_csv(reports, path.with_suffix(".csv"))
    return str(path)


def _jobs(settings: Settings) -> int:
    return max(1, int(settings.get("jobs", os.cpu_count() or 1)))


def cmd_evaluate_offline(settings: Settings) -> int:
    predictor = _predictor(settings)
    flights = _dataset(settings)
    spec = MeteringSpec(
        reference="takeoff",
        offsets=tuple(_float_list(settings.get("offsets", "2,5,10,15,20"), "offsets")),
    )
    report = run_offline_experiment(flights, predictor, spec, jobs=_jobs(settings),
                                    progress=not settings.args.quiet)
    path = _write_reports([report], settings, "offline_report.txt")
    print(format_report([report]))
    _ok(f"wrote {path}")
    return 0


def cmd_evaluate_online(settings: Settings) -> int:
    predictor = _predictor(settings, budget_key="evals_budget")
    flights = _dataset(settings)
    slices = _float_list(settings.get("slices", "400,500,600"), "slices")
    spec = MeteringSpec(
        reference="current_time",
        offsets=tuple(_float_list(settings.get("offsets", "2,5,10"), "offsets")),
    )
    reports = run_online_experiment(flights, predictor, slices, spec, jobs=_jobs(settings),
                                    progress=not settings.args.quiet)
    path = _write_reports(reports, settings, "online_report.txt")
    print(format_report(reports))
    for report in reports:
        _ok(f"P = {report.slice_s:g} s: default choice ratio {report.default_choice_ratio:.1%}")
    _ok(f"wrote {path}")
    return 0


def cmd_synth(settings: Settings) -> int:
    model = _model(settings)
    overrides = {
        "n_trajectories": settings.get("n"),
        "seed": settings.get("seed"),
        "altitude_noise_sigma": settings.get("noise"),
    }
    spec_path = settings.get("spec")
    spec = load_synth(spec_path, **overrides) if spec_path else SynthSpec.from_dict(None, **overrides)
    spec.check_bounds(_bounds(settings, model), model)
    flights = generate_synthetic(spec, model, _dynamics(settings), progress=not settings.args.quiet)
    out = settings.get("out", "dataset")
    write_dataset(out, flights)
    _ok(f"wrote {len(flights)} trajectories and truth.csv to {out}")
    return 0


def cmd_mass_sweep(settings: Settings) -> int:
    model = _model(settings)
    cfg = _dynamics(settings)
    masses = settings.get("masses")
    masses = _float_list(masses, "masses") if masses is not None else [model.mass_min, model.mass_ref, model.mass_max]
    cruise_fl = float(settings.get("cruise_fl", 350.0))
    horizon = float(settings.get("horizon", 1500.0))
    h0 = float(settings.get("initial_alt", 1500.0)) * FT

    rows = []
    for mass in masses:
        theta = TuningParams.nominal(model).with_values(m=mass)
        theta.check_mass(model)
        v0 = cas_to_tas(float(settings.get("initial_cas", 160.0)) * KT, h0, theta.dT)
        s0 = initial_state(h0, v0, 0.0, theta, cfg, model)
        outcome = simulate(theta, s0, cruise_fl, horizon, 1.0, cfg, model, hold_until=horizon)
        traj = resample(outcome.trajectory, 5.0)
        rows.extend([f"{mass:.10g}", f"{t:.10g}", f"{h / FL:.10g}"] for t, h in zip(traj.t, traj.h))

    out = settings.get("out", "mass_sweep.csv")
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("mass_kg", "t_s", "alt_fl"))
        writer.writerows(rows)
    _ok(f"wrote {len(masses)} curves to {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "evaluate-offline": cmd_evaluate_offline,
    "evaluate-online": cmd_evaluate_online,
    "synth": cmd_synth,
    "mass-sweep": cmd_mass_sweep,
}


# ===================== PARSER =====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="climb_tp",
        description="Aircraft climb trajectory prediction with tuned total-energy dynamics",
    )
    parser.add_argument("--config", help=f"YAML config file (default: ${CONFIG_ENV})")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="Warnings only, no progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--aircraft", help="Aircraft coefficient file")
        p.add_argument("--bounds", help="Parameter bounds YAML")
        p.add_argument("--seed", type=int, help=f"Random seed (default: {DEFAULT_SEED})")

    p = sub.add_parser("simulate", help="Simulate one climb")
    p.add_argument("--aircraft", help="Aircraft coefficient file")
    p.add_argument("--params", nargs="*", metavar="K=V", help="Parameter overrides (m, dT, v1, v2, mach)")
    p.add_argument("--initial-alt", type=float, help="Initial altitude, ft (default: 1500)")
    p.add_argument("--initial-cas", type=float, help="Initial CAS, kt (default: 160)")
    p.add_argument("--cruise-fl", type=float, help="Cruise flight level (default: 350)")
    p.add_argument("--dt", type=float, help="Integration step, s (default: 1)")
    p.add_argument("--sample-dt", type=float, help="Output interval, s (default: 5)")
    p.add_argument("--horizon", type=float, help="Maximum duration, s (default: 3600)")
    p.add_argument("--out", help="Output trajectory CSV")

    p = sub.add_parser("fit", help="Fit the parameters to one observed climb")
    common(p)
    p.add_argument("--obs", required=True, help="Observed trajectory CSV")
    p.add_argument("--budget", type=int, help="Objective evaluations")
    p.add_argument("--out", help="Fit report (JSON)")
    p.add_argument("--curves", help="Observed/nominal/tuned curves CSV")
    p.add_argument("--no-filter", action="store_true", default=None, help="Skip the dataset filters")

    p = sub.add_parser("predict", help="Online prediction from an observed prefix")
    common(p)
    p.add_argument("--obs", required=True, help="Observed trajectory CSV")
    p.add_argument("--present", type=float, help="Present time, s after the first sample (default: 500)")
    p.add_argument("--horizon", type=float, help="Prediction length after the present, s (default: 600)")
    p.add_argument("--cruise-fl", type=float, help="Cleared cruise level")
    p.add_argument("--online-config", help="Online predictor YAML")
    p.add_argument("--strategy", choices=("regularized", "naive"))
    p.add_argument("--budget", type=int, help="Objective evaluations per fit")
    p.add_argument("--out", help="Predicted trajectory CSV")
    p.add_argument("--report", help="Prediction report (JSON)")

    for name, help_text in (("evaluate-offline", "Offline fit experiment"),
                            ("evaluate-online", "Online prediction experiment")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--dataset", required=True, help="Directory of trajectory CSVs")
        p.add_argument("--offsets", help="Metering offsets, minutes, comma separated")
        p.add_argument("--budget", type=int, help="Objective evaluations per fit")
        p.add_argument("--jobs", type=int, help="Worker processes (default: CPU count)")
        p.add_argument("--report", help="Text report path (CSV written alongside)")
        p.add_argument("--no-filter", action="store_true", default=None, help="Skip the dataset filters")
        if name == "evaluate-online":
            p.add_argument("--slices", help="Present times, s, comma separated (default: 400,500,600)")
            p.add_argument("--online-config", help="Online predictor YAML")
            p.add_argument("--strategy", choices=("regularized", "naive"))

    p = sub.add_parser("synth", help="Generate a synthetic dataset")
    common(p)
    p.add_argument("--n", type=int, help="Number of trajectories (default: 262)")
    p.add_argument("--spec", help="Synthetic dataset YAML")
    p.add_argument("--noise", type=float, help="Altitude noise sigma, FL")
    p.add_argument("--out", help="Output directory")

    p = sub.add_parser("mass-sweep", help="Climb curves for several masses")
    p.add_argument("--aircraft", help="Aircraft coefficient file")
    p.add_argument("--masses", help="Masses, kg, comma separated (default: min, ref, max)")
    p.add_argument("--cruise-fl", type=float, help="Cruise flight level (default: 350)")
    p.add_argument("--horizon", type=float, help="Duration, s (default: 1500)")
    p.add_argument("--initial-alt", type=float, help="Initial altitude, ft (default: 1500)")
    p.add_argument("--initial-cas", type=float, help="Initial CAS, kt (default: 160)")
    p.add_argument("--out", help="Output CSV")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    logging.getLogger().setLevel(level)
    colorama_init()

    try:
        settings = Settings(args, _read_config(args.config))
        return COMMANDS[args.command](settings)
    except ClimbTPError as e:
        logger.debug(f"{type(e).__name__}: {e}", exc_info=True)
        _fail(str(e))
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        _fail(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
