"""
Command-line front end: subcommands, config layering and exit codes.
"""

import csv
import json

import numpy as np
import pytest

from climb_tp import CURVE_COLUMNS, main
from tests.helpers import observed_climb
from utils.dataio import Flight, parse_trajectory_csv, write_dataset, write_trajectory_csv
from utils.integrator import Trajectory
from utils.units import FL


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    monkeypatch.delenv("CLIMB_TP_CONFIG", raising=False)


def run(*argv):
    return main(["--quiet", *argv])


def _linear(n=301):
    t = np.arange(n) * 5.0
    h = np.minimum(t * FL / 3.0, 350.0 * FL)
    return Trajectory(t0=0.0, dt=5.0, t=t, h=h, v=np.full(n, 200.0), roc=np.gradient(h, 5.0))


@pytest.fixture(scope="module")
def short_climb_csv(tmp_path_factory, model, dyn_cfg, nominal):
    path = tmp_path_factory.mktemp("obs") / "short.csv"
    write_trajectory_csv(observed_climb(nominal, dyn_cfg, model, level_fl=100.0, duration=300.0), path)
    return path


class TestSimulate:

    def test_writes_trajectory(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert run("simulate", "--horizon", "120", "--cruise-fl", "100", "--out", str(out)) == 0
        traj = parse_trajectory_csv(out)
        assert traj.t[-1] == 120.0
        assert np.all(np.diff(traj.h) > 0)

    def test_parameter_override(self, tmp_path):
        light, heavy = tmp_path / "light.csv", tmp_path / "heavy.csv"
        assert run("simulate", "--horizon", "120", "--params", "m=50000", "--out", str(light)) == 0
        assert run("simulate", "--horizon", "120", "--params", "m=75000", "--out", str(heavy)) == 0
        assert parse_trajectory_csv(light).h[-1] > parse_trajectory_csv(heavy).h[-1]

    def test_level_above_ceiling(self, tmp_path):
        assert run("simulate", "--cruise-fl", "900", "--out", str(tmp_path / "x.csv")) == 3

    @pytest.mark.parametrize("pair", ["mass=60000", "m", "m=heavy"])
    def test_bad_parameter(self, tmp_path, pair):
        assert run("simulate", "--params", pair, "--out", str(tmp_path / "x.csv")) == 2

    def test_mass_outside_model(self, tmp_path):
        assert run("simulate", "--params", "m=100000", "--out", str(tmp_path / "x.csv")) == 2

    def test_config_file_section(self, tmp_path):
        config = tmp_path / "climb.yaml"
        config.write_text("simulate:\n  horizon: 60\n  cruise-fl: 100\n")
        out = tmp_path / "sim.csv"
        assert main(["--quiet", "--config", str(config), "simulate", "--out", str(out)]) == 0
        assert parse_trajectory_csv(out).t[-1] == 60.0

    def test_flag_beats_config(self, tmp_path):
        config = tmp_path / "climb.yaml"
        config.write_text("simulate:\n  horizon: 60\n")
        out = tmp_path / "sim.csv"
        assert main(["--quiet", "--config", str(config), "simulate", "--horizon", "30", "--out", str(out)]) == 0
        assert parse_trajectory_csv(out).t[-1] == 30.0

    def test_missing_config_file(self, tmp_path):
        assert main(["--quiet", "--config", str(tmp_path / "none.yaml"), "simulate"]) == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["--quiet", "land"])


class TestMassSweep:

    def test_curves(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run("mass-sweep", "--masses", "50000,70000", "--horizon", "300", "--out", str(out)) == 0
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["mass_kg", "t_s", "alt_fl"]
        assert len(rows) == 1 + 2 * 61
        assert {r[0] for r in rows[1:]} == {"50000", "70000"}

    def test_curves_ordered_by_mass(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run("mass-sweep", "--horizon", "600", "--out", str(out)) == 0
        curves = {}
        with open(out, newline="") as f:
            for row in csv.DictReader(f):
                curves.setdefault(float(row["mass_kg"]), []).append((float(row["t_s"]), float(row["alt_fl"])))
        assert sorted(curves) == [39000.0, 64000.0, 77000.0]
        light, ref, heavy = (np.array(curves[m]) for m in sorted(curves))
        assert np.array_equal(light[:, 0], heavy[:, 0])
        assert np.all(light[:, 1] >= ref[:, 1]) and np.all(ref[:, 1] >= heavy[:, 1])
        at_400 = int(np.searchsorted(light[:, 0], 400.0))
        assert light[at_400, 1] - heavy[at_400, 1] > 0.0

    def test_mass_outside_model(self, tmp_path):
        assert run("mass-sweep", "--masses", "90000", "--out", str(tmp_path / "x.csv")) == 2


class TestFitAndPredict:

    def test_fit_report(self, tmp_path, short_climb_csv):
        out, curves = tmp_path / "fit.json", tmp_path / "curves.csv"
        code = run("fit", "--obs", str(short_climb_csv), "--no-filter", "--budget", "8",
                   "--out", str(out), "--curves", str(curves))
        assert code == 0
        report = json.loads(out.read_text())
        assert report["evals"] == 9
        assert report["seed"] == 42
        assert set(report["theta"]) == {"m", "dT", "v1", "v2", "mach"}
        with open(curves, newline="") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == CURVE_COLUMNS
        assert len(rows) == 1 + 61

    def test_fit_rejected_by_filters(self, tmp_path, short_climb_csv):
        assert run("fit", "--obs", str(short_climb_csv), "--budget", "8", "--out", str(tmp_path / "f.json")) == 2

    def test_fit_malformed_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t_s,alt_ft\n0,1500\n")
        assert run("fit", "--obs", str(bad), "--no-filter", "--out", str(tmp_path / "f.json")) == 2

    def test_predict_prefix_too_short(self, tmp_path, short_climb_csv):
        code = run("predict", "--obs", str(short_climb_csv), "--present", "100",
                   "--out", str(tmp_path / "p.csv"))
        assert code == 5

    def test_predict_naive(self, tmp_path, short_climb_csv):
        out = tmp_path / "p.csv"
        code = run("predict", "--obs", str(short_climb_csv), "--present", "100", "--horizon", "100",
                   "--strategy", "naive", "--budget", "8", "--out", str(out))
        assert code == 0
        assert parse_trajectory_csv(out).t[-1] == 200.0
        report = json.loads(out.with_suffix(".json").read_text())
        assert report["strategy"] == "naive"
        assert report["evals"] == 8
        assert report["lambda_used"] == 0.0
        assert report["fell_back"] is False


class TestDatasets:

    def test_synth(self, tmp_path):
        out = tmp_path / "data"
        assert run("synth", "--n", "2", "--seed", "3", "--noise", "0", "--out", str(out)) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["flight_0000.csv", "flight_0001.csv", "truth.csv"]

    def test_synth_range_outside_bounds(self, tmp_path):
        spec = tmp_path / "synth.yaml"
        spec.write_text("mass_range: [30000, 60000]\n")
        assert run("synth", "--n", "1", "--spec", str(spec), "--out", str(tmp_path / "d")) == 2

    def test_offline_needs_five_trajectories(self, tmp_path):
        write_dataset(tmp_path, [Flight(f"f{i}", _linear()) for i in range(4)])
        assert run("evaluate-offline", "--dataset", str(tmp_path), "--jobs", "1") == 6

    def test_filters_reduce_dataset(self, tmp_path):
        flights = [Flight(f"f{i}", _linear()) for i in range(4)]
        flights += [Flight("short", _linear(100)), Flight("shorter", _linear(150))]
        write_dataset(tmp_path, flights)
        assert run("evaluate-online", "--dataset", str(tmp_path), "--jobs", "1") == 6

    def test_missing_dataset(self, tmp_path):
        assert run("evaluate-offline", "--dataset", str(tmp_path / "none")) == 2


# ── Determinism ──────────────────────────────────────────────────────────────

def _twice(tmp_path, make_argv):
    """Run a command into two fresh directories and return the written files."""
    outputs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        assert run(*make_argv(d)) == 0
        outputs.append({p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()})
    return outputs


class TestDeterminism:

    def test_simulate(self, tmp_path):
        a, b = _twice(tmp_path, lambda d: ("simulate", "--horizon", "300", "--params", "m=70000",
                                           "--out", str(d / "sim.csv")))
        assert a == b and list(a) == ["sim.csv"]

    def test_mass_sweep(self, tmp_path):
        a, b = _twice(tmp_path, lambda d: ("mass-sweep", "--horizon", "300", "--out", str(d / "sweep.csv")))
        assert a == b

    def test_synth(self, tmp_path):
        a, b = _twice(tmp_path, lambda d: ("synth", "--n", "3", "--seed", "11", "--out", str(d / "data")))
        assert a == b and len(a) == 4

    def test_fit(self, tmp_path, short_climb_csv):
        a, b = _twice(tmp_path, lambda d: ("fit", "--obs", str(short_climb_csv), "--no-filter",
                                           "--budget", "16", "--seed", "7",
                                           "--out", str(d / "fit.json"), "--curves", str(d / "curves.csv")))
        assert a == b and set(a) == {"fit.json", "curves.csv"}

    def test_predict(self, tmp_path, short_climb_csv):
        a, b = _twice(tmp_path, lambda d: ("predict", "--obs", str(short_climb_csv), "--present", "100",
                                           "--horizon", "100", "--strategy", "naive", "--budget", "16",
                                           "--out", str(d / "p.csv")))
        assert a == b and set(a) == {"p.csv", "p.json"}

    @pytest.mark.slow
    def test_evaluate_offline(self, tmp_path):
        data = tmp_path / "data"
        assert run("synth", "--n", "5", "--seed", "5", "--noise", "0", "--out", str(data)) == 0
        a, b = _twice(tmp_path, lambda d: ("evaluate-offline", "--dataset", str(data), "--no-filter",
                                           "--budget", "16", "--jobs", "2",
                                           "--report", str(d / "offline.txt")))
        assert a == b and set(a) == {"offline.txt", "offline.csv"}
