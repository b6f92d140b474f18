"""Shared fixtures: the shipped aircraft model and a nominal climb."""

import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import pytest

from tests.helpers import observed_climb
from utils.dataio import load_perf
from utils.dynamics import DynamicsConfig, TuningParams

PERF_FILE = os.path.join(_ROOT, "config", "a320_like.perf")


@pytest.fixture(scope="session")
def model():
    return load_perf(PERF_FILE)


@pytest.fixture(scope="session")
def dyn_cfg():
    return DynamicsConfig()


@pytest.fixture(scope="session")
def nominal(model):
    return TuningParams.nominal(model)


@pytest.fixture(scope="session")
def nominal_climb(nominal, dyn_cfg, model):
    return observed_climb(nominal, dyn_cfg, model)
