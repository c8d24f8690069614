import json
import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

from config.config import RUNTIME_CONFIG  # noqa: E402
from models.config_loader import load_config, load_config_file  # noqa: E402
from models.model_spec import validate_model  # noqa: E402

FIXTURES_DIR = os.path.join(ROOT, "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES_DIR, name)


def load_fixture(name, **updates):
    spec, cfg = load_config_file(fixture_path(name))
    if updates:
        cfg = cfg.with_updates(**updates)
    return spec, cfg


def checked_fixture(name, **updates):
    spec, cfg = load_fixture(name, **updates)
    return validate_model(spec, cfg)


def model_document(model, solver=None, model_id="test"):
    """JSON text of a config document built from plain dicts."""
    return json.dumps({
        "id": model_id,
        "model": model,
        "solver": solver or {"N": 100, "seed": 1, "grid": {"steps": 4}},
    })


def brownian_model(terminal=None, driver=None, constraint=None, T=1.0, x0=0.0):
    return {
        "x0": x0,
        "T": T,
        "drift": {"name": "constant", "c": 0.0},
        "diffusion": {"name": "constant", "c": 1.0},
        "terminal": terminal or {"name": "affine", "a": 1.0, "b": 0.0},
        "driver": driver or {"name": "zero", "mode": "constant"},
        "constraint": constraint or {"name": "affine", "a": 1.0, "b": 0.0},
    }


def parse_document(model, solver=None):
    return load_config(model_document(model, solver))


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def demo():
    return checked_fixture("demo.json", N=200)


@pytest.fixture(autouse=True)
def quiet_runtime(monkeypatch, tmp_path):
    """Keep env overrides out of the tests and logs out of the repo."""
    monkeypatch.setitem(RUNTIME_CONFIG, "seed", None)
    monkeypatch.setitem(RUNTIME_CONFIG, "threads", None)
    monkeypatch.setitem(RUNTIME_CONFIG, "log_dir", str(tmp_path / "logs"))
