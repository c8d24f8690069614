import json

import pytest

from conftest import brownian_model, fixture_path, model_document
from main import main, parse_n_list
from models.errors import InvalidField


def _last_json_line(capsys):
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    return json.loads(lines[-1])


def test_solve_writes_results(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["solve", "--config", fixture_path("demo.json"), "--out", str(out), "--N", "100"])
    assert code == 0
    for name in ("solution.csv", "summary.json", "timing.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["N"] == 100
    assert summary["config"]["id"] == "demo"
    assert summary["K_T"] > 0.0
    assert "SOLVE SUMMARY" in capsys.readouterr().out


def test_solve_is_reproducible(tmp_path):
    for run in ("a", "b"):
        assert main(["solve", "--config", fixture_path("demo.json"),
                     "--out", str(tmp_path / run), "--N", "100", "--particles"]) == 0
    for name in ("solution.csv", "summary.json", "particles.csv", "paths.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_from_environment(tmp_path, monkeypatch):
    from config.config import RUNTIME_CONFIG

    monkeypatch.setitem(RUNTIME_CONFIG, "seed", "99")
    assert main(["solve", "--config", fixture_path("demo.json"),
                 "--out", str(tmp_path), "--N", "50"]) == 0
    assert json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))["seed"] == 99


def test_bad_model_exits_with_error_record(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(model_document(brownian_model(
        constraint={"name": "affine", "a": -1.0, "b": 0.0})), encoding="utf-8")
    code = main(["solve", "--config", str(config), "--out", str(tmp_path / "out")])
    assert code == 2
    assert _last_json_line(capsys)["error"] == "BadLipschitzBounds"
    assert not (tmp_path / "out").exists()


def test_missing_config(tmp_path, capsys):
    code = main(["solve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 2
    assert _last_json_line(capsys)["error"] == "ParseError"


def test_unknown_suite(capsys):
    assert main(["validate", "--suite", "everything"]) == 2
    assert _last_json_line(capsys)["error"] == "InvalidField"


def test_validate_reflection_suite(capsys):
    assert main(["validate", "--suite", "reflection"]) == 0
    assert "checks passed" in capsys.readouterr().out


def test_limit_command(tmp_path):
    assert main(["limit", "--config", fixture_path("linear_closed_form.json"),
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "limit.csv").exists()
    payload = json.loads((tmp_path / "limit.json").read_text(encoding="utf-8"))
    assert payload["oracle"] == "closed_form_linear"
    assert payload["K_T"] == 0.0


def test_chaos_needs_four_sizes(tmp_path, capsys):
    code = main(["chaos", "--config", fixture_path("linear_closed_form.json"),
                 "--n", "10,20", "--reps", "2", "--out", str(tmp_path)])
    assert code == 2
    assert _last_json_line(capsys)["error"] == "InvalidField"


def test_chaos_command_writes_rate_files(tmp_path):
    code = main(["chaos", "--config", fixture_path("linear_closed_form.json"),
                 "--n", "20,40,80,160", "--reps", "2", "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["N_list"] == [20, 40, 80, 160]
    for key in ("err_Y", "err_K", "err_Z", "bound"):
        lines = (tmp_path / f"{key}.dat").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 5


def test_parse_n_list():
    assert parse_n_list("10, 20,40") == [10, 20, 40]
    with pytest.raises(InvalidField):
        parse_n_list("10,x")
