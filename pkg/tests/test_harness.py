import json
import os
import shutil

import numpy as np
import pandas as pd
import pytest

from conftest import checked_fixture
from harness import chaos_runner
from harness.chaos_runner import (
    SERIES,
    fit_rate,
    model_class,
    run_chaos,
    select_oracle,
)
from harness.validation_suite import run_validation, scheme_gap
from models.errors import DegenerateInput, InvalidField, OracleUnavailable
from reporting.report_printer import ReportPrinter
from scheduler.replication_pool import ReplicationPool, replication_seed
from storage.result_store import ResultStore


# ----------------------------------------------------------------------------
# seeds + pool
# ----------------------------------------------------------------------------
def test_replication_seeds():
    assert replication_seed(7, 3) == replication_seed(7, 3)
    seeds = {replication_seed(7, rep) for rep in range(100)}
    assert len(seeds) == 100
    assert replication_seed(7, 0) != replication_seed(8, 0)
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_pool_keeps_item_order():
    def job(i):
        return i * i

    assert ReplicationPool(4).run(job, range(20)) == [i * i for i in range(20)]
    assert ReplicationPool(1).run(job, [3, 1]) == [9, 1]


def test_pool_reraises_lowest_failing_replication():
    def job(i):
        if i in (1, 2):
            raise RuntimeError(f"rep {i}")
        return i

    with pytest.raises(RuntimeError, match="rep 1"):
        ReplicationPool(3).run(job, range(3))
    with pytest.raises(ValueError):
        ReplicationPool(0)


# ----------------------------------------------------------------------------
# rate fit
# ----------------------------------------------------------------------------
def test_fit_rate_exact_power_law():
    slope, intercept, r2 = fit_rate([1, 2, 4], [1.0, 0.5, 0.25])
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert intercept == pytest.approx(0.0, abs=1e-12)
    assert r2 == pytest.approx(1.0)


def test_fit_rate_flat_and_noisy():
    assert fit_rate([1, 2, 4, 8], [0.3] * 4)[0] == pytest.approx(0.0, abs=1e-12)
    slope = fit_rate([1, 2, 4, 8], [1.0, 0.51, 0.26, 0.125])[0]
    assert slope == pytest.approx(-1.0, abs=0.03)


def test_fit_rate_nonpositive_errors():
    with pytest.raises(DegenerateInput):
        fit_rate([1, 2, 4], [0.0, 0.0, -1.0])
    # the zero is floored at the smallest positive error
    slope = fit_rate([1, 2, 4], [1.0, 0.25, 0.0])[0]
    assert slope == pytest.approx(fit_rate([1, 2, 4], [1.0, 0.25, 0.25])[0])
    with pytest.raises(ValueError):
        fit_rate([1, 2], [1.0])


# ----------------------------------------------------------------------------
# oracle choice + model classes
# ----------------------------------------------------------------------------
@pytest.mark.parametrize("name,expected", [
    ("linear_closed_form.json", "linear"),
    ("smooth_chaos.json", "smooth"),
    ("nonsmooth.json", "nonsmooth"),
    ("yz_linear.json", "linear_z"),
])
def test_model_class(name, expected):
    assert model_class(checked_fixture(name, N=100)) == expected


def test_select_oracle():
    linear = checked_fixture("linear_closed_form.json", N=100)
    assert select_oracle(linear).provenance["oracle"] == "closed_form_linear"
    yz = checked_fixture("yz_linear.json", N=100)
    with pytest.raises(OracleUnavailable):
        select_oracle(yz, proxy_particles=0)
    assert select_oracle(yz, proxy_particles=500).provenance["oracle"] == "proxy"


# ----------------------------------------------------------------------------
# chaos sweep
# ----------------------------------------------------------------------------
def test_chaos_sweep_checks_sizes():
    checked = checked_fixture("linear_closed_form.json", N=100)
    with pytest.raises(InvalidField):
        run_chaos(checked, N_list=[10, 20], reps=2)
    with pytest.raises(InvalidField):
        run_chaos(checked, N_list=[10, 20, 40, 80], reps=1)
    with pytest.raises(InvalidField):
        run_chaos(checked, N_list=[10, 40, 20, 80], reps=2)


def test_small_chaos_sweep():
    checked = checked_fixture("linear_closed_form.json", N=100)
    sizes = [20, 40, 80, 160]
    report = run_chaos(checked, N_list=sizes, reps=2)
    assert report.model_class == "linear"
    assert report.oracle["oracle"] == "closed_form_linear"
    assert [p["N"] for p in report.per_N] == sizes
    assert set(report.fits) == set(SERIES)
    assert report.fits["err_K"]["expected_band"] is not None
    assert report.fits["err_Y"]["expected_band"] is None
    for point in report.per_N:
        assert point["reps"] == 2
        assert point["err_Y_mean"] >= 0.0
        assert point["bound_mean"] > 0.0
    frame = report.points_frame()
    assert list(frame["N"]) == sizes
    json.dumps(report.to_dict())

    threaded = run_chaos(checked, N_list=sizes, reps=2, threads=2)
    assert threaded.per_N == report.per_N


def test_replications_run_single_threaded(monkeypatch):
    seen = []
    real = chaos_runner.replication_errors

    def spy(checked, cfg, ref):
        seen.append(cfg.threads)
        return real(checked, cfg, ref)

    monkeypatch.setattr(chaos_runner, "replication_errors", spy)
    checked = checked_fixture("linear_closed_form.json", N=100)
    run_chaos(checked, checked.cfg.with_updates(threads=4), N_list=[20, 40, 80, 160],
              reps=2, threads=2)
    assert len(seen) == 8
    assert set(seen) == {1}


def test_floored_points_are_counted(monkeypatch):
    def fake(checked, cfg, ref):
        zero_K = cfg.N >= 80
        return {"err_Y": 1.0 / cfg.N, "err_K": 0.0 if zero_K else 1.0 / cfg.N,
                "err_Z": 1.0 / cfg.N, "bound": 1.0}

    monkeypatch.setattr(chaos_runner, "replication_errors", fake)
    checked = checked_fixture("linear_closed_form.json", N=100)
    report = run_chaos(checked, N_list=[20, 40, 80, 160], reps=2)
    assert report.fits["err_K"]["n_floored"] == 2
    assert report.fits["err_Y"]["n_floored"] == 0
    assert report.fits["err_Y"]["slope"] == pytest.approx(-1.0)
    assert "err_K: slope" in ReportPrinter().generate_chaos_text(report)
    assert "(2 floored)" in ReportPrinter().generate_chaos_text(report)



# ----------------------------------------------------------------------------
# validation suites
# ----------------------------------------------------------------------------
def test_every_validation_check_passes():
    results = run_validation()
    failed = [(r.suite, r.name, r.detail) for r in results if not r.passed]
    assert not failed
    assert {r.suite for r in results} == {"reflection", "solver", "oracle"}


def test_unknown_suite():
    with pytest.raises(InvalidField):
        run_validation("everything")


def test_perstep_and_picard_agree_in_regression_mode():
    checked = checked_fixture("demo.json", N=1000)
    cfg = checked.cfg
    gap = scheme_gap(checked, cfg)
    assert 0.0 < gap <= 5.0 * cfg.tol_fix + float(np.max(cfg.grid.dt))



def test_corrupted_golden_file_fails(fixtures_dir, tmp_path):
    copy = tmp_path / "fixtures"
    shutil.copytree(fixtures_dir, copy)
    golden = copy / "golden" / "tree_n1_m1.json"
    doc = json.loads(golden.read_text(encoding="utf-8"))
    doc["expected"]["Y"][0] = [[0.75]]
    golden.write_text(json.dumps(doc), encoding="utf-8")

    results = {r.name: r for r in run_validation("oracle", str(copy))}
    assert not results["golden tree file"].passed
    assert results["closed form vs limit solver"].passed


def test_missing_golden_file_fails(fixtures_dir, tmp_path):
    copy = tmp_path / "fixtures"
    shutil.copytree(fixtures_dir, copy)
    os.remove(copy / "golden" / "tree_n1_m1.json")
    results = {r.name: r for r in run_validation("oracle", str(copy))}
    assert not results["golden tree file"].passed


# ----------------------------------------------------------------------------
# result store
# ----------------------------------------------------------------------------
def test_result_store_json(tmp_path):
    store = ResultStore(str(tmp_path / "out"))
    store.write_json("a.json", {"x": np.float64(1.5), "n": np.int64(3),
                                "arr": np.array([1.0, np.nan]), "inf": float("inf")})
    assert store.read_json("a.json") == {"x": 1.5, "n": 3, "arr": [1.0, None], "inf": None}
    assert sorted(os.listdir(tmp_path / "out")) == ["a.json"]


def test_result_store_tables(tmp_path):
    store = ResultStore(str(tmp_path))
    store.write_frame("t.csv", pd.DataFrame({"k": [0, 1], "v": [0.5, 1.0 / 3.0]}))
    assert (tmp_path / "t.csv").read_text(encoding="utf-8") == "k,v\n0,0.5\n1,0.333333333333\n"

    path = store.write_rate_file("err_Y", [10, 20], [0.5, 0.25], header="N err_Y_mean")
    assert path.endswith("err_Y.dat")
    assert (tmp_path / "err_Y.dat").read_text(encoding="utf-8") == \
        "# N err_Y_mean\n10 0.5\n20 0.25\n"


# ----------------------------------------------------------------------------
# full sweeps
# ----------------------------------------------------------------------------
@pytest.mark.slow
@pytest.mark.parametrize("name", ["smooth_chaos.json", "yz_linear.json"])
def test_chaos_rates_within_band(name):
    report = run_chaos(checked_fixture(name))
    assert report.all_within_band(), report.fits
    assert report.fits["err_Y"]["r2"] >= 0.8, report.fits
    assert report.bound_trend_ok
    assert report.monotone_err_Y
