import csv
import json
import math

import pytest

import qptransport.sweep as sweep_mod
from qptransport.errors import EmptyRange
from qptransport.sweep import (CSV_COLUMNS, SweepConfig, cache_key, fibonacci_sizes, read_csv,
                               records_to_csv, run_sweep, series)


def small(tmp_path, **kw):
    base = dict(model="fibonacci", lambdas=[1.0, 2.0], gammas=[0.0, 0.1], sizes=[8, 13, 21],
                output=str(tmp_path), name="t")
    base.update(kw)
    return SweepConfig(**base)


def test_fibonacci_sizes():
    assert fibonacci_sizes(34, 233) == [34, 55, 89, 144, 233]
    assert fibonacci_sizes(900, 1000) == [987]
    assert fibonacci_sizes(2, 1597)[-1] == 1597
    assert fibonacci_sizes(2, 20) == [2, 3, 5, 8, 13]
    with pytest.raises(EmptyRange):
        fibonacci_sizes(90, 100)
    with pytest.raises(ValueError):
        fibonacci_sizes(10, 5)


def test_cache_key_properties():
    p = next(small("/tmp").points())
    assert cache_key(p) == cache_key(dict(p))
    assert cache_key(p) != cache_key(dict(p, Gamma=0.5))
    assert cache_key(p, "0.1.0") != cache_key(p, "0.2.0")


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(model="aah", lambdas=[], gammas=[0.0], sizes=[5])
    with pytest.raises(ValueError):
        SweepConfig(model="aah", lambdas=[1.0], gammas=[0.0], sizes=[8, 5])
    with pytest.raises(ValueError):
        SweepConfig(model="aah", lambdas=[1.0], gammas=[0.0], sizes=[5], theta_samples=0)
    with pytest.raises(ValueError):
        SweepConfig(model="nope", lambdas=[1.0], gammas=[0.0], sizes=[5])
    with pytest.raises(ValueError):
        SweepConfig.from_dict(dict(model="aah", lambdas=[1.0], gammas=[0.0], sizes=[5], bogus=1))
    cfg = SweepConfig.from_dict(dict(model="clean", lambdas=[0], gammas=[0], sizes={"min": 5, "max": 40}))
    assert cfg.sizes == [5, 8, 13, 21, 34]


def test_record_count_order_and_files(tmp_path):
    cfg = small(tmp_path)
    recs = run_sweep(cfg)
    assert len(recs) == 2 * 2 * 3
    assert [(r.lam, r.Gamma, r.L) for r in recs] == sorted((r.lam, r.Gamma, r.L) for r in recs)
    with open(tmp_path / "t.csv") as fh:
        assert tuple(next(csv.reader(fh))) == CSV_COLUMNS
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["config"]["lambdas"] == [1.0, 2.0]
    assert "pi" in meta["theta_grid"] and meta["artifact_version"]
    back = read_csv(tmp_path / "t.csv")
    assert records_to_csv(back) == records_to_csv(recs)
    for r in recs:
        assert not r.error and r.residual <= 1e-9 and r.J_stderr == 0.0
        assert r.kappa == pytest.approx(r.J * r.L)


def test_cached_points_are_not_resolved(tmp_path, monkeypatch):
    cfg = small(tmp_path)
    first = run_sweep(cfg)
    calls = []
    real = sweep_mod.solve_point
    monkeypatch.setattr(sweep_mod, "solve_point", lambda p: calls.append(p) or real(p))
    again = run_sweep(cfg)
    assert calls == []
    assert records_to_csv(again) == records_to_csv(first)


def test_interrupted_sweep_resumes(tmp_path, monkeypatch):
    reference = records_to_csv(run_sweep(small(tmp_path / "ref")), include_timing=False)
    real = sweep_mod.solve_point
    budget = {"n": 5}

    def flaky(point):
        if budget["n"] == 0:
            raise KeyboardInterrupt
        budget["n"] -= 1
        return real(point)

    monkeypatch.setattr(sweep_mod, "solve_point", flaky)
    with pytest.raises(KeyboardInterrupt):
        run_sweep(small(tmp_path / "run"))
    journal = (tmp_path / "run" / "t.cache.jsonl").read_text().splitlines()
    assert len(journal) == 5
    monkeypatch.setattr(sweep_mod, "solve_point", real)
    resumed = run_sweep(small(tmp_path / "run"))
    assert records_to_csv(resumed, include_timing=False) == reference


def test_solver_failures_are_recorded_not_raised(tmp_path):
    cfg = SweepConfig(model="aah", lambdas=[1.5], gammas=[0.0], sizes=[8, 89], theta_samples=1,
                      precision="double", output=str(tmp_path), name="e")
    recs = run_sweep(cfg)
    assert not recs[0].error
    assert recs[1].error and math.isnan(recs[1].J)
    assert "e.csv" in {p.name for p in tmp_path.iterdir()}


def test_parallel_matches_serial(tmp_path):
    a = run_sweep(small(tmp_path / "a", workers=1))
    b = run_sweep(small(tmp_path / "b", workers=2))
    assert records_to_csv(a, include_timing=False) == records_to_csv(b, include_timing=False)


def test_phase_average_standard_error(tmp_path):
    cfg = SweepConfig(model="aah", lambdas=[1.0], gammas=[0.0], sizes=[13], theta_samples=6,
                      output=str(tmp_path), name="s")
    r = run_sweep(cfg)[0]
    assert r.theta_samples == 6 and r.J_stderr > 0
    one = run_sweep(SweepConfig(model="aah", lambdas=[1.0], gammas=[0.0], sizes=[13], theta_samples=1))[0]
    assert one.J_stderr == 0.0


def test_weak_aah_current_plateaus(tmp_path):
    cfg = SweepConfig(model="aah", lambdas=[0.1], gammas=[0.0], sizes=fibonacci_sizes(34, 233),
                      theta_samples=20)
    s = series(run_sweep(cfg), 0.1, 0.0)
    assert max(s.y) / min(s.y) < 1.2
