import json
import math

import numpy as np
import pytest

from dictphase import certify, harness
from dictphase.harness import ExperimentConfig, audit_bound, run_sweep, run_trial
from dictphase.solver import SolverConfig


def small_cfg(**kw):
    base = dict(n=4, N=6, k=1, m_grid=(8, 16), eps_grid=(0.0, 0.02), trials=3, seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    for bad in [dict(m_grid=()), dict(eps_grid=()), dict(trials=0), dict(success_threshold=0.0),
                dict(frame_kind="bogus"), dict(frame_kind="identity"), dict(k=7)]:
        with pytest.raises(ValueError):
            small_cfg(**bad)


def test_config_json_round_trip():
    cfg = small_cfg(solver=SolverConfig(restarts=4))
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
    assert json.loads(cfg.to_json())["solver"]["restarts"] == 4


def test_run_trial_deterministic():
    cfg = small_cfg()
    a = run_trial(cfg, 2, 16, 0.02)
    b = run_trial(cfg, 2, 16, 0.02)
    assert a == b
    assert a.trial_seed == harness.trial_seed(cfg, 2)


def test_run_trial_k_zero():
    rec = run_trial(small_cfg(k=0), 0)
    assert rec.success and rec.error == 0.0 and rec.x0_norm == 0.0


def test_run_trial_identity_frame():
    rec = run_trial(small_cfg(N=4, frame_kind="identity"), 1, 16, 0.0)
    assert rec.success and rec.sigma_k == 0.0


def test_instance_rows_nested_in_m():
    cfg = small_cfg()
    _, _, _, x_a, A8 = harness.make_instance(cfg, 0, 8)
    _, _, _, x_b, A16 = harness.make_instance(cfg, 0, 16)
    assert np.array_equal(x_a, x_b)
    assert np.allclose(A8 * math.sqrt(8), A16[:8] * math.sqrt(16), rtol=0, atol=1e-15)


def test_large_m_mostly_succeeds():
    m = math.ceil(10 * 2 * math.log(16 / 2))
    cfg = ExperimentConfig(n=16, N=24, k=2, m_grid=(m,), trials=10, seed=0)
    _, summary = run_sweep(cfg)
    assert summary["cells"][0]["success_rate"] >= 0.8


def test_sweep_shape_and_success_flag():
    cfg = small_cfg()
    records, summary = run_sweep(cfg)
    assert len(records) == summary["rows"] == 2 * 2 * 3
    assert len(summary["cells"]) == 4
    for r in records:
        if r.success:
            assert r.error <= r.success_threshold * r.x0_norm


def test_sweep_reproducible_from_echo(tmp_path):
    cfg = small_cfg()
    records, summary = run_sweep(cfg)
    harness.write_outputs(tmp_path / "a", cfg, records, summary)
    echo = ExperimentConfig.from_json((tmp_path / "a" / "config-echo.json").read_text())
    records2, summary2 = run_sweep(echo, jobs=2)
    harness.write_outputs(tmp_path / "b", echo, records2, summary2)
    assert (tmp_path / "a" / "records.csv").read_bytes() == (tmp_path / "b" / "records.csv").read_bytes()
    rows = harness.read_records_csv(tmp_path / "a" / "records.csv")
    assert list(rows[0]) == harness.CSV_COLUMNS
    assert float(rows[3]["error"]) == records[3].error
    assert "runtime" not in rows[0]


def test_monotone_helper():
    summ = {"cells": [{"m": 8, "eps": 0.0, "success_rate": 0.5},
                      {"m": 16, "eps": 0.0, "success_rate": 0.45},
                      {"m": 24, "eps": 0.0, "success_rate": 0.3}]}
    assert not harness.monotone_in_m(summ)
    summ["cells"][2]["success_rate"] = 0.9
    assert harness.monotone_in_m(summ)


def test_audit_bookkeeping_and_noiseless_exactness():
    cfg = ExperimentConfig(n=4, N=4, k=1, m_grid=(12,), eps_grid=(0.0,), trials=6, seed=5,
                           frame_kind="identity")
    records, _ = run_sweep(cfg, keep_instance=True)
    rep = audit_bound(cfg, records)
    assert rep["excluded"] == rep["total"] - rep["oracle_confirmed"]
    assert rep["violations"] == 0
    for row, rec in zip(rep["records"], records):
        if row.get("confirmed") and row.get("covered"):
            # eps = 0 and sigma_k = 0: the bound collapses to its measured-residual part
            assert row["sigma_k"] == 0.0
            assert rec.error <= 1e-6
            c = certify.stability_constants(row["delta_T"], cfg.t)
            assert (row["c1"], row["c2"]) == (c.c1, c.c2)


def test_audit_regenerates_instances():
    cfg = small_cfg(m_grid=(16,), eps_grid=(0.01,), trials=2)
    with_inst, _ = run_sweep(cfg, keep_instance=True)
    without, _ = run_sweep(cfg)
    a = audit_bound(cfg, with_inst)
    b = audit_bound(cfg, without)
    assert [r.get("bound") for r in a["records"]] == [r.get("bound") for r in b["records"]]
