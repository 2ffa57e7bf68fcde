import json

import pytest

from dictphase.cli import main


def test_gen_recover_certify(tmp_path, capsys):
    inst = tmp_path / "inst"
    assert main(["gen", "--n", "3", "--N", "4", "--m", "8", "--k", "1", "--seed", "2",
                 "--out", str(inst)]) == 0
    for name in ("frame.json", "ensemble.json", "observation.json", "truth.json"):
        assert (inst / name).exists()
    files = ["--frame", str(inst / "frame.json"), "--ensemble", str(inst / "ensemble.json")]
    assert main(["recover", *files, "--observation", str(inst / "observation.json"),
                 "--out", str(tmp_path / "res")]) == 0
    res = json.loads((tmp_path / "res" / "result.json").read_text())
    assert res["converged"]
    assert main(["certify", *files, "--drip", "1", "--sdrip", "1", "--out",
                 str(tmp_path / "cert")]) == 0
    rep = json.loads((tmp_path / "cert" / "certify.json").read_text())
    assert rep["drip"]["method"] == "exact" and "theta_minus" in rep["sdrip"]


def test_certify_nsp_counterexample_exit_code(tmp_path):
    inst = tmp_path / "inst"
    main(["gen", "--n", "2", "--m", "1", "--frame-kind", "identity", "--out", str(inst)])
    code = main(["certify", "--frame", str(inst / "frame.json"), "--ensemble",
                 str(inst / "ensemble.json"), "--nsp", "1", "--out", str(tmp_path / "c")])
    rep = json.loads((tmp_path / "c" / "certify.json").read_text())
    assert rep["nsp"]["status"] == "counterexample" and code == 2


def test_sweep_and_selftest(tmp_path):
    cfg = {"n": 3, "N": 4, "k": 1, "m_grid": [6], "eps_grid": [0.0], "trials": 2, "seed": 1}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(tmp_path / "cfg.json"), "--out", str(out),
                 "--audit", "--seed", "4"]) == 0
    assert {p.name for p in out.iterdir()} >= {"records.csv", "summary.json", "config-echo.json"}
    assert json.loads((out / "config-echo.json").read_text())["seed"] == 4
    assert main(["selftest", "--polytope-trials", "20", "--power-sum-trials", "100",
                 "--lemma-trials", "5", "--out", str(tmp_path / "st")]) == 0
    assert json.loads((tmp_path / "st" / "selftest.json").read_text())["passed"]


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["gen", "--n", "3"],
    ["gen", "--n", "3", "--m", "4", "--k", "9", "--out", "x"],
    ["sweep", "--config", "/nonexistent.json", "--out", "x"],
    ["sweep", "--config", "/nonexistent.json", "--out", "x", "--jobs", "0"],
])
def test_usage_errors_exit_1(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_certify_needs_a_check(tmp_path):
    inst = tmp_path / "inst"
    main(["gen", "--n", "2", "--m", "3", "--out", str(inst)])
    assert main(["certify", "--frame", str(inst / "frame.json"), "--ensemble",
                 str(inst / "ensemble.json")]) == 1
