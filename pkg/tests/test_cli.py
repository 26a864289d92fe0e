import json

import pytest

from conftest import DATA, requires_solver
from lpctl.cli import (EXIT_INPUT, EXIT_NO, EXIT_RESOURCE, EXIT_UNKNOWN, EXIT_YES, load_rc,
                       main)
from lpctl.model import load_model

LEFT, MIDDLE, RIGHT = (str(DATA / f"bundled-{n}.json") for n in ("left", "middle", "right"))
EX = "s0 -> (P[F^2 s1] = 5/8 & (P[X s1] >= 1/2 | P[X s1] <= 1/4))"


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))
    monkeypatch.delenv("PCTL_SMT_CMD", raising=False)
    monkeypatch.delenv("PCTL_SMT_CMD2", raising=False)
    return tmp_path


def run_json(capsys, *argv):
    code = main([*argv, "--json"])
    return code, json.loads(capsys.readouterr().out)


def test_check_global_holds(capsys):
    code, out = run_json(capsys, "check", "--model", LEFT, "--formula", "AG (P[F^2 s2] >= 9/16)")
    assert code == EXIT_YES and out["holds"]


def test_check_counterexample(capsys):
    code, out = run_json(capsys, "check", "--model", LEFT, "--formula", "s0", "--global")
    assert code == EXIT_NO and out["counterexample"] == "s1"


def test_check_measures(capsys):
    code, out = run_json(capsys, "check", "--model", LEFT, "--formula", "P[F^2 s2] >= 9/16",
                         "--measures")
    assert code == EXIT_YES and out["measures"]["F^2 s2"]["s0"] == "9/16"


def test_check_mdp_needs_strategy(capsys):
    assert main(["check", "--model", MIDDLE, "--formula", "s0"]) == EXIT_INPUT


def test_formula_file_and_conflict(capsys, isolated):
    f = isolated / "phi.pctl"
    f.write_text("AG (P[F^2 s2] >= 9/16)\n")
    assert main(["check", "--model", LEFT, "--formula", str(f)]) == EXIT_YES
    assert main(["check", "--model", LEFT, "--formula-file", str(f)]) == EXIT_YES
    assert main(["check", "--model", LEFT, "--formula", "s0", "--formula-file", str(f)]) == EXIT_INPUT


def test_syntax_error_exit_code(capsys):
    assert main(["check", "--model", LEFT, "--formula", "P[X^0 s2] >= 1"]) == EXIT_INPUT
    assert "position 4" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as e:
        main(["check"])
    assert e.value.code == EXIT_INPUT


def test_missing_model(capsys):
    assert main(["check", "--model", "nope.json", "--formula", "p"]) == EXIT_INPUT


def test_synth_det_global_and_strategy_round_trip(capsys, isolated):
    out_file = isolated / "strat.json"
    code, out = run_json(capsys, "synth", "--model", MIDDLE, "--formula", EX, "--global", "--det",
                         "--out-strategy", str(out_file))
    assert code == EXIT_YES and out["lane"] == "det"
    code = main(["check", "--model", MIDDLE, "--formula", EX, "--global",
                 "--strategy", str(out_file)])
    assert code == EXIT_YES


def test_synth_det_global_failure(capsys):
    code, out = run_json(capsys, "synth", "--model", RIGHT, "--formula", "P[F^2 s2] >= 9/16",
                         "--global", "--det")
    assert code == EXIT_NO and out["verdict"] == "no"


def test_synth_resource_cap(capsys):
    code = main(["synth", "--model", RIGHT, "--formula", "P[F^4 s2] >= 1/2", "--global", "--det",
                 "--cap", "10"])
    assert code == EXIT_RESOURCE


@requires_solver
def test_synth_auto_global(capsys):
    code, out = run_json(capsys, "synth", "--model", RIGHT, "--formula", "AG (P[F^2 s2] >= 9/16)",
                         "--budget-iters", "1")
    assert code == EXIT_YES and out["lane"] == "memoryless"


def test_encode_to_file(capsys, isolated):
    out = isolated / "e.smt2"
    assert main(["encode", "--model", RIGHT, "--formula", "P[F^2 s2] >= 9/16",
                 "--out", str(out)]) == EXIT_YES
    assert out.read_text() == (DATA / "example-right-f2.smt2").read_text()
    assert main(["encode", "--model", RIGHT, "--formula", "P[F^2 s2] >= 9/16",
                 "--mode", "fstep:1"]) == EXIT_YES
    assert "(check-sat)" in capsys.readouterr().out
    assert main(["encode", "--model", RIGHT, "--formula", "p", "--mode", "bogus"]) == EXIT_INPUT


@requires_solver
def test_refute_codes(capsys, isolated):
    model = isolated / "one.json"
    model.write_text(json.dumps({"type": "mdp", "states": ["s"], "initial": "s", "actions": ["a"],
                                 "props": ["p"], "labels": {"s": []},
                                 "transitions": [{"from": "s", "action": "a", "to": "s",
                                                  "prob": "1"}]}))
    code, out = run_json(capsys, "refute", "--model", str(model), "--formula", "AG (P[X p] >= 1)")
    assert code == EXIT_NO and out["iteration"] == 0
    code, out = run_json(capsys, "refute", "--model", RIGHT, "--formula", "P[F^2 s2] >= 9/16",
                         "--budget-iters", "1")
    assert code == EXIT_UNKNOWN and out["verdict"] == "not-refuted"


def test_refute_gate(capsys):
    assert main(["refute", "--model", MIDDLE, "--formula", "P[X (P[X s1] >= 1/2)] >= 1"]) == EXIT_INPUT


def test_sat_codes(capsys, isolated):
    out = isolated / "w.json"
    assert main(["sat", "--formula", "AG (P[X p] = 1/2)", "--granularity", "2",
                 "--out", str(out)]) == EXIT_YES
    mc = load_model(out.read_text())
    assert max(q.denominator for row in mc.trans for q in row.values()) <= 2
    capsys.readouterr()
    code, res = run_json(capsys, "sat", "--formula", "AG (P[X p] = 1/2)", "--granularity", "1")
    assert code == EXIT_NO and res["verdict"] == "unsat-at-granularity-1"


def test_gen_and_analyze(capsys, isolated):
    prog = isolated / "m.txt"
    prog.write_text("HALT\n")
    assert main(["gen", "minsky", "--program", str(prog), "--out", str(isolated / "h")]) == EXIT_YES
    assert (isolated / "h.json").exists() and (isolated / "h.pctl").exists()
    code, out = run_json(capsys, "analyze", "--formula", str(isolated / "h.pctl"))
    assert code == EXIT_YES and out["flat"] and out["nonstrict"] and out["global_window"]
    assert main(["gen", "reach", "--seed", "3"]) == EXIT_YES
    assert "oracle_winning" in json.loads(capsys.readouterr().out)
    assert main(["gen", "random", "--seed", "1"]) == EXIT_YES
    first = capsys.readouterr().out
    main(["gen", "random", "--seed", "1"])
    assert capsys.readouterr().out == first
    assert main(["gen", "minsky"]) == EXIT_INPUT


def test_rc_file(isolated, capsys):
    (isolated / ".pctlrc").write_text(json.dumps({"cap": 10}))
    assert load_rc() == {"cap": 10}
    code = main(["synth", "--model", RIGHT, "--formula", "P[F^4 s2] >= 1/2", "--global", "--det"])
    assert code == EXIT_RESOURCE
    (isolated / ".pctlrc").write_text("[1]")
    assert main(["analyze", "--formula", "p"]) == EXIT_INPUT
