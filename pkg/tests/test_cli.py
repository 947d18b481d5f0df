import io
import json
import re
import subprocess
import sys

import pytest

from conftest import PROGRAMS
from qlambda.cli import RunConfig, main
from qlambda.rewrite import Mode


def call(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, out.getvalue()


def final(text):
    line = text.strip().splitlines()[-1]
    return dict(kv.split("=") for kv in re.findall(r"\w+=\S+", line))


# -- check --------------------------------------------------------------------


def test_check_coin_ok():
    code, out = call("check", PROGRAMS / "coin.ql")
    assert code == 0 and "valid" in out


def test_check_duplicate_register():
    code, out = call("check", PROGRAMS / "dup_register.ql")
    assert code == 1 and "r0" in out


def test_check_malformed(tmp_path):
    f = tmp_path / "bad.ql"
    f.write_text(r"(\x. x")
    assert call("check", f)[0] == 2


def test_check_missing_file(tmp_path):
    assert call("check", tmp_path / "nope.ql")[0] == 1


# -- run ----------------------------------------------------------------------


def test_run_coin_limit():
    code, out = call("run", PROGRAMS / "coin.ql", "--mode", "strict", "--max-steps", 200, "--quiet")
    f = final(out)
    assert code == 0 and float(f["pr"]) >= 0.99996
    assert float(f["limit_estimate"]) >= 1 - 2**-15


def test_run_entangled():
    code, out = call("run", PROGRAMS / "entangled.ql", "--mode", "strict")
    f = final(out)
    assert code == 0 and f["stop"] == "normal" and f["entries"] == "2"
    assert float(f["pr"]) == 1.0


def test_run_snf_constant():
    code, out = call("run", PROGRAMS / "snf.ql")
    f = final(out)
    assert f["steps"] == "0" and f["entries"] == "1" and float(f["pr"]) == 1.0


def test_run_capacity_guard():
    assert call("run", PROGRAMS / "pair_new.ql", "--max-qubits", 1)[0] == 3


def test_run_invalid_program():
    assert call("run", PROGRAMS / "dup_register.ql")[0] == 1


def test_run_bad_config():
    assert call("run", PROGRAMS / "snf.ql", "--delta", 0)[0] == 1
    with pytest.raises(ValueError):
        RunConfig(Mode.STRICT, max_steps=0)


def test_run_csv(tmp_path):
    csv = tmp_path / "pr.csv"
    call("run", PROGRAMS / "coin.ql", "--max-steps", 12, "--quiet", "--csv", csv)
    lines = csv.read_text().splitlines()
    assert lines[0] == "step,pr" and lines[5] == "4,0.5" and lines[-1] == "12,0.875"


def test_jsonl_replays_deterministically(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"t{k}.jsonl"
        call("run", PROGRAMS / "coin.ql", "--scheduler", "random", "--seed", 9, "--max-steps", 30, "--quiet", "--json", path)
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    recs = [json.loads(line) for line in outs[0].splitlines()]
    assert recs[0]["step"] == 0 and recs[0]["schedule"] is None
    assert {"step", "mode", "schedule", "entries", "pr_snf"} <= set(recs[-1])


def test_script_scheduler(tmp_path):
    script = tmp_path / "s.json"
    # fire the inner allocation first, then the outer one
    script.write_text(json.dumps([[["body", "arg", "arg"]], [["body", "fun", "arg"]]]))
    code, out = call("run", PROGRAMS / "pair_new.ql", "--scheduler", "script", "--script", script, "--mode", "surface")
    f = final(out)
    assert code == 0 and f["stop"] == "script-exhausted" and f["steps"] == "2"


def test_script_bad_position(tmp_path):
    script = tmp_path / "s.json"
    script.write_text(json.dumps([[["arg"]]]))
    assert call("run", PROGRAMS / "pair_new.ql", "--scheduler", "script", "--script", script)[0] == 1


# -- props and gates ----------------------------------------------------------


def test_props_small(tmp_path):
    code, out = call("props", "diamond", "--count", 20, "--size", 10)
    assert code == 0
    report = json.loads(out.strip().splitlines()[-1])
    assert report[0]["property"] == "diamond" and report[0]["tried"] == 20 and report[0]["failed"] == 0


def test_props_invariants_lists_all(tmp_path):
    path = tmp_path / "r.json"
    code, out = call("props", "invariants", "--count", 10, "--json", path)
    names = {v["property"] for v in json.loads(path.read_text())}
    assert code == 0 and {"norm", "mass", "validity"} <= names and len(names) == 18


def test_gates_listing(tmp_path):
    code, out = call("gates")
    assert code == 0 and "CNOT  arity=2" in out and "H  arity=1" in out
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"Z": [[1, 0], [0, -1]]}))
    assert "Z  arity=1" in call("gates", "--gates", g)[1]
    g.write_text(json.dumps({"Z": [[1, 1], [0, 1]]}))
    assert call("gates", "--gates", g)[0] == 2


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "qlambda", "check", str(PROGRAMS / "snf.ql")], capture_output=True, text=True
    )
    assert res.returncode == 0


def test_props_failure_exit_code(monkeypatch):
    from qlambda import cli
    from qlambda.analysis import PropertyVerdict

    monkeypatch.setattr(cli, "run_suite", lambda *a, **k: [PropertyVerdict.one("diamond", "failed", {"seed": 1})])
    assert call("props", "diamond", "--count", 1)[0] == 4
