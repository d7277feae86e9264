import csv
import json
import shutil
import subprocess

import pytest

from bvu import formats
from bvu.cli import main
from bvu.exact import solve_bvu_exact
from bvu.model import BribeSolution, ElectionInstance, validate


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    assert run("generate", "random", "--sizes", "5,2", "--seed", 7, "-q", "-o", path) == 0
    return path


def test_generate_random_is_valid(instance_file):
    inst, meta = formats.instance_from_dict(json.loads(instance_file.read_text()))
    assert inst.sizes == (5, 2)
    assert validate(inst) == []
    assert meta["seed"] == 7


def test_generate_dsum_gadget(tmp_path):
    out = tmp_path / "g.json"
    assert run("generate", "dsum-gadget", "--xs", "1,2,3,4", "--d", 2, "--t", 5, "--alpha-target", 2,
               "-q", "-o", out) == 0
    data = json.loads(out.read_text())
    inst, meta = formats.instance_from_dict(data)
    assert inst.m == 2 and inst.r == 3
    assert meta["gap_certificate"] == {"yes_lower": 2.0 ** -10, "no_upper": 2.0 ** -12}
    assert meta["dsum_answer"] == "yes"
    assert solve_bvu_exact(inst).win_prob == 2.0 ** -10


def test_generate_case1_friendly(tmp_path):
    out = tmp_path / "c.json"
    assert run("generate", "case1-friendly", "--k", 2, "--big", 5, "--seed", 3, "-q", "-o", out) == 0
    sol_path = tmp_path / "s.json"
    assert run("solve", out, "--method", "approx", "-q", "-o", sol_path) == 0
    assert json.loads(sol_path.read_text())["win_prob"] >= 0.75


def test_generate_invalid_params(tmp_path):
    assert run("generate", "random", "--sizes", "2,2", "-q", "-o", tmp_path / "x.json") == 2
    assert run("generate", "dsum-gadget", "-q", "-o", tmp_path / "x.json") == 2
    assert run("generate", "case1-friendly", "--k", 3, "--big", 2, "-q", "-o", tmp_path / "x.json") == 2


def test_solve_exact_and_approx(instance_file, tmp_path):
    exact = tmp_path / "e.json"
    approx = tmp_path / "a.json"
    assert run("solve", instance_file, "--method", "exact", "-q", "-o", exact) == 0
    assert run("solve", instance_file, "--method", "approx", "--epsilon", 0.25, "-q", "-o", approx) == 0
    e = json.loads(exact.read_text())
    a = json.loads(approx.read_text())
    assert e["method"] == "exact" and "epsilon" not in e
    assert a["method"] == "approx" and a["epsilon"] == 0.25
    assert a["win_prob"] >= e["win_prob"] - 0.25
    assert isinstance(e["runtime_ms"], float)


def test_solve_errors(tmp_path, instance_file, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("solve", bad, "-q") == 2
    assert "malformed JSON" in capsys.readouterr().err
    invalid = tmp_path / "invalid.json"
    data = json.loads(instance_file.read_text())
    data["groups"][1] = data["groups"][0]
    invalid.write_text(json.dumps(data))
    assert run("solve", invalid, "-q") == 2
    assert "c1 not strict winner" in capsys.readouterr().err
    assert run("solve", tmp_path / "missing.json", "-q") == 2
    assert run("solve", instance_file, "--method", "exact", "--max-items", 3, "-q") == 3


def test_verify_round_trip_and_tampering(instance_file, tmp_path):
    sol_path = tmp_path / "s.json"
    assert run("solve", instance_file, "--method", "exact", "-q", "-o", sol_path) == 0
    report = tmp_path / "r.json"
    assert run("verify", instance_file, sol_path, "--samples", 5000, "-q", "-o", report) == 0
    assert json.loads(report.read_text())["pass"] is True

    data = json.loads(sol_path.read_text())
    data["win_prob"] = min(1.0, data["win_prob"] + 0.1) if data["win_prob"] < 0.95 else data["win_prob"] - 0.1
    sol_path.write_text(json.dumps(data))
    assert run("verify", instance_file, sol_path, "-q", "-o", report) == 4
    failed = {c["check"] for c in json.loads(report.read_text())["checks"] if not c["pass"]}
    assert failed == {"exact-win-prob"}


def test_verify_rejects_designated_voter(instance_file, tmp_path):
    sol_path = tmp_path / "s.json"
    designated = 5  # first voter of V_2 in a (5, 2) instance
    sol_path.write_text(formats.dumps(formats.solution_to_dict(BribeSolution((designated,), 0.0, 0.0), "exact")))
    report = tmp_path / "r.json"
    assert run("verify", instance_file, sol_path, "-q", "-o", report) == 4
    checks = {c["check"]: c["pass"] for c in json.loads(report.read_text())["checks"]}
    assert checks["feasible-voters"] is False
    sol_path.write_text(formats.dumps(formats.solution_to_dict(BribeSolution((99,), 0.0, 0.0), "exact")))
    assert run("verify", instance_file, sol_path, "-q") == 2


def test_reduce(instance_file, tmp_path):
    out = tmp_path / "ku.json"
    assert run("reduce", instance_file, "--target", "ku", "-q", "-o", out) == 0
    ku = json.loads(out.read_text())
    assert ku["schema_version"] == "bvu-ku-1" and ku["r"] == 3 and len(ku["items"]) == 5
    assert ku["provenance"]["source"] == str(instance_file)
    assert run("reduce", instance_file, "--target", "mku", "--alpha", -1, "--j0", 1, "-q", "-o", out) == 0
    mku = json.loads(out.read_text())
    assert mku["k"] == 0 and mku["quotas"] == [4]
    assert mku["provenance"]["guess"] == {"alpha": -1, "j0": 1}
    assert run("reduce", instance_file, "--target", "mku", "--alpha", 4, "--j0", 1, "-q") == 2
    assert run("reduce", instance_file, "--target", "mku", "-q") == 2
    three = tmp_path / "three.json"
    assert run("generate", "random", "--sizes", "4,2,1", "-q", "-o", three) == 0
    assert run("reduce", three, "--target", "ku", "-q") == 2


def test_bench(tmp_path):
    d = tmp_path / "suite"
    d.mkdir()
    for seed in range(3):
        assert run("generate", "random", "--sizes", "5,2", "--seed", seed, "-q", "-o", d / f"i{seed}.json") == 0
    out = tmp_path / "bench.csv"
    assert run("bench", d, "--methods", "exact,approx", "-q", "-o", out) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 6
    assert [r["instance"] for r in rows] == ["i0.json"] * 2 + ["i1.json"] * 2 + ["i2.json"] * 2
    for r in rows:
        assert r["error"] == ""
        if r["method"] == "approx":
            assert float(r["gap"]) <= 0.25
    (d / "broken.json").write_text("[]")
    assert run("bench", d, "-q", "-o", out) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert all(r["error"] for r in rows if r["instance"] == "broken.json")
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("bench", empty, "-q") == 2
    assert run("bench", d, "--methods", "magic", "-q") == 2


def test_byte_identical_reruns(instance_file, tmp_path):
    for i in range(2):
        assert run("generate", "random", "--sizes", "6,3,2", "--seed", 11, "-q", "-o", tmp_path / f"g{i}.json") == 0
        assert run("solve", instance_file, "--no-timing", "-q", "-o", tmp_path / f"s{i}.json") == 0
    assert (tmp_path / "g0.json").read_bytes() == (tmp_path / "g1.json").read_bytes()
    assert (tmp_path / "s0.json").read_bytes() == (tmp_path / "s1.json").read_bytes()


def test_format_round_trips(instance_file):
    text = instance_file.read_text()
    inst, meta = formats.instance_from_dict(formats.loads(text))
    assert formats.dumps(formats.instance_to_dict(inst, meta)) == text
    odd = ElectionInstance.from_groups([[(0.1, 1 / 3), (2.5e-7, 0.7)], [(1e10, 0.0)]], 0.30000000000000004)
    back, _ = formats.instance_from_dict(formats.loads(formats.dumps(formats.instance_to_dict(odd))))
    assert back == odd
    sol = BribeSolution((0, 3), 1 / 7, 0.1 + 0.2, "case1-greedy(j*=1)", True)
    back_sol, extra = formats.solution_from_dict(
        formats.loads(formats.dumps(formats.solution_to_dict(sol, "approx", 0.25, 1.5))))
    assert back_sol == sol and extra == {"method": "approx", "epsilon": 0.25, "runtime_ms": 1.5}


def test_format_errors():
    with pytest.raises(formats.FormatError):
        formats.instance_from_dict({"schema_version": "bvu-2"})
    with pytest.raises(formats.FormatError):
        formats.instance_from_dict({"schema_version": "bvu-1", "m": 3, "groups": [[], []], "budget": 1})
    with pytest.raises(formats.FormatError):
        formats.instance_from_dict({"schema_version": "bvu-1", "m": 2,
                                    "groups": [[{"price": "1", "prob": 0.5}], []], "budget": 1})
    with pytest.raises(formats.FormatError):
        formats.solution_from_dict({"schema_version": "bvu-sol-1", "chosen": [1.5], "method": "exact"})


@pytest.mark.skipif(shutil.which("bvu") is None, reason="console script not installed")
def test_console_script(instance_file):
    proc = subprocess.run(["bvu", "solve", str(instance_file), "--method", "exact", "-q"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["schema_version"] == "bvu-sol-1"
