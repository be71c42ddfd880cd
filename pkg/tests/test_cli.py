import json
import math
import subprocess
import sys

import pytest

from amenable_entropy.cli import RunConfig, main


def run(args, tmp_path):
    out = tmp_path / "r.json"
    code = main(list(args) + ["--out", str(out), "--quiet"])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_folner_growth_csv(tmp_path):
    csv = tmp_path / "g.csv"
    code, rep = run(["folner", "--group", "z", "--family", "box", "--nmax", "100", "--check", "growth",
                     "--csv", str(csv)], tmp_path)
    assert code == 0 and rep["schema"] == 1
    lines = csv.read_text().splitlines()
    assert lines[0] == "n,size,size_over_log_n" and len(lines) == 100


def test_folner_dihedral_regular(tmp_path):
    code, rep = run(["folner", "--group", "dihedral", "--family", "ball", "--check", "regular",
                     "--mmax", "8"], tmp_path)
    assert code == 0 and rep["results"]["regular"]["passed"]


def test_unknown_family_is_usage_error(tmp_path, capsys):
    code, _ = run(["folner", "--group", "z", "--family", "blob"], tmp_path)
    assert code == 2
    assert "blob" in capsys.readouterr().err


def test_bad_flag_is_usage_error(tmp_path):
    assert main(["entropy", "--depth", "x"]) == 2
    assert main(["nonsense"]) == 2


def test_entropy_full_shift(tmp_path):
    code, rep = run(["entropy", "--depth", "8"], tmp_path)
    assert code == 0
    r = rep["results"]
    for key in ("bowen", "packing", "capacity"):
        assert abs(r[key] - math.log(2)) < 1e-5


def test_entropy_xab_gap(tmp_path):
    code, rep = run(["entropy", "--subset", "xab", "--alpha", "0.25", "--beta", "0.75",
                     "--depth", "12", "--N", "1,2,3"], tmp_path)
    assert code == 0
    assert rep["results"]["packing"] - rep["results"]["bowen"] > 0.2


def test_entropy_over_budget(tmp_path, capsys):
    code, _ = run(["entropy", "--alphabet", "3", "--depth", "40", "--budget", "10000"], tmp_path)
    assert code == 3
    assert "resource" in capsys.readouterr().err


def test_tree_file_roundtrip(tmp_path, zbox, rng):
    from amenable_entropy.shift import random_tree
    t = random_tree(zbox, 2, 5, 0.6, rng)
    path = tmp_path / "tree.json"
    path.write_text(t.dumps())
    code, rep = run(["entropy", "--subset", "tree", "--tree-file", str(path), "--depth", "5"], tmp_path)
    assert code in (0, 1)
    assert rep["results"]["tree"]["levels"] == t.level_sizes.tolist()


def test_missing_tree_file(tmp_path):
    code, _ = run(["entropy", "--subset", "tree", "--tree-file", str(tmp_path / "nope.json")], tmp_path)
    assert code == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"depth": 6, "alphabet": 3, "seed": 5}))
    code, rep = run(["entropy", "--config", str(cfg), "--depth", "4"], tmp_path)
    assert code == 0
    assert rep["config"]["depth"] == 4 and rep["config"]["alphabet"] == 3 and rep["config"]["seed"] == 5
    cfg.write_text(json.dumps({"depht": 3}))
    assert run(["entropy", "--config", str(cfg)], tmp_path)[0] == 2


def test_config_roundtrip():
    c = RunConfig(depth=5, N_schedule=[1, 2], subset="xab")
    assert RunConfig.from_json(json.loads(json.dumps(c.to_json()))) == c


def test_reports_identical_up_to_timestamp(tmp_path):
    a = tmp_path / "a.json"
    args = ["examples", "--suite", "tt", "--trials", "10", "--len", "10000", "--seed", "7", "--quiet"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(a) + ".2"]) == 0
    ra, rb = json.loads(a.read_text()), json.loads((tmp_path / "a.json.2").read_text())
    for r in (ra, rb):
        r.pop("timestamp")
        r["config"].pop("out")
    assert ra == rb


def test_examples_xab(tmp_path):
    code, rep = run(["examples", "--suite", "xab", "--alpha", "0.25", "--beta", "0.75", "--depth", "12",
                     "--N", "1,2,3"], tmp_path)
    assert code == 0 and rep["passed"]


def test_examples_unknown_suite(tmp_path):
    assert run(["examples", "--suite", "nope"], tmp_path)[0] == 2


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "amenable_entropy.cli", "entropy", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "CSV columns" in out.stdout
