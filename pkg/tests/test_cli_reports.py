import json

import pytest

from snowcircle.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, main
from snowcircle.reports import dumps, lemma_table, metadata
from snowcircle.rules import DiameterRule, keep_at_root, uniform_halve


@pytest.fixture
def rule_file(tmp_path):
    path = tmp_path / "root.json"
    keep_at_root(10).save(path)
    return str(path)


def test_generate(tmp_path):
    out = tmp_path / "r.json"
    assert main(["generate", "seeded-random", "--depth", "6", "--seed", "4", "--out", str(out)]) == EXIT_PASS
    rule = DiameterRule.load(out)
    assert rule.depth == 6 and rule.seed_info["seed"] == 4
    assert main(["generate", "seeded-random", "--depth", "6", "--cap", "0", "--out", str(out)]) == EXIT_CONFIG


def test_dist(rule_file, capsys):
    assert main(["dist", "--rule", rule_file, "0,1/2", "1/4,3/4"]) == EXIT_PASS
    text = capsys.readouterr().out
    assert text.splitlines()[1:] == ["0,1/2,1", "1/4,3/4,1"]
    assert main(["dist", "--rule", rule_file, "--metric", "trunc:0", "0,1/2"]) == EXIT_PASS
    assert capsys.readouterr().out.splitlines()[-1] == "0,1/2,1/2"


def test_dist_matrix(rule_file, capsys):
    assert main(["dist", "--rule", rule_file, "--all", "2"]) == EXIT_PASS
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 5 and rows[0] == "point,0,1/4,1/2,3/4"


def test_fold(rule_file, capsys):
    assert main(["fold", "--rule", rule_file, "--m", "0", "--n", "3", "3/8"]) == EXIT_PASS
    assert capsys.readouterr().out.splitlines()[-1].startswith("3/8,3/4,3/4")


def test_verify_pass(tmp_path):
    r = tmp_path / "u.json"
    uniform_halve(9).save(r)
    out = tmp_path / "rep" / "v.json"
    csv_out = tmp_path / "t.csv"
    code = main(["verify", "--rule", str(r), "--depth", "9", "--mstar", "3..5", "--out", str(out),
                 "--csv", str(csv_out)])
    assert code == EXIT_PASS
    doc = json.loads(out.read_text())
    assert doc["pass"] is True and doc["global_max_ratio"] == "1"
    assert doc["tool"] == "snowcircle" and doc["rule_hashes"] == [uniform_halve(9).hash]
    assert "jobs" not in doc["config"]
    assert csv_out.read_text().startswith("rule_hash,")


def test_verify_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    out = tmp_path / "v.json"
    assert main(["verify", "--rule", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert main(["verify", "--corpus", "1", "--depth", "9", "--mstar", "2..5"]) == EXIT_CONFIG
    assert main(["verify"]) == EXIT_CONFIG
    assert main(["nonsense"]) == EXIT_CONFIG


def test_lemmas(tmp_path, capsys):
    r = tmp_path / "u.json"
    uniform_halve(7).save(r)
    out = tmp_path / "l.json"
    assert main(["lemmas", "--rule", str(r), "--depth", "7", "--out", str(out)]) == EXIT_PASS
    doc = json.loads(out.read_text())
    assert doc["pass"] and len(doc["rows"]) == 18


def test_reports_deterministic():
    meta = metadata([uniform_halve(3)], 3, note="x")
    assert meta["seeds"] == [None] and meta["note"] == "x"
    assert dumps({"b": 1, "a": 2}) == dumps({"a": 2, "b": 1})
    assert "lemma" in lemma_table([])


def test_version(capsys):
    assert main(["--version"]) == EXIT_PASS
    assert capsys.readouterr().out.startswith("snowcircle ")


def test_module_entry():
    import subprocess
    import sys
    done = subprocess.run([sys.executable, "-m", "snowcircle", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and "snowcircle" in done.stdout
