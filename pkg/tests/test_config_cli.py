import hashlib
import json
import os

import pytest

from shortck.cli import main
from shortck.config import COMMANDS, ConfigError, parse_config

BASIN = """
# small basin render
[run]
command = basin
seed = 42

[sequence]
kind = power_tower
a = 0.5
k = 3
d = 2

[grid]
width = 40
height = 30
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_bytes(d):
    return {n: open(os.path.join(d, n), "rb").read() for n in sorted(os.listdir(d)) if n != "timing.json"}


# parsing


def test_minimal_config_fills_defaults():
    cfg = parse_config("[run]\ncommand = basin\n")
    assert cfg.command == "basin" and cfg.seed == 0
    assert cfg.sequence["kind"] == "power_tower" and cfg.sequence["a"] == 0.5
    assert cfg.grid["width"] == 200
    assert set(COMMANDS) >= {"basin", "levi", "stagewise", "disjoint"}


@pytest.mark.parametrize("text,line,fragment", [
    ("[run]\ncommand = basin\n[sequence]\na = 1.5\n", None, "a must lie in (0,1)"),
    ("[run]\ncommand = basin\nbogus = 1\n", 3, "unknown key"),
    ("[run]\ncommand = basin\n[sequence]\nk = three\n", 4, "type mismatch"),
    ("[sequence]\na = 0.5\n", None, "missing section [run]"),
    ("[run]\ncommand = basin\n[nowhere]\n", 3, "section"),
    ("[run]\ncommand = nope\n", 2, "command"),
    ("command = basin\n", 1, "outside"),
])
def test_config_errors(text, line, fragment):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    msg = str(ei.value)
    assert fragment in msg
    if line is not None:
        assert msg.startswith(f"line {line}:")


def test_duplicate_key_reports_both_lines():
    with pytest.raises(ConfigError, match=r"lines 2 and 4"):
        parse_config("[run]\ncommand = basin\nseed = 1\ncommand = green\n")


def test_command_specific_sequence_defaults():
    g = parse_config("[run]\ncommand = green\n")
    assert (g.sequence["kind"], g.sequence["nu"]) == ("shift_like", 2)
    assert parse_config("[run]\ncommand = eta-check\n").sequence["kind"] == "shifted_tower"
    assert parse_config("[run]\ncommand = green\n[sequence]\nnu = 1\n").sequence["nu"] == 1


def test_seed_range():
    assert parse_config("[run]\ncommand = basin\nseed = 18446744073709551615\n").seed == 2**64 - 1
    for bad in ("18446744073709551616", "-1"):
        with pytest.raises(ConfigError):
            parse_config(f"[run]\ncommand = basin\nseed = {bad}\n")


def test_round_trip_through_text():
    cfg = parse_config(BASIN)
    again = parse_config(cfg.to_text())
    assert again.resolved() == cfg.resolved()
    assert again.out_dir == cfg.out_dir


# running


def test_basin_run_is_byte_deterministic(tmp_path):
    cfg = write(tmp_path, BASIN)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["--config", cfg, "--out-dir", a]) == 0
    assert main(["--config", cfg, "--out-dir", b]) == 0
    assert read_bytes(a) == read_bytes(b)
    assert {"basin.pgm", "psi.csv", "manifest.json", "config.ini"} <= set(os.listdir(a))
    assert open(os.path.join(a, "basin.pgm")).read().startswith("P2\n40 30\n255\n")


def test_manifest_digests_recompute(tmp_path):
    out = str(tmp_path / "o")
    assert main(["--config", write(tmp_path, BASIN), "--out-dir", out]) == 0
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert man["tool"] == "shortck" and man["exit_code"] == 0
    for name, digest in man["outputs"].items():
        assert hashlib.sha256(open(os.path.join(out, name), "rb").read()).hexdigest() == digest
    assert man["config"]["run"]["seed"] == 42
    assert "wall_clock_seconds" in json.load(open(os.path.join(out, "timing.json")))


def test_rerun_from_echoed_config(tmp_path):
    first = str(tmp_path / "first")
    assert main(["--config", write(tmp_path, BASIN), "--out-dir", first]) == 0
    second = str(tmp_path / "second")
    assert main(["--config", os.path.join(first, "config.ini"), "--out-dir", second]) == 0
    assert read_bytes(first) == read_bytes(second)


def test_seed_override_changes_manifest_only_in_seed(tmp_path):
    cfg = write(tmp_path, "[run]\ncommand = potential\n[params]\nsamples = 50\nsubaverage_points = 5\n")
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["--config", cfg, "--out-dir", a, "--seed", "1"]) == 0
    assert main(["--config", cfg, "--out-dir", b, "--seed", "2"]) == 0
    ma, mb = (json.load(open(os.path.join(d, "manifest.json"))) for d in (a, b))
    assert (ma["config"]["run"]["seed"], mb["config"]["run"]["seed"]) == (1, 2)
    assert ma["outputs"]["psi.csv"] != mb["outputs"]["psi.csv"]


def test_threads_do_not_change_outputs(tmp_path):
    cfg = write(tmp_path, BASIN)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["--config", cfg, "--out-dir", a, "--threads", "1"]) == 0
    assert main(["--config", cfg, "--out-dir", b, "--threads", "4"]) == 0
    ra, rb = read_bytes(a), read_bytes(b)
    assert ra["basin.pgm"] == rb["basin.pgm"] and ra["psi.csv"] == rb["psi.csv"]


def test_region_test_records_xi(tmp_path):
    out = str(tmp_path / "r")
    assert main(["--command", "region-test", "--out-dir", out]) == 0
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert 0 < man["results"]["xi"] < 1


def test_violations_exit_one_with_csv(tmp_path):
    out = str(tmp_path / "v")
    text = "[run]\ncommand = region-test\n[params]\nq = 4\nM = 4\n"
    assert main(["--config", write(tmp_path, text), "--out-dir", out]) == 1
    rows = open(os.path.join(out, "violations.csv")).read().splitlines()
    assert len(rows) >= 2


def test_stale_violation_file_removed(tmp_path):
    out = str(tmp_path / "v")
    bad = write(tmp_path, "[run]\ncommand = region-test\n[params]\nq = 4\nM = 4\n", "bad.ini")
    assert main(["--config", bad, "--out-dir", out]) == 1
    assert main(["--command", "region-test", "--out-dir", out]) == 0
    assert not os.path.exists(os.path.join(out, "violations.csv"))


def test_errors_exit_two(tmp_path, capsys):
    assert main(["--config", write(tmp_path, "[run]\ncommand = basin\n[sequence]\na = 1.5\n")]) == 2
    assert "a must lie in (0,1)" in capsys.readouterr().err
    assert main([]) == 2
    assert main(["--config", str(tmp_path / "missing.ini")]) == 2
    # the power tower has M |eta_0| = 1 at M = 2, outside the lemma's range
    eta_pt = write(tmp_path, "[run]\ncommand = eta-check\n[sequence]\nkind = power_tower\n", "eta.ini")
    assert main(["--config", eta_pt, "--out-dir", str(tmp_path / "e")]) == 2


def test_console_entry_point_is_installed():
    import shutil
    assert shutil.which("shortck") is not None
