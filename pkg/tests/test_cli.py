import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from twoscalepop import cli, scenarios
from twoscalepop.errors import ConfigError, IOFailureError

CONFIG_TEXT = """\
# three stages, two patches
[model]
variant = "slow_survival"

[params]
s1_1 = 0.5
s1_2 = 0.5
s2_1 = 0.5
s2_2 = 0.5
s3_1 = 0.5
s3_2 = 0.5
phi_1 = 3.1
phi_2 = 3.1
c_1 = 1.0
c_2 = 1.0
d_1 = 10.0
d_2 = 10.0

[dispersal]
v1_1 = 0.3
v2_1 = 0.875
v3_1 = 0.125

[run]
k_list = [1, 3]
horizon = 300
tail = 5
seed = 42

[init]
x = [0.02, 0.02, 0.05, 0.05, 0.02, 0.02]
"""


def write_config(tmp_path, text=CONFIG_TEXT, name="myrun.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# --- config parsing ---------------------------------------------------------

def test_parse_config_text_sections_and_values():
    tables = cli.parse_config_text(CONFIG_TEXT, source="inline")
    assert tables["model"]["variant"] == "slow_survival"
    assert tables["params"]["phi_1"] == 3.1
    assert tables["run"]["k_list"] == [1, 3]
    assert tables["init"]["x"][2] == 0.05


def test_parse_config_strips_comments_outside_quotes():
    tables = cli.parse_config_text('[model]\nvariant = "a#b"  # trailing\n')
    assert tables["model"]["variant"] == "a#b"


def test_parse_config_rejects_duplicate_keys():
    with pytest.raises(ConfigError, match="duplicate"):
        cli.parse_config_text("[run]\ntail = 3\ntail = 4\n")


def test_parse_config_rejects_key_before_any_section():
    with pytest.raises(ConfigError):
        cli.parse_config_text("tail = 3\n")


def test_parse_config_rejects_garbage_line():
    with pytest.raises(ConfigError, match="config:2"):
        cli.parse_config_text("[run]\nwat\n")


def test_load_config_round_trip(tmp_path):
    config = cli.load_config(write_config(tmp_path))
    assert config.name == "myrun"
    assert config.variant == "slow_survival"
    assert config.k_list == (1, 3)
    assert config.horizon == 300
    assert config.tail == 5
    assert config.seed == 42
    assert np.allclose(config.initial_state, [0.02, 0.02, 0.05, 0.05, 0.02, 0.02])
    assert np.allclose(config.params.fraction_table()[:, 0], [0.3, 0.875, 0.125])


def test_load_config_defaults(tmp_path):
    text = CONFIG_TEXT.split("[run]")[0]  # drop run and init sections
    config = cli.load_config(write_config(tmp_path, text))
    assert config.k_list == scenarios.DEFAULT_K_LIST
    assert config.horizon == 10_000
    assert config.tail == scenarios.DEFAULT_TAIL
    assert config.seed == scenarios.DEFAULT_SEED


def test_load_config_missing_file(tmp_path):
    with pytest.raises(IOFailureError):
        cli.load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("breakage, message", [
    ('variant = "slow_survival"', "variant"),       # dropping it below
    ("s1_1 = 0.5", "s1_1"),
    ("v2_1 = 0.875", "v2_1"),
])
def test_load_config_requires_keys(tmp_path, breakage, message):
    text = CONFIG_TEXT.replace(breakage, "")
    with pytest.raises(ConfigError, match=message):
        cli.load_config(write_config(tmp_path, text))


def test_load_config_rejects_unknown_names(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        cli.load_config(write_config(tmp_path, CONFIG_TEXT + "\n[extra]\nz = 1\n"))
    with pytest.raises(ConfigError, match="unknown"):
        cli.load_config(write_config(tmp_path, CONFIG_TEXT + "\n[model2]\n"))
    bad_key = CONFIG_TEXT.replace("tail = 5", "tial = 5")
    with pytest.raises(ConfigError, match="unknown"):
        cli.load_config(write_config(tmp_path, bad_key))


def test_load_config_rejects_out_of_range_values(tmp_path):
    bad = CONFIG_TEXT.replace("s1_1 = 0.5", "s1_1 = 1.5")
    with pytest.raises(ConfigError):
        cli.load_config(write_config(tmp_path, bad))
    bad = CONFIG_TEXT.replace("k_list = [1, 3]", "k_list = [1, 0]")
    with pytest.raises(ConfigError):
        cli.load_config(write_config(tmp_path, bad))
    bad = CONFIG_TEXT.replace("x = [0.02, 0.02, 0.05, 0.05, 0.02, 0.02]",
                              "x = [0.02, 0.02]")
    with pytest.raises(ConfigError):
        cli.load_config(write_config(tmp_path, bad))


def test_fmt_uses_twelve_significant_digits():
    assert cli._fmt(1 / 3) == "0.333333333333"
    assert cli._fmt(0.05) == "0.05"
    assert cli._fmt(123456789012345.0) == "1.23456789012e+14"


# --- run command ------------------------------------------------------------

def test_run_custom_config_writes_expected_files(tmp_path, capsys):
    config_path = write_config(tmp_path)
    out = tmp_path / "results"
    code = cli.main(["run", str(config_path), "--out", str(out)])
    assert code == 0

    run_dir = out / "myrun"
    header, rows = read_csv(run_dir / "reduced.csv")
    assert header == list(cli.REDUCED_HEADER)
    assert len(rows) == 5
    assert [r[0] for r in rows] == [str(t) for t in range(296, 301)]

    header, rows = read_csv(run_dir / "complete.csv")
    assert header == list(cli.COMPLETE_HEADER)
    assert len(rows) == 5 * 2
    assert [r[1] for r in rows] == ["1"] * 5 + ["3"] * 5
    for row in rows:
        states = list(map(float, row[2:8]))
        totals = list(map(float, row[8:]))
        assert abs(sum(states[0:2]) - totals[0]) < 1e-9
        assert abs(sum(states[2:4]) - totals[1]) < 1e-9
        assert abs(sum(states[4:6]) - totals[2]) < 1e-9

    text = (run_dir / "summary.txt").read_text()
    assert "(none declared for user configs)" in text
    assert "result: PASS" in text
    stdout = capsys.readouterr().out
    assert f"wrote {run_dir / 'summary.txt'}" in stdout


def test_run_same_seed_reproduces_outputs(tmp_path):
    config_path = write_config(tmp_path)
    for sub in ("a", "b"):
        assert cli.main(["run", str(config_path), "--out", str(tmp_path / sub)]) == 0
    for name in ("reduced.csv", "complete.csv", "summary.txt"):
        first = (tmp_path / "a" / "myrun" / name).read_bytes()
        second = (tmp_path / "b" / "myrun" / name).read_bytes()
        assert first == second, name


def test_run_tail_override(tmp_path):
    config_path = write_config(tmp_path)
    out = tmp_path / "o"
    assert cli.main(["run", str(config_path), "--out", str(out), "--tail", "3"]) == 0
    _, rows = read_csv(out / "myrun" / "reduced.csv")
    assert len(rows) == 3
    assert rows[-1][0] == "300"


def test_run_seed_flag_accepted(tmp_path):
    config_path = write_config(tmp_path)
    assert cli.main(["run", str(config_path), "--out", str(tmp_path / "s"),
                     "--seed", "7"]) == 0


def test_run_builtin_fig10_fast(tmp_path, capsys):
    out = tmp_path / "o"
    code = cli.main(["run", "fig10", "--fast", "--out", str(out)])
    run_dir = out / "fig10"
    text = (run_dir / "summary.txt").read_text()
    # exit code mirrors the verdict block
    expected = 0 if "result: PASS" in text else 1
    assert code == expected
    assert "FAIL" in text or "PASS" in text

    header, rows = read_csv(run_dir / "complete.csv")
    assert header == list(cli.COMPLETE_HEADER)
    assert len(rows) == 6 * 3  # tail of 6 for k in 1, 5, 10
    _, reduced_rows = read_csv(run_dir / "reduced.csv")
    assert len(reduced_rows) == 6
    capsys.readouterr()


def test_run_sec42_compare_fast(tmp_path, capsys):
    out = tmp_path / "o"
    code = cli.main(["run", "sec42_compare", "--fast", "--out", str(out)])
    assert code == 0
    run_dir = out / "sec42_compare"
    for prefix in ("slow_survival_", "rescaled_"):
        assert (run_dir / f"{prefix}reduced.csv").exists()
        assert (run_dir / f"{prefix}complete.csv").exists()
    text = (run_dir / "summary.txt").read_text()
    assert "straddle" in text
    assert "result: PASS" in text
    capsys.readouterr()


# --- list and check ---------------------------------------------------------

def test_list_names_each_scenario_once(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    names = [line.split()[0] for line in out.strip().splitlines()]
    assert names == ["fig2", "fig3", "fig10", "sec42_compare", "custom"]


def test_check_battery_passes(capsys):
    assert cli.main(["check"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "FAIL" not in out


# --- failure exits ----------------------------------------------------------

def test_missing_config_file_exits_2(tmp_path, capsys):
    code = cli.main(["run", str(tmp_path / "nope.toml")])
    assert code == 2
    assert "config error:" in capsys.readouterr().err


def test_malformed_config_exits_2(tmp_path, capsys):
    path = write_config(tmp_path, "[model]\nvariant = \n")
    assert cli.main(["run", str(path)]) == 2
    assert "config error:" in capsys.readouterr().err


def test_unknown_scenario_exits_2(capsys):
    assert cli.main(["run", "fig99"]) == 2
    assert "config error:" in capsys.readouterr().err


def test_running_custom_without_a_path_exits_2(capsys):
    assert cli.main(["run", "custom"]) == 2
    err = capsys.readouterr().err
    assert "config" in err


def test_bad_variant_value_exits_2(tmp_path, capsys):
    path = write_config(tmp_path, CONFIG_TEXT.replace("slow_survival", "middling"))
    assert cli.main(["run", str(path)]) == 2
    capsys.readouterr()


def test_module_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "twoscalepop.cli", "list"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "sec42_compare" in proc.stdout
