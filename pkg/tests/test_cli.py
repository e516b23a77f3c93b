import json
import subprocess
import sys
from pathlib import Path

import pytest

from effdimlab.cli import main

PKG_ROOT = Path(__file__).resolve().parents[1]


def run_cli(args):
    return main([str(a) for a in args])


def write_config(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


SCHEDULE_CFG = {
    "profile": {"decay": "exp", "mu": 1.0, "theta": 1.0, "d": 6},
    "beta": 1.0,
    "eta": 0.1,
    "n_values": [100, 1000],
}

TAILS_CFG = {"t_grid": [0.5, 1.5], "p_values": [1, 2], "n_mc": 20000}

EFFDIM_CFG = {
    "dataset": {"kind": "flat", "flat_dim": 1, "ambient_dim": 3},
    "n_points": 20000,
    "r": 0.05,
    "tau": 0.01,
}

MLE_CFG = {
    "mode": "single",
    "dataset": {"kind": "flat", "flat_dim": 1, "ambient_dim": 3},
    "ns": [1500],
    "seeds": 2,
    "k": 12,
}

GAUSS_CFG = {
    "profile": {"decay": "exp", "mu": 1.0, "theta": 1.0, "d": 4},
    "sets": [{"R": 3.0, "r": 0.5}],
    "n_mc": 50000,
}

COVER_CFG = {
    "mode": "ellipsoid",
    "profile": {"decay": "explicit", "lambdas": [1.0, 0.01]},
    "R": 1.0,
    "r": 0.25,
    "p": 1,
}


@pytest.mark.parametrize(
    "command,cfg",
    [
        ("schedule", SCHEDULE_CFG),
        ("tails", TAILS_CFG),
        ("effdim", EFFDIM_CFG),
        ("mle", MLE_CFG),
        ("gaussian-check", GAUSS_CFG),
        ("cover", COVER_CFG),
    ],
)
def test_subcommand_runs_and_is_deterministic(tmp_path, command, cfg):
    config = write_config(tmp_path, "c.json", cfg)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert run_cli([command, "--config", config, "--out", out_a, "--seed", 7]) == 0
    assert run_cli([command, "--config", config, "--out", out_b, "--seed", 7]) == 0
    csv_a = (out_a / f"{command}.csv").read_bytes()
    csv_b = (out_b / f"{command}.csv").read_bytes()
    assert csv_a == csv_b
    assert (out_a / f"{command}_config.json").exists()


def test_config_echo_round_trips(tmp_path):
    config = write_config(tmp_path, "c.json", EFFDIM_CFG)
    out_a = tmp_path / "a"
    assert run_cli(["effdim", "--config", config, "--out", out_a, "--seed", 3]) == 0
    echo = out_a / "effdim_config.json"
    out_b = tmp_path / "b"
    assert run_cli(["effdim", "--config", echo, "--out", out_b]) == 0
    assert (out_a / "effdim.csv").read_bytes() == (out_b / "effdim.csv").read_bytes()


def test_unknown_keys_rejected(tmp_path):
    bad = dict(SCHEDULE_CFG)
    bad["mystery"] = 1
    config = write_config(tmp_path, "c.json", bad)
    assert run_cli(["schedule", "--config", config, "--out", tmp_path / "o"]) == 2


def test_malformed_json_rejected(tmp_path):
    config = tmp_path / "c.json"
    config.write_text("{not json")
    assert run_cli(["schedule", "--config", config, "--out", tmp_path / "o"]) == 2


def test_missing_config_file_rejected(tmp_path):
    assert run_cli(["schedule", "--config", tmp_path / "nope.json",
                    "--out", tmp_path / "o"]) == 2


def test_runtime_error_exit_code(tmp_path):
    cfg = dict(COVER_CFG)
    cfg["p"] = 2  # second axis thinner than a cell -> runtime refusal
    config = write_config(tmp_path, "c.json", cfg)
    assert run_cli(["cover", "--config", config, "--out", tmp_path / "o"]) == 1


def test_threads_flag_accepted(tmp_path):
    config = write_config(tmp_path, "c.json", SCHEDULE_CFG)
    out = tmp_path / "o"
    assert run_cli(["schedule", "--config", config, "--out", out,
                    "--threads", 1]) == 0
    assert (out / "schedule.csv").exists()


def test_gnuplot_emission(tmp_path):
    config = write_config(tmp_path, "c.json", SCHEDULE_CFG)
    out = tmp_path / "o"
    assert run_cli(["schedule", "--config", config, "--out", out,
                    "--emit-gnuplot"]) == 0
    script = (out / "schedule.gp").read_text()
    assert "schedule.csv" in script


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "effdimlab.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "approx" in proc.stdout


def test_schema_copies_in_docs_match_packaged():
    packaged = PKG_ROOT / "src" / "effdimlab" / "schemas"
    documented = PKG_ROOT / "docs" / "schemas"
    names = sorted(p.name for p in packaged.glob("*.json"))
    assert names == sorted(p.name for p in documented.glob("*.json"))
    for name in names:
        assert (packaged / name).read_text() == (documented / name).read_text()


def test_tails_bound_dominates_in_csv(tmp_path):
    config = write_config(tmp_path, "c.json", TAILS_CFG)
    out = tmp_path / "o"
    assert run_cli(["tails", "--config", config, "--out", out, "--seed", 1]) == 0
    lines = (out / "tails.csv").read_text().splitlines()
    header = lines[0].split(",")
    bi, mi = header.index("bound"), header.index("mc")
    for line in lines[1:]:
        cells = line.split(",")
        assert float(cells[mi]) <= float(cells[bi])
