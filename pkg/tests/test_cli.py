import csv
import json
import subprocess
import sys

import pytest

from ecosim import cli
from ecosim.config import config_dict, format_config, parse_config
from ecosim.simulation import InvalidConfig, SimConfig


@pytest.fixture(scope="module")
def filter_path():
    from importlib import resources
    return str(resources.files("ecosim").joinpath("data/travel_filter.csv"))


def tiny_config(tmp_path, extra=""):
    text = format_config(SimConfig()).replace("total_requests = 1000", "total_requests = 25")
    text = text.replace("num_users = 100", "num_users = 10")
    path = tmp_path / "run.cfg"
    path.write_text(text + extra, encoding="utf-8")
    return path


def test_config_round_trip(tmp_path):
    out = tmp_path / "default.cfg"
    assert cli.main(["init-config", "--out", str(out)]) == 0
    text = out.read_text(encoding="utf-8")
    assert text.count("#") > 10
    cfg = parse_config(text)
    assert config_dict(cfg) == config_dict(SimConfig())
    assert cfg.num_users == 100
    assert cfg.evolution.crossover_fraction == cfg.evolution.mutation_fraction == 0.10


@pytest.mark.parametrize("text", ["bogus = 1", "evolution.bogus = 1", "num_users = ten",
                                  "num_users", "num_users = 0", "feedback.eta_up = 2"])
def test_bad_config_rejected(text):
    with pytest.raises(InvalidConfig):
        parse_config(text)


def test_dotted_keys_and_comments():
    cfg = parse_config("evolution.parsimony_alpha = 0.25  # softer\n# all else default\n")
    assert cfg.evolution.parsimony_alpha == 0.25


def test_translate_golden_line(tmp_path, filter_path, capsys):
    src = tmp_path / "in.txt"
    src.write_text("{(1,25),(2,35),(3,55),(4,6),(5,37),(6,12)}\n{(9,9)}\n", encoding="utf-8")
    assert cli.main(["translate", "--filter", filter_path, "--in", str(src)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == [
        "{(Business, Airline), (Company, British Midland), (Quality, Economy), "
        "(Cost, 60), (Depart, Edinburgh), (Arrive, London)}",
        "{(attr9, 9)}",
    ]


def test_translate_empty_input(tmp_path, filter_path, capsys):
    src = tmp_path / "empty.txt"
    src.write_text("", encoding="utf-8")
    assert cli.main(["translate", "--filter", filter_path, "--in", str(src)]) == 0
    assert capsys.readouterr().out == ""


def test_translate_malformed_line(tmp_path, filter_path, capsys):
    src = tmp_path / "bad.txt"
    src.write_text("{(1,25)}\n{(1,25)\n", encoding="utf-8")
    assert cli.main(["translate", "--filter", filter_path, "--in", str(src)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_run_missing_config(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2
    assert "not found" in capsys.readouterr().err


def test_run_bad_config(tmp_path):
    cfg = tiny_config(tmp_path, "mystery = 3\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_run_unwritable_output(tmp_path):
    cfg = tiny_config(tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--config", str(cfg), "--out", str(blocker / "sub")]) == 3


def test_init_config_unwritable(tmp_path):
    assert cli.main(["init-config", "--out", str(tmp_path / "missing" / "x.cfg")]) == 3


def test_run_outputs(tmp_path, monkeypatch):
    cfg = tiny_config(tmp_path)
    out = tmp_path / "o"
    monkeypatch.delenv("ECOSIM_SEED", raising=False)
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--seed", "9"]) == 0
    rows = list(csv.reader(open(out / "succession.csv", encoding="utf-8")))
    assert rows[0] == ["request_index", "user_id", "habitat_id", "best_fitness",
                       "effectiveness", "generations", "pool_size"]
    assert len(rows) == 25 + 1
    assert all(len(r[3].split(".")[1]) == 6 for r in rows[1:])
    head = open(out / "species_area.csv", encoding="utf-8").readline().strip()
    assert head == "n,log10_n,mean_species,log10_mean_species"
    head = open(out / "species_abundance.csv", encoding="utf-8").readline().strip()
    assert head == "bin_lo,bin_hi,species_count"
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["rng_seed"] == 9
    assert {f["name"] for f in manifest["files"]} == {
        "succession.csv", "succession_smoothed.csv", "species_abundance.csv",
        "species_area.csv", "network_before.json", "network_after.json"}
    for f in manifest["files"]:
        assert b"\r" not in (out / f["name"]).read_bytes()


def test_seed_env_fallback(tmp_path, monkeypatch):
    cfg = tiny_config(tmp_path)
    monkeypatch.setenv("ECOSIM_SEED", "77")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["rng_seed"] == 77
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "78"]) == 0
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["rng_seed"] == 78
    monkeypatch.setenv("ECOSIM_SEED", "not-a-number")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.cfg"
    r = subprocess.run([sys.executable, "-m", "ecosim.cli", "init-config", "--out", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and out.exists()
