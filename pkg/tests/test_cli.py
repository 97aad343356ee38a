import csv
import io
import json
import logging
import shutil
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from fragkernel.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_cfg(tmp_path, data, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


BASE = {
    "kernel": {"family": "random", "n": 2},
    "grid": {"vmax": 3},
    "initial": {"state": 3, "concentration": 1.0, "particles": 1},
    "solver": {"t_end": 0.5},
    "simulation": {"t_end": 1.0, "seed": 3, "replicas": 20},
}


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["--v", "5", "--n", "3"], "6"),
        (["--vA", "2", "--vB", "3", "--n", "2"], "40"),
        (["--v", "2", "--n", "3"], "0"),
    ],
)
def test_count(capsys, argv, expected):
    code, out, _ = run(capsys, "count", *argv)
    assert code == 0
    assert out.strip() == expected


def test_count_needs_parent(capsys):
    code, _, err = run(capsys, "count", "--n", "2")
    assert code == 2 and "need --v" in err


def test_enumerate_1c(capsys):
    code, out, _ = run(capsys, "enumerate", "--v", "5", "--n", "3")
    assert code == 0
    assert out.splitlines() == ["config", "1|1|3", "1|2|2", "1|3|1", "2|1|2", "2|2|1", "3|1|1"]


def test_enumerate_2c(capsys):
    code, out, _ = run(capsys, "enumerate", "--vA", "1", "--vB", "1", "--n", "2")
    assert code == 0
    assert out.splitlines() == ["config,multiplicity", "0.1|1.0,1", "1.0|0.1,1"]


def test_enumerate_budget(capsys):
    code, out, err = run(capsys, "enumerate", "--v", "30", "--n", "4", "--cap", "100")
    assert code == 4
    assert out == ""
    assert "exceeds the cap" in err


def test_rate(capsys):
    assert run(capsys, "rate", "--v", "10", "--n", "3")[1].strip() == "36"
    assert run(capsys, "rate", "--vA", "2", "--vB", "3", "--n", "2")[1].strip() == "40"
    code, out, _ = run(capsys, "rate", "--v", "4", "--n", "2", "--kernel", "partially_random", "--kappa-exponent", "-1")
    assert code == 0 and float(out) == pytest.approx(0.75)


def test_rate_mode_mismatch(capsys):
    code, _, err = run(capsys, "rate", "--v", "4", "--n", "2", "--kernel", "bicomponent_random")
    assert code == 2 and "does not match" in err


def test_fragments_ternary(capsys):
    code, out, _ = run(capsys, "fragments", "--v", "6", "--n", "3")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["i", "bbar"]
    got = [(int(i), float(b)) for i, b in rows[1:]]
    assert got == [(1, 1.2), (2, 0.9), (3, 0.6), (4, 0.3)]


def test_fragments_enumerate_matches(capsys):
    closed = run(capsys, "fragments", "--v", "9", "--n", "3", "--kernel", "weighted_functional", "--gamma", "1")[1]
    brute = run(capsys, "fragments", "--v", "9", "--n", "3", "--kernel", "weighted_functional", "--gamma", "1",
                "--enumerate")[1]
    a = [float(r[1]) for r in list(csv.reader(io.StringIO(closed)))[1:]]
    b = [float(r[1]) for r in list(csv.reader(io.StringIO(brute)))[1:]]
    assert a == pytest.approx(b, rel=1e-12)


def test_fragments_binary_uniform(capsys):
    out = run(capsys, "fragments", "--v", "5", "--n", "2")[1]
    assert out.splitlines()[1:] == ["1,0.5", "2,0.5", "3,0.5", "4,0.5"]


def test_fragments_bicomponent(capsys):
    out = run(capsys, "fragments", "--vA", "2", "--vB", "3", "--n", "2")[1]
    rows = {(int(a), int(b)): float(x) for a, b, x in list(csv.reader(io.StringIO(out)))[1:]}
    assert rows[(1, 1)] == pytest.approx(0.30, rel=1e-12)


def test_fragments_empty_table_warns(capsys, caplog):
    with caplog.at_level(logging.WARNING, logger="fragkernel"):
        code, out, _ = run(capsys, "fragments", "--v", "2", "--n", "3")
    assert code == 0
    assert out.splitlines() == ["i,bbar"]
    assert "table is empty" in caplog.text


def test_fragments_from_config(capsys):
    code, out, _ = run(capsys, "fragments", "--v", "12", "--config", str(CONFIGS / "weighted_table_v12.yaml"))
    assert code == 0
    assert sum(float(r.split(",")[1]) * int(r.split(",")[0]) for r in out.splitlines()[1:]) == pytest.approx(12)


def test_overflow_exit(capsys):
    code, out, err = run(capsys, "count", "--v", "1000", "--n", "500")
    assert code == 3 and out == ""
    assert "128-bit" in err


def test_solve_analytic(capsys, tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    moments = tmp_path / "m.csv"
    code, out, _ = run(capsys, "solve", str(cfg), "--moments", str(moments))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    last = [r for r in rows if float(r["t"]) == 0.5]
    c3 = [float(r["c"]) for r in last if r["v"] == "3"][0]
    assert abs(c3 - 0.36787944117144233) < 1e-6
    m = list(csv.DictReader(moments.open()))
    assert all(float(r["M1"]) == pytest.approx(3.0, rel=1e-12) for r in m)


def test_solve_t_end_zero_echoes_initial(capsys, tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    code, out, _ = run(capsys, "solve", str(cfg), "--t-end", "0")
    assert code == 0
    assert out.splitlines() == ["t,v,c", "0.0,3,1.0"]


def test_solve_mass_above_vmax(capsys, tmp_path):
    data = dict(BASE, initial={"state": 5})
    code, _, err = run(capsys, "solve", str(write_cfg(tmp_path, data)))
    assert code == 2 and "exceeds grid.vmax" in err


def test_unknown_key_rejected(capsys, tmp_path):
    data = dict(BASE, kernel={"family": "random", "n": 2, "lambda": 1})
    code, _, err = run(capsys, "solve", str(write_cfg(tmp_path, data)))
    assert code == 2 and "lambda" in err


def test_missing_table_rejected(capsys, tmp_path):
    data = dict(BASE, kernel={"family": "weighted_functional", "n": 2, "weights": {"table": "nope.csv"}})
    code, _, err = run(capsys, "solve", str(write_cfg(tmp_path, data)))
    assert code == 2 and "not found" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, _ = run(capsys, "solve", str(tmp_path / "absent.yaml"))
    assert code == 2


def test_set_override(capsys, tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    code, out, _ = run(capsys, "solve", str(cfg), "--set", "solver.t_end=0", "--set", "initial.concentration=2.5")
    assert code == 0
    assert out.splitlines()[1] == "0.0,3,2.5"
    code, _, _ = run(capsys, "solve", str(cfg), "--set", "solver.bogus=1")
    assert code == 2
    code, _, _ = run(capsys, "solve", str(cfg), "--set", "novalue")
    assert code == 2


def test_bad_subcommand_and_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["count", "--v", "x", "--n", "2"])
    assert exc.value.code == 2


def test_simulate_summary_and_events(capsys, tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    events = tmp_path / "ev.csv"
    code, out, _ = run(capsys, "simulate", str(cfg), "--events", str(events))
    assert code == 0
    data = json.loads(out)
    assert data["metadata"]["seed"] == 3 and data["metadata"]["replicas"] == 20
    lines = events.read_text().splitlines()
    assert lines[0] == "replica,t,parent,fragments"
    assert len(lines) - 1 == data["metadata"]["total_events"]


def test_simulate_seed_flag_and_threads(capsys, tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    a = run(capsys, "simulate", str(cfg), "--seed", "11", "--replicas", "50")[1]
    b = run(capsys, "simulate", str(cfg), "--seed", "11", "--replicas", "50", "--threads", "3")[1]
    c = run(capsys, "simulate", str(cfg), "--seed", "12", "--replicas", "50")[1]
    assert a == b != c


def test_simulate_without_seed_records_entropy(capsys, tmp_path):
    data = dict(BASE, simulation={"t_end": 0.5, "replicas": 2})
    code, out, _ = run(capsys, "simulate", str(write_cfg(tmp_path, data)))
    assert code == 0
    assert isinstance(json.loads(out)["metadata"]["seed"], int)


def test_simulate_invalid_config(capsys, tmp_path):
    data = dict(BASE, simulation={"t_end": 0.5, "seed": 1, "replicas": "many"})
    assert run(capsys, "simulate", str(write_cfg(tmp_path, data)))[0] == 2
    (tmp_path / "init.csv").write_text("v,c\n3,1.5\n")
    data = dict(BASE, initial={"table": "init.csv"})
    code, _, err = run(capsys, "simulate", str(write_cfg(tmp_path, data)))
    assert code == 2 and "integer particle counts" in err


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_run(capsys, tmp_path, name):
    shutil.copy(CONFIGS / name, tmp_path / name)
    if (CONFIGS / "weights_table.csv").exists():
        shutil.copy(CONFIGS / "weights_table.csv", tmp_path / "weights_table.csv")
    cfg = yaml.safe_load((CONFIGS / name).read_text())
    if "solver" in cfg:
        assert main(["solve", str(tmp_path / name)]) == 0
        assert (tmp_path / cfg["output"]["snapshots"]).is_file()
    if "simulation" in cfg:
        assert main(["simulate", str(tmp_path / name), "--replicas", "50"]) == 0
        assert (tmp_path / cfg["output"]["summary"]).is_file()


def test_golden_solve(capsys):
    code, out, _ = run(capsys, "solve", str(CONFIGS / "binary_random_v3.yaml"),
                       "--set", "output={}", "--set", "solver.dt=0.05")
    assert code == 0
    assert out == (GOLDEN / "solve_binary_random_v3.csv").read_text()


def test_golden_simulate(capsys, tmp_path):
    events = tmp_path / "events.csv"
    code, out, _ = run(capsys, "simulate", str(CONFIGS / "ternary_random_v6.yaml"), "--set", "output={}",
                       "--replicas", "5", "--events", str(events))
    assert code == 0
    assert out == (GOLDEN / "simulate_ternary_random_v6.json").read_text()
    assert events.read_text() == (GOLDEN / "events_ternary_random_v6.csv").read_text()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fragkernel", "count", "--v", "5", "--n", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "6"
