import csv
import json
import shutil
from pathlib import Path

import pytest

from dqcomm import cli
from dqcomm.channels import amplitude_damping_capacity

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def minimal(tmp_path):
    return json.loads((CONFIGS / "minimal_1d.json").read_text())


def test_minimal_simulate_full_receiver(tmp_path, minimal, capsys):
    out = tmp_path / "out"
    code = cli.main(["simulate", "--config", _write(tmp_path, minimal), "--out", str(out)])
    assert code == 0
    rows = _rows(out / "minimal_1d_timescan.csv")
    assert list(rows[0]) == cli.TIMESCAN_COLUMNS
    assert len(rows) == 21
    assert all(abs(float(r["pickup"]) - 1.0) < 1e-12 for r in rows)
    assert "p_max=" in capsys.readouterr().out
    summary = json.loads((out / "minimal_1d_summary.json").read_text())
    assert summary["resolved_config"]["engine"]["method"] == "auto"
    assert summary["resolved_config"]["output"]["dir"] == str(out)


def test_missing_receiver_exits_2_without_files(tmp_path, minimal, capsys):
    del minimal["receiver"]
    out = tmp_path / "out"
    code = cli.main(["simulate", "--config", _write(tmp_path, minimal), "--out", str(out)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config" and "receiver" in err["message"]
    assert not out.exists()


@pytest.mark.parametrize("mutate", [
    lambda d: d["lattice"].update(bogus=1),
    lambda d: d["receiver"].update(origin=[60], size=[10]),
    lambda d: d["transmitter"].update(site=[99]),
    lambda d: d["experiment"].update(t_grid=[3, 1]),
])
def test_invalid_configs_exit_2(tmp_path, minimal, mutate, capsys):
    mutate(minimal)
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", _write(tmp_path, minimal), "--out", str(out)]) == 2
    assert not out.exists()
    json.loads(capsys.readouterr().err.strip())


def test_missing_config_file_exits_2(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_unknown_subcommand_exits_2():
    assert cli.main(["frobnicate"]) == 2


def test_compute_failure_exits_3(tmp_path, capsys):
    doc = {
        "lattice": {"extents": [400], "absorber": {"width": 10, "strength": 1.0}},
        "transmitter": {"kind": "delta", "site": [200]},
        "receiver": {"origin": [0], "size": [400]},
        "engine": {"method": "krylov", "krylov_dim": 4, "substep_tolerance": 1e-300},
        "experiment": {"t_grid": [0.0, 5.0], "refine": False},
    }
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", _write(tmp_path, doc), "--out", str(out)]) == 3
    assert json.loads(capsys.readouterr().err.strip())["error"] == "compute"
    assert not out.exists()


def test_echoed_config_reproduces_outputs(tmp_path, minimal):
    out = tmp_path / "a"
    assert cli.main(["simulate", "--config", _write(tmp_path, minimal), "--out", str(out)]) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    keep = tmp_path / "echo.json"
    shutil.copy(out / "minimal_1d_summary.json", keep)
    for p in out.iterdir():
        p.unlink()
    assert cli.main(["simulate", "--config", str(keep)]) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_format_flag_limits_outputs(tmp_path, minimal):
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", _write(tmp_path, minimal), "--out", str(out), "--format", "csv"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["minimal_1d_timescan.csv"]


def test_timescan_capacity_column(tmp_path, minimal):
    minimal["receiver"] = {"origin": [20], "size": [21]}
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", _write(tmp_path, minimal), "--out", str(out)]) == 0
    for r in _rows(out / "minimal_1d_timescan.csv"):
        assert float(r["capacity"]) == amplitude_damping_capacity(min(1.0, float(r["pickup"])))


def test_write_outputs_leaves_no_temporaries(tmp_path):
    cli.write_outputs(tmp_path, {"a.csv": "x\n", "b.json": "{}\n"})
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "b.json"]


def test_write_outputs_is_all_or_nothing(tmp_path, monkeypatch):
    calls = []
    real = cli.tempfile.mkstemp

    def flaky(*a, **k):
        calls.append(1)
        if len(calls) == 2:
            raise OSError("disk full")
        return real(*a, **k)

    monkeypatch.setattr(cli.tempfile, "mkstemp", flaky)
    with pytest.raises(OSError):
        cli.write_outputs(tmp_path, {"a.csv": "x\n", "b.json": "{}\n"})
    assert list(tmp_path.iterdir()) == []


# --- capacity ------------------------------------------------------------------

@pytest.mark.parametrize("p, text", [("1.0", "1.0"), ("0.5", "0.0"), ("0.1", "0.0")])
def test_capacity_prints_value(p, text, capsys):
    assert cli.main(["capacity", "--p", p]) == 0
    assert capsys.readouterr().out.strip() == text


@pytest.mark.parametrize("p", ["1.5", "-0.1"])
def test_capacity_domain_error(p, capsys):
    assert cli.main(["capacity", "--p", p]) == 2
    assert json.loads(capsys.readouterr().err.strip())["error"] == "domain"


def test_capacity_needs_arguments():
    assert cli.main(["capacity"]) == 2
    assert cli.main(["capacity", "--multiparticle"]) == 2


def test_multiparticle_grid_has_no_violations(tmp_path, capsys):
    out = tmp_path / "thr"
    assert cli.main(["capacity", "--multiparticle", "--grid", "20", "--out", str(out)]) == 0
    assert "violations=0" in capsys.readouterr().out
    rows = _rows(out / "threshold.csv")
    assert list(rows[0]) == cli.THRESHOLD_COLUMNS
    assert len(rows) == 2 * 231
    for r in rows:
        expected = "POSITIVE" if float(r["p"]) > float(r["q"]) else "NONPOSITIVE"
        assert r["verdict"] == expected
    assert json.loads((out / "threshold_summary.json").read_text())["violations"] == 0


# --- scaling -------------------------------------------------------------------

def test_scaling_self_test(capsys):
    assert cli.main(["scaling", "--self-test"]) == 0
    out = capsys.readouterr().out
    slope = float(out.split("slope=")[1].split()[0])
    assert abs(slope - 1 / 3) < 1e-13


def test_scaling_unreachable_rows(tmp_path, capsys):
    doc = {"scaling": {"deltas": [64, 128, 512], "targets": [0.5], "extent": 300, "w_max": 61}}
    out = tmp_path / "sc"
    assert cli.main(["scaling", "--config", _write(tmp_path, doc), "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err and "UNREACHABLE" in captured.err
    rows = _rows(out / "scaling_scaling.csv")
    assert list(rows[0]) == cli.SCALING_COLUMNS
    assert [r["w"] for r in rows] == ["15", "19", "UNREACHABLE"]
    summary = json.loads((out / "scaling_summary.json").read_text())
    assert summary["rows"][2]["w"] is None
    assert "0.5" in summary["fitted_slopes"]


def test_scaling_rejects_bad_target(tmp_path):
    doc = {"scaling": {"deltas": [64], "targets": [1.5]}}
    assert cli.main(["scaling", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "x")]) == 2


def test_verify_passes(capsys):
    assert cli.main(["verify"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
