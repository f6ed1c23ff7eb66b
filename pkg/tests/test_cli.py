import json
import subprocess
import sys

import pytest

from ergodrift.cli import EXPERIMENT_IDS, main

PAIR_TEXT = "d=2\n2 1 1 1\n1 1 0 1"
ROT_TEXT = "d=2\n0 -1 1 0"


def _write_config(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def _lyapunov_config(tmp_path, outdir, seed=11, **extra):
    payload = {
        "experiment": "lyapunov",
        "system": PAIR_TEXT,
        "seed": seed,
        "output": str(outdir),
        "steps": 200,
        "replicates": 3,
        "samples": 600,
        "burn_in": 60,
    }
    payload.update(extra)
    return _write_config(tmp_path / "config.json", payload)


def test_every_subcommand_is_registered():
    assert len(EXPERIMENT_IDS) == 13
    assert len(set(EXPERIMENT_IDS.values())) == 13


def test_lyapunov_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    cfg = _lyapunov_config(tmp_path, out)
    assert main(["lyapunov", "--config", str(cfg)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["schema"] == "ergodrift-report/1"
    assert report["experiment"] == "lyapunov"
    assert report["error"] is None
    assert report["summary"]["agree_3sigma"] is True
    assert report["backend"] in ("cython", "python")
    echo = json.loads((out / "config_echo.json").read_text())
    assert echo["seed"] == 11
    body = (out / "lyapunov.csv").read_text()
    assert body.splitlines()[0] == "method,steps,replicates,value,stderr,seed"


def test_unknown_key_rejected_by_name(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _lyapunov_config(tmp_path, out, bogus_key=1)
    assert main(["lyapunov", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "bogus_key" in err
    assert not out.exists()  # rejected before any file is written


def test_experiment_name_mismatch_rejected(tmp_path, capsys):
    cfg = _lyapunov_config(tmp_path, tmp_path / "out")
    assert main(["contraction", "--config", str(cfg)]) == 2
    assert "lyapunov" in capsys.readouterr().err


def test_bad_seed_rejected(tmp_path):
    cfg = _lyapunov_config(tmp_path, tmp_path / "out", seed="not-an-int")
    assert main(["lyapunov", "--config", str(cfg)]) == 2
    cfg2 = _lyapunov_config(tmp_path, tmp_path / "out", seed=-3)
    assert main(["lyapunov", "--config", str(cfg2)]) == 2


def test_missing_or_invalid_config_file(tmp_path, capsys):
    assert main(["lyapunov", "--config", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["lyapunov", "--config", str(bad)]) == 2


def test_reruns_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    cfg1 = _lyapunov_config(tmp_path, out1)
    assert main(["lyapunov", "--config", str(cfg1)]) == 0
    cfg2 = _write_config(
        tmp_path / "config2.json",
        json.loads(cfg1.read_text()) | {"output": str(out2)},
    )
    assert main(["lyapunov", "--config", str(cfg2)]) == 0
    assert (out1 / "lyapunov.csv").read_bytes() == (out2 / "lyapunov.csv").read_bytes()
    r1 = json.loads((out1 / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    r1["generated_at"] = r2["generated_at"] = None
    r1["config"]["output"] = r2["config"]["output"] = None
    assert r1 == r2


def test_echoed_config_reproduces_run(tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    cfg = _lyapunov_config(tmp_path, out1)
    assert main(["lyapunov", "--config", str(cfg)]) == 0
    echo_path = out1 / "config_echo.json"
    assert main(["lyapunov", "--config", str(echo_path), "--out", str(out2)]) == 0
    assert (out1 / "lyapunov.csv").read_bytes() == (out2 / "lyapunov.csv").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    cfg = _lyapunov_config(tmp_path, out1)
    assert main(["lyapunov", "--config", str(cfg)]) == 0
    cfg2 = _lyapunov_config(tmp_path, out2)
    assert main(["lyapunov", "--config", str(cfg2), "--seed", "999"]) == 0
    echo = json.loads((out2 / "config_echo.json").read_text())
    assert echo["seed"] == 999
    assert (out1 / "lyapunov.csv").read_bytes() != (out2 / "lyapunov.csv").read_bytes()


def test_numeric_failure_exits_3(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_config(
        tmp_path / "rot.json",
        {
            "experiment": "lyapunov",
            "system": ROT_TEXT,
            "seed": 5,
            "output": str(out),
            "steps": 200,
            "replicates": 3,
            "samples": 600,
        },
    )
    assert main(["lyapunov", "--config", str(cfg)]) == 3
    report = json.loads((out / "report.json").read_text())
    assert report["error"]["type"] == "EstimateFailure"
    assert "refused" in report["error"]["message"]
    assert "EstimateFailure" in capsys.readouterr().err


def test_validation_failure_inside_run_exits_2(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(
        tmp_path / "badw.json",
        {
            "experiment": "lyapunov",
            "system": "d=2\n2 1 1 1\n1 1 0 1\nw=1/2 1/3",
            "seed": 5,
            "output": str(out),
            "steps": 200,
        },
    )
    assert main(["lyapunov", "--config", str(cfg)]) == 2
    report = json.loads((out / "report.json").read_text())
    assert report["error"]["type"] == "InputError"


def test_system_file_resolved_relative_to_config(tmp_path):
    (tmp_path / "sys.txt").write_text(PAIR_TEXT + "\n")
    out = tmp_path / "out"
    cfg = _write_config(
        tmp_path / "c.json",
        {
            "experiment": "lyapunov",
            "system": "sys.txt",
            "seed": 11,
            "output": str(out),
            "steps": 200,
            "replicates": 3,
            "samples": 600,
        },
    )
    assert main(["lyapunov", "--config", str(cfg)]) == 0


def test_window_table_resolved_relative_to_config(tmp_path):
    (tmp_path / "theta.txt").write_text("0 0 -1.0\n0 1 3.0\n1 0 3.0\n1 1 0.5\n")
    out = tmp_path / "out"
    cfg = _write_config(
        tmp_path / "c.json",
        {
            "experiment": "coboundary",
            "system": PAIR_TEXT,
            "seed": 4,
            "output": str(out),
            "theta": "window:2:theta.txt",
            "epsilon0": 0.1,
            "p_max": 32,
            "samples": 500,
        },
    )
    assert main(["coboundary", "--config", str(cfg)]) == 0
    summary = json.loads((out / "report.json").read_text())["summary"]
    assert summary["min_tau"] >= 0.1
    assert summary["stabilized_fraction"] > 0.99
    assert summary["max_identity_residual_on_stabilized"] <= 1e-9


def test_finite_orbits_csv_values(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(
        tmp_path / "c.json",
        {
            "experiment": "finite-orbits",
            "system": PAIR_TEXT,
            "seed": 1,
            "output": str(out),
            "q_list": [2, 3],
            "k_max": 2,
        },
    )
    assert main(["finite-orbits", "--config", str(cfg)]) == 0
    lines = (out / "orbits.csv").read_text().splitlines()
    assert lines[0].startswith("q,orbit_size,sup_fourier")
    q2 = lines[1].split(",")
    assert q2[0] == "2" and q2[1] == "3"
    assert (out / "orbit_q2.csv").is_file()
    assert (out / "orbit_q3.csv").is_file()


def test_console_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "ergodrift.cli", "lyapunov", "--config", "/nonexistent"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 2
    assert "not found" in r.stderr
