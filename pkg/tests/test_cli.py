import json

import pytest

from gradsing.cli import EXIT_CONFIG, EXIT_OK, main, resolve_config, run
from gradsing.errors import ConfigError


def _run(tmp_path, *args):
    code = main([*args, "--out", str(tmp_path)])
    return code


def test_oracle_byte_identical(tmp_path):
    blobs = []
    for _ in range(2):
        assert _run(tmp_path, "oracle", "--ineq", "I2", "--p", "1.5", "--n", "20000", "--seed", "42") == EXIT_OK
        blobs.append(((tmp_path / "oracle.json").read_bytes(), (tmp_path / "oracle.csv").read_bytes()))
    assert blobs[0] == blobs[1]


def test_solve_ball_zero_g(tmp_path):
    assert _run(tmp_path, "solve-ball", "--g-amplitude", "0", "--t", "1000") == EXIT_OK
    doc = json.loads((tmp_path / "solve-ball.json").read_text())
    assert doc["ok"] and doc["report"]["iterations"] == 1
    assert doc["report"]["phi_norm_X"] <= 1e-12


def test_sweep_t(tmp_path):
    assert _run(tmp_path, "sweep-t", "--t-values", "100", "1000", "10000") == EXIT_OK
    rows = json.loads((tmp_path / "sweep-t.json").read_text())["report"]["rows"]
    eps = [r["eps_t"] for r in rows]
    assert eps[0] > eps[1] > eps[2]
    lines = (tmp_path / "sweep-t.csv").read_bytes().split(b"\n")
    assert lines[0] == b"t,eps_t,delta_t,eps_t_exterior,eps_hat_t_exterior"


def test_profile_and_modes(tmp_path):
    assert _run(tmp_path, "profile", "--t", "10") == EXIT_OK
    assert _run(tmp_path, "modes", "--t", "1000") == EXIT_OK
    doc = json.loads((tmp_path / "modes.json").read_text())
    k1 = doc["report"]["roots"][1]
    assert k1["gamma_minus_plus_sigma"] == pytest.approx(-1.0, abs=1e-12)


def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"task": "oracle", "solver": {"bogus": 1}}))
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "bogus" in err["message"]


def test_leaving_the_ball_exit_code(tmp_path):
    assert _run(tmp_path, "solve-ball", "--t", "2", "--g-amplitude", "5", "--R", "0.9") == EXIT_CONFIG


def test_resolve_config_defaults():
    cfg = resolve_config({"task": "solve-exterior"})
    assert cfg["params"]["regime"] == "exterior"
    assert cfg["seed"] == resolve_config({"task": "oracle"})["seed"]
    with pytest.raises(ConfigError):
        resolve_config({"task": "nope"})
    with pytest.raises(ConfigError):
        resolve_config({"task": "oracle", "extra": 1})


def test_run_returns_document(tmp_path):
    code, doc = run({"task": "oracle", "solver": {"n": 1000}, "output": {"dir": str(tmp_path)}, "seed": 1})
    assert code == EXIT_OK and doc["config"]["seed"] == 1
