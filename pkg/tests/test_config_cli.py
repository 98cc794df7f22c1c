import json

import pytest

from schn.cli import main
from schn.config import (ConfigError, config_digest, dump_config, load_config,
                         parse_config)


def test_parse_types():
    cfg = parse_config("""
# comment
experiment = walk_suite
m = 32
beta = 1.0
probes = 1,2,3
betas = 1.0,1.5
name = heatbath   # trailing comment
""")
    assert cfg["experiment"] == "walk_suite"
    assert cfg["m"] == 32 and isinstance(cfg["m"], int)
    assert cfg["beta"] == 1.0 and isinstance(cfg["beta"], float)
    assert cfg["probes"] == [1, 2, 3]
    assert cfg["betas"] == [1.0, 1.5]
    assert cfg["name"] == "heatbath"


def test_round_trip_identity():
    cfg = parse_config("a = 1\nb = 2.5\nc = 1,2,3\nd = text\ne = 0.5,1.5\n")
    assert parse_config(dump_config(cfg)) == cfg
    # twice to be sure serialisation is a fixed point
    assert dump_config(parse_config(dump_config(cfg))) == dump_config(cfg)


def test_parse_errors():
    with pytest.raises(ConfigError):
        parse_config("novalue\n")
    with pytest.raises(ConfigError):
        parse_config("a = 1\na = 2\n")
    with pytest.raises(ConfigError):
        parse_config("a = \n")
    with pytest.raises(ConfigError):
        parse_config("bad key = 3\n")
    with pytest.raises(ConfigError):
        parse_config("a = x,y\n")


def test_digest_is_order_insensitive_and_stable():
    a = parse_config("x = 1\ny = 2\n")
    b = parse_config("y = 2\nx = 1\n")
    assert config_digest(a) == config_digest(b)
    assert len(config_digest(a)) == 64


def test_cli_exact(capsys):
    rc = main(["exact", "--box", "2", "--beta", "0.8",
               "--segment=-1:0:0:1", "--site", "1,0"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["brute"]["probability"] - 0.04744998806889483) < 1e-12
    assert abs(out["brute"]["probability"] - out["transfer"]["probability"]) < 1e-12


def test_cli_mc(capsys):
    rc = main(["mc", "--box", "2", "--beta", "0.8", "--segment=-1:0:0:1",
               "--site", "1,0", "--burn-in", "100", "--sweeps", "2000",
               "--thin", "2", "--seed", "5"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["mean"] - 0.04744998806889483) <= 3 * out["stderr"] + 1e-9


def test_cli_contours(tmp_path, capsys):
    rc = main(["--out-dir", str(tmp_path), "contours", "--box", "3",
               "--beta", "1.0", "--segment=-1:0:0:1", "--samples", "20",
               "--seed", "3"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["samples"] == 20
    assert (tmp_path / "contours.csv").exists()


def test_cli_walk(tmp_path, capsys):
    rc = main(["--out-dir", str(tmp_path), "walk", "--law", "simple",
               "--n-list", "16,32,64,128"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert -1.7 < out["exponent"] < -1.3
    assert (tmp_path / "walk_simple.csv").exists()


def test_cli_error_paths(tmp_path, capsys):
    rc = main(["exact", "--box", "2", "--beta", "0.8", "--site", "9,9"])
    assert rc == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = nope\n")
    rc = main(["experiment", str(bad)])
    assert rc == 1


def test_cli_exit_two_on_failed_verdict(tmp_path, monkeypatch, capsys):
    from schn import cli as cli_mod
    from schn.experiments import ExperimentResult, Verdict

    def fake_run(cfg, out_dir, threads=None):
        return ExperimentResult("walk_suite",
                                [Verdict("always_fails", False, 1.0, 0.0)], [])

    monkeypatch.setattr(cli_mod, "run_experiment", fake_run)
    cfgfile = tmp_path / "w.cfg"
    cfgfile.write_text("experiment = walk_suite\n")
    rc = main(["experiment", str(cfgfile)])
    assert rc == 2


def test_threads_resolution(monkeypatch):
    from schn.mc import resolve_threads

    monkeypatch.delenv("SCHN_THREADS", raising=False)
    assert resolve_threads(3) == 3
    monkeypatch.setenv("SCHN_THREADS", "5")
    assert resolve_threads(None) == 5
    assert resolve_threads(None, upper=2) == 2
