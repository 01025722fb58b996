import json
import subprocess
import sys

import pytest

from qcsign.cli import ConfigError, ExperimentConfig, main, resolve_config
from qcsign.protocol import Party, wire
from qcsign.protocol.transport import TrentClient


def read_json(path):
    return json.loads(path.read_text())


def test_analyze_writes_curve_and_summary(tmp_path):
    assert main(["analyze", "--n", "40", "--out", str(tmp_path)]) == 0
    summary = read_json(tmp_path / "summary.json")
    assert summary["N"] == 40 and 0 < summary["sup"] < 0.25
    assert summary["config"]["n"] == 40 and "out" not in summary["config"]
    assert summary["risk_check"]["delta"] == pytest.approx(summary["sup"] ** (1 / 3))
    lines = (tmp_path / "curve.csv").read_text().splitlines()
    assert lines[0].startswith("# version") and lines[1].startswith("# config")
    assert len(lines) == 2 + 1 + 41
    assert "wall_time_s" in read_json(tmp_path / "timing.json")


def test_analyze_to_stdout(capsys):
    assert main(["analyze", "--n", "6", "--split", "fixed"]) == 0
    out = capsys.readouterr().out
    assert "# config" in out and '"m_star"' in out


def test_reruns_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--n", "12", "--trials", "200", "--seed", "4",
                     "--strategy-b", "guesser@refuse", "--out", str(tmp_path / d)]) == 0
        assert main(["analyze", "--n", "30", "--out", str(tmp_path / d)]) == 0
    for name in ("report.json", "summary.json", "curve.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_csv_format(tmp_path):
    assert main(["simulate", "--n", "8", "--trials", "50", "--format", "csv", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "report.csv").read_text()
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0].startswith("quantity,value") and lines[1].startswith("p_valid,1.0,50,50,")


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 3\n"
                   "alpha: {point: 0.8}\n"
                   "simulate:\n  n: 10\n  trials: 40\n"
                   "  strategies: {a: honest, b: always-reject@refuse}\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--trials", "30", "--out", str(out)]) == 0
    doc = read_json(out / "report.json")
    assert doc["p_valid"]["trials"] == 30 and doc["config"]["trials"] == 30
    assert doc["config"]["n"] == 10 and doc["config"]["seed"] == 3
    assert doc["config"]["alpha_point"] == 0.8 and doc["config"]["strategy_b"] == "always-reject@refuse"


def test_resolve_defaults_and_validation():
    assert resolve_config("simulate", {}, {}).n == 20
    assert resolve_config("scaling", {}, {}).split == "fixed"
    with pytest.raises(ConfigError):
        resolve_config("simulate", {"bogus": 1}, {})
    with pytest.raises(ConfigError):
        resolve_config("analyze", {}, {"n": 2.5})
    assert isinstance(resolve_config("analyze", {}, {"n": 4}), ExperimentConfig)


@pytest.mark.parametrize("argv", [
    ["analyze", "--n", "0"],
    ["analyze", "--n", "7", "--split", "fixed"],
    ["analyze", "--n", "10", "--alpha-lo", "0.9", "--alpha-hi", "0.6"],
    ["simulate", "--noise", "1.5"],
    ["simulate", "--strategy-b", "mixed-reject:99", "--n", "5"],
    ["scaling", "--ns", "100,100"],
    ["scaling", "--points", "100:0.1"],
])
def test_invalid_configuration_exits_1(argv, capsys):
    assert main(argv) == 1
    assert "qcsign:" in capsys.readouterr().err


def test_bad_config_file_exits_1(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("[unclosed\n")
    assert main(["analyze", "--config", str(p)]) == 1
    p.write_text("- a list\n")
    assert main(["analyze", "--config", str(p)]) == 1


def test_missing_and_corrupt_files_exit_3(tmp_path):
    assert main(["analyze", "--config", str(tmp_path / "missing.yaml")]) == 3
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"\x00\x00\x00\x05abc")
    assert main(["bind", "--session", str(junk), "--claim-a", str(junk),
                 "--claim-b", str(junk), "--alpha-point", "0.9"]) == 3


def test_scaling_from_points(tmp_path):
    assert main(["scaling", "--points", "100:0.1,400:0.05,1600:0.025", "--out", str(tmp_path)]) == 0
    assert read_json(tmp_path / "scaling.json")["slope"] == pytest.approx(-0.5)


def test_scaling_computed_csv(tmp_path):
    assert main(["scaling", "--ns", "20,40,80", "--format", "csv", "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "scaling.json")
    assert [p["N"] for p in doc["points"]] == [20, 40, 80] and doc["slope"] < 0
    assert (tmp_path / "scaling.csv").read_text().startswith("# version")


def test_verify_passes_and_detects_perturbation(tmp_path, capsys):
    assert main(["verify", "--trials", "4000", "--out", str(tmp_path / "ok")]) == 0
    doc = read_json(tmp_path / "ok" / "verify.json")
    assert doc["passed"] and doc["oracle"]["n_failures"] == 0
    assert main(["verify", "--trials", "4000", "--perturb-threshold", "1",
                 "--out", str(tmp_path / "bad")]) == 2
    doc = read_json(tmp_path / "bad" / "verify.json")
    assert not doc["passed"] and doc["oracle"]["n_failures"] > 0
    assert "FAIL" in capsys.readouterr().err


def test_bind_from_persisted_session_in_fresh_process(tmp_path):
    persist = tmp_path / "trial0"
    assert main(["simulate", "--n", "16", "--trials", "1", "--seed", "21",
                 "--persist", str(persist), "--out", str(tmp_path / "sim")]) == 0
    alpha = read_json(persist / "alpha.json")["alpha"]
    cmd = [sys.executable, "-m", "qcsign", "bind", "--session", str(persist / "session.bin"),
           "--claim-a", str(persist / "claim_a.bin"), "--claim-b", str(persist / "claim_b.bin"),
           "--alpha-point", repr(alpha), "--out", str(tmp_path / "bind")]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "bind" / "verdict.bin").read_bytes() == (persist / "verdict.bin").read_bytes()
    doc = read_json(tmp_path / "bind" / "verdict.json")
    notice = wire.load_message(persist / "verdict.bin")
    assert wire.decode_message(bytes.fromhex(doc["frame_hex"])) == notice
    assert doc["contract_valid"] == notice.verdict.contract_valid


def test_bind_rejects_mismatched_claims(tmp_path):
    # Fresh runs reuse session id 1, so pair claims from sessions of different size.
    for seed, d, n in ((1, "x", "6"), (2, "y", "8")):
        assert main(["simulate", "--n", n, "--trials", "1", "--seed", str(seed),
                     "--persist", str(tmp_path / d), "--out", str(tmp_path / "s")]) == 0
    assert main(["bind", "--session", str(tmp_path / "x" / "session.bin"),
                 "--claim-a", str(tmp_path / "y" / "claim_a.bin"),
                 "--claim-b", str(tmp_path / "x" / "claim_b.bin"), "--alpha-point", "0.9"]) == 1


def test_serve_subprocess():
    proc = subprocess.Popen([sys.executable, "-m", "qcsign", "serve", "--port", "0", "--seed", "1",
                             "--alpha-point", "0.8"], stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        assert line.startswith("listening on")
        host, port = line.split()[-1].rsplit(":", 1)
        with TrentClient((host, int(port))) as alice, TrentClient((host, int(port))) as bob:
            ga = alice.init(Party.ALICE, n=8)
            gb = bob.init(Party.BOB, session_id=ga.session_id)
            assert ga.qubits == gb.cross_bits and len(ga.qubits) == 8
    finally:
        proc.terminate()
        proc.wait(10)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "qcsign" in capsys.readouterr().out
