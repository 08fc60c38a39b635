import json

import pytest

from crystalgate import cli, io
from crystalgate.errors import ConfigError


def _run(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_crystal_and_phonons_chain(tmp_path, capsys):
    code, out, _ = _run(capsys, "crystal", "--n-ions", 7, "--out", tmp_path, "--format", "csv")
    assert code == 0 and json.loads(out)["n_ions"] == 7
    kind, cols, rows = io.read_csv(tmp_path / "crystal.csv")
    assert kind == "positions" and cols[0] == "ion" and len(rows) == 7
    code, out, _ = _run(capsys, "phonons", "--crystal", tmp_path / "crystal.json", "--out", tmp_path)
    assert code == 0 and json.loads(out)["n_modes"] == 21
    assert (tmp_path / "spectrum.csv").read_text().startswith("# crystalgate-csv v1 spectrum\n")


def test_gate_command(tmp_path, capsys):
    code, out, _ = _run(capsys, "gate", "--out", tmp_path, "--envelope", "sin2", "--carrier-nu-hz", 2.2e6,
                        "--rabi-hz", 1e9, "--detuning-hz", 1e14)
    assert code == 0
    res = json.loads(out)
    assert abs(abs(res["conditional_phase"]) - 3.141592653589793) < 1e-9
    saved = json.loads((tmp_path / "gate.json").read_text())
    assert "spontaneous_error" in saved and saved["pulse"]["envelope"] == "sin2"


def test_sweep_temperature_command(tmp_path, capsys):
    code, _, _ = _run(capsys, "sweep-temperature", "--n-ions", 2, "--carrier-nu-hz", 2.2e6,
                      "--duration-s", 1e-5, "--t-points", 3, "--out", tmp_path)
    assert code == 0
    kind, cols, rows = io.read_csv(tmp_path / "fidelity_vs_T.csv")
    assert kind == "fidelity_vs_T" and cols == ["T_K", "F_carrier", "F_vertical"] and len(rows) == 3


def test_cluster_command(tmp_path, capsys):
    code, out, _ = _run(capsys, "cluster", "--out", tmp_path, "--waist-sigma", 0.5)
    assert code == 0
    graph = json.loads((tmp_path / "graph.json").read_text())
    assert len(graph["edges"]) == 3 and graph["metadata"]["initial_state"] == "|+...+>"
    assert io.read_csv(tmp_path / "trajectory.csv")[0] == "sweep_trajectory"


def test_network_command_seeded(tmp_path, capsys):
    args = ("network", "--out", tmp_path, "--n-trials", 20000, "--eta", 0.2, "--eta-prime", 0.5)
    _, first, _ = _run(capsys, *args, "--seed", 4)
    _, second, _ = _run(capsys, *args, "--seed", 4)
    _, third, _ = _run(capsys, *args, "--seed", 5)
    assert first == second and first != third
    saved = json.loads((tmp_path / "network.json").read_text())
    assert saved["config"]["rng_seed"] == 5


def test_precedence_file_set_flag(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("n_ions = 3\n[crystal]\nomega_z_hz = 8e6\n")
    _run(capsys, "crystal", "--config", cfg, "--out", tmp_path)
    data = json.loads((tmp_path / "crystal.json").read_text())
    assert data["trap"]["n_ions"] == 3
    assert data["trap"]["omega_z"] == pytest.approx(2 * 3.141592653589793 * 8e6)
    _run(capsys, "crystal", "--config", cfg, "--set", "n_ions=4", "--out", tmp_path)
    assert json.loads((tmp_path / "crystal.json").read_text())["trap"]["n_ions"] == 4
    _run(capsys, "crystal", "--config", cfg, "--set", "n_ions=4", "--n-ions", 5, "--out", tmp_path)
    assert json.loads((tmp_path / "crystal.json").read_text())["trap"]["n_ions"] == 5


@pytest.mark.parametrize(
    "argv,code",
    [
        (["crystal", "--n-ions", "-3"], 2),
        (["crystal", "--bogus"], 2),
        (["network", "--eta", "0.9", "--eta-prime", "0.1"], 2),
        (["crystal", "--config", "missing.json"], 2),
        (["gate", "--carrier-nu-hz", "200e3"], 3),
    ],
)
def test_error_exit_codes(tmp_path, capsys, argv, code):
    got, _, err = _run(capsys, *argv, "--out", tmp_path)
    assert got == code
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["exit_code"] == code and payload["message"]


def test_bad_toml(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("n_ions = = 3\n")
    assert _run(capsys, "crystal", "--config", cfg, "--out", tmp_path)[0] == 2


def test_reproduce_figure2_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(capsys, "reproduce-figure2", "--out", a, "--t-points", 5)[0] == 0
    assert _run(capsys, "reproduce-figure2", "--out", b, "--t-points", 5)[0] == 0
    for name in ("spectrum.csv", "force_profile.csv", "fidelity_vs_T.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert 16 <= summary["force_ratio"] <= 25
    assert summary["targets"] == [0, 6]


def test_json_round_trip_helpers(tmp_path):
    path = io.write_json(tmp_path / "x.json", {"a": float("inf"), "b": [1.5, 2]})
    assert json.loads(path.read_text()) == {"a": None, "b": [1.5, 2]}
    assert io.parse_override("t-max-k=0.002") == ("t_max_k", 0.002)
    assert io.parse_override("envelope=sin4") == ("envelope", "sin4")
    with pytest.raises(ConfigError):
        io.parse_override("novalue")
