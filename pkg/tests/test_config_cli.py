import json
import math

import numpy as np
import pytest
import yaml

from lvdroop.cli import main
from lvdroop.config import (ConfigError, bundled_config_path, dump_config, load_config_text, parse_config,
                            read_trajectory_csv, write_trajectory_csv)
from lvdroop.sim import Trajectory

FIG4_TEXT = bundled_config_path("fig4").read_text()
FIG3_TEXT = bundled_config_path("fig3").read_text()


def _line_of(text, needle, nth=1):
    count = 0
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            count += 1
            if count == nth:
                return i
    raise AssertionError(needle)


# -- parsing ----------------------------------------------------------------

def test_fig4_bundled():
    cfg = parse_config("fig4")
    assert cfg.decoupled and cfg.t_end == 10.0
    assert [v.tolist() for v in cfg.initial_conditions] == [[1.8, 1.6, 1.4, 1.2, 1.0], [2.8, 2.6, 2.4, 2.2, 2.0]]
    assert cfg.network.b_abs.tolist() == pytest.approx([2.5, 2.2, 3.5, 3.0, 1.2], abs=1e-15)


def test_fig2_bundled():
    cfg = parse_config("fig2")
    net = cfg.network
    assert not cfg.decoupled and net.has_overrides and len(net.edge_overrides) == 5
    for ov in net.edge_overrides:
        assert ov.signal.amplitude == pytest.approx(math.pi / 10) and ov.signal.angular_frequency == 120.0
    t = 0.0123
    th = net.edge_angles(t)
    th0 = net.theta0[net.edge_i] - net.theta0[net.edge_j]
    assert np.allclose(th, th0 + math.pi / 10 * np.sin(120 * t), rtol=0, atol=1e-15)
    assert net.references(0.0).tolist() == pytest.approx([2.0, 2.2, 2.0, 2.2, 2.0], abs=1e-15)
    assert net.references(math.pi / 2).tolist() == pytest.approx([2.2, 2.0, 2.2, 2.0, 2.2], abs=1e-15)


@pytest.mark.parametrize("name", ["fig2", "fig3", "fig4"])
def test_round_trip(name):
    cfg = parse_config(name)
    again = load_config_text(dump_config(cfg), "dumped")
    assert again.to_dict() == cfg.to_dict()
    assert np.array_equal(again.network.b_abs, cfg.network.b_abs)
    assert np.array_equal(again.network.edge_angles(0.37), cfg.network.edge_angles(0.37))


def test_parse_error_has_location():
    with pytest.raises(ConfigError, match=r"bad\.cfg:2:\d+: parse error"):
        load_config_text("name: x\nmode: coupled: decoupled\nseed: 1\n", "bad.cfg")


def test_schema_error_names_field_and_line():
    text = FIG4_TEXT.replace("tau: 1.0", "tau: fast", 1)
    line = _line_of(text, "tau: fast")
    with pytest.raises(ConfigError, match=rf"f\.cfg:{line}: network\.nodes\[0\]\.tau"):
        load_config_text(text, "f.cfg")


def test_negative_gain_names_node():
    text = FIG4_TEXT.replace("droop_gain: 5.0", "droop_gain: -1.0", 3).replace("droop_gain: -1.0", "droop_gain: 5.0", 2)
    line = _line_of(text, "droop_gain: -1.0")
    with pytest.raises(ConfigError, match=rf"f\.cfg:{line}: .*node 3"):
        load_config_text(text, "f.cfg")


def test_positive_susceptance_names_line():
    text = FIG4_TEXT.replace("susceptance: -0.7", "susceptance: 0.7")
    with pytest.raises(ConfigError, match=r"line \(2, 3\).*< 0"):
        load_config_text(text, "f.cfg")


def test_decoupled_restrictions():
    text = FIG4_TEXT.replace("theta0: 0.0", "theta0: 0.2", 1)
    with pytest.raises(ConfigError, match="equal angles"):
        load_config_text(text)
    raw = yaml.safe_load(FIG4_TEXT)
    raw["edge_angle_overrides"] = [{"from": 1, "to": 2, "signal": 0.1}]
    with pytest.raises(ConfigError, match="decoupled"):
        load_config_text(yaml.safe_dump(raw))


def test_missing_file():
    with pytest.raises(ConfigError, match="no such file"):
        parse_config("/nonexistent/missing.cfg")


# -- CSV --------------------------------------------------------------------

def test_csv_shapes(tmp_path):
    p = tmp_path / "c.csv"
    write_trajectory_csv(Trajectory(np.array([0.0, 0.5, 1.0]), np.full((3, 2), 2.0)), p)
    assert p.read_text() == "t,V_1,V_2\n0,2,2\n0.5,2,2\n1,2,2\n"
    write_trajectory_csv(Trajectory(np.array([]), np.zeros((0, 3))), p)
    assert p.read_text() == "t,V_1,V_2,V_3\n"


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    tr = Trajectory(np.cumsum(rng.random(50)), rng.random((50, 4)) * 10.0 ** rng.integers(-300, 300, (50, 4)))
    p = tmp_path / "r.csv"
    write_trajectory_csv(tr, p)
    back = read_trajectory_csv(p)
    assert np.array_equal(back.times, tr.times) and np.array_equal(back.states, tr.states)


# -- command line -----------------------------------------------------------

def test_simulate_writes_deterministic_csv(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "fig4", "--out", str(a), "--t-end", "2"]) == 0
    assert main(["simulate", "fig4", "--out", str(b), "--t-end", "2"]) == 0
    for name in ("trajectory_1.csv", "trajectory_2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    lines = (a / "trajectory_1.csv").read_text().splitlines()
    assert lines[0] == "t,V_1,V_2,V_3,V_4,V_5"
    assert lines[1] == "0,1.8,1.6,1.4,1.2,1"
    assert len(lines) == 1 + 201


def test_bundle_has_one_report_per_check(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "fig4", "--out", str(out)]) == 0
    doc = json.loads((out / "bundle.json").read_text())
    names = [r["kind"] for r in doc["certificates"]] + [r["name"] for r in doc["properties"]]
    assert sorted(names) == sorted(parse_config("fig4").checks)
    assert doc["all_hold"] is True
    assert len(doc["provenance"]["config_sha256"]) == 64


def test_certify_fig4(capsys):
    assert main(["certify", "fig4.cfg"]) == 0
    out = capsys.readouterr().out
    assert "metzler: holds" in out
    assert "gershgorin: holds (margin 5)" in out
    assert "hurwitz: holds" in out


def test_equilibrium_fig4(capsys):
    assert main(["equilibrium", "fig4"]) == 0
    out = capsys.readouterr().out.splitlines()
    vals = [float(x) for x in out[0].split(":")[1].split()]
    assert vals == pytest.approx([2.0] * 5, abs=1e-14)


@pytest.mark.parametrize("argv", [
    ["simulate", "missing.cfg"],
    ["frobnicate", "fig4"],
    ["simulate", "fig4", "--rel-tol"],
    ["reproduce", "fig9"],
    ["simulate", "fig4", "--t-end", "-1"],
])
def test_usage_and_config_errors_exit_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert capsys.readouterr().err


def _write(tmp_path, text, name="v.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize("edit", [
    # angle envelope past the cooperativity threshold for ratio 0.5
    lambda raw: raw["check_options"].update(beta=1.2) or raw.update(checks=["cooperativity"]),
    # a single initial condition leaves nothing to order
    lambda raw: raw.update(initial_conditions=raw["initial_conditions"][:1], checks=["monotone_order"]),
    # entropy descent needs the decoupled model
    lambda raw: raw.update(checks=["positivity", "lyapunov_descent"]),
])
def test_single_failing_check_flips_exit_code(edit, tmp_path):
    raw = yaml.safe_load(FIG3_TEXT)
    raw["sim"]["t_end"] = 1.0
    edit(raw)
    assert main(["simulate", _write(tmp_path, yaml.safe_dump(raw)), "--out", str(tmp_path / "o")]) == 1


def test_verify_supplied_csv(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "fig4", "--out", str(out), "--t-end", "2"]) == 0
    csvs = [str(out / "trajectory_1.csv"), str(out / "trajectory_2.csv")]
    assert main(["verify", "fig4", "--csv", *csvs]) == 0
    bad = out / "trajectory_1.csv"
    text = bad.read_text().splitlines()
    text[5] = text[5].replace(text[5].split(",")[2], "-0.5", 1)
    bad.write_text("\n".join(text) + "\n")
    assert main(["verify", "fig4", "--csv", *csvs]) == 1
    narrow = tmp_path / "n.csv"
    narrow.write_text("t,V_1\n0,1\n")
    assert main(["verify", "fig4", "--csv", str(narrow)]) == 2


def test_reproduce_fig4(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["reproduce", "fig4"]) == 0
    out = tmp_path / "reproduce_fig4"
    for name in ("trajectory_1.csv", "trajectory_2.csv"):
        tr = read_trajectory_csv(out / name)
        assert tr.times[-1] == 10.0 and np.max(np.abs(tr.final - 2.0)) < 1e-6
    assert "monotone_order: holds" in capsys.readouterr().out
