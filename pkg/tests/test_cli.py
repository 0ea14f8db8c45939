import json
import subprocess
import sys

import pytest

from edgewatt import __version__
from edgewatt.arch import network_from_dict
from edgewatt.cli import main
from edgewatt.estimate import NetworkEstimate, estimate_network
from edgewatt.profiles import bundled_profiles

from oracles import XAVIER


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    assert out or err, "every run must emit something"
    return code, out, err


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path
    return _write


# --- devices ---

def test_devices_table(capsys):
    code, out, _ = run(capsys, "devices")
    assert code == 0
    assert "jetson-tx2" in out and "2.6727e-08" in out and "1.21334e-10" in out
    assert "jetson-xavier-nx" in out and "4.7639e-10" in out and "6.2454e-09" in out
    assert "J_per_MAC" in out


def test_devices_json(capsys):
    code, out, _ = run(capsys, "devices", "--format", "json")
    rows = {r["device_id"]: r for r in json.loads(out)}
    assert rows["jetson-tx2"] == {"device_id": "jetson-tx2", "a_c": 2.6727e-08,
                                  "b_c": 1.21334e-10, "units": "J_per_MAC"}
    assert rows["jetson-xavier-nx"]["a_f"] == 6.2454e-09


def test_user_profiles_merge_and_override(capsys, tmp_path, monkeypatch, write_json):
    write_json("mine.json", {"device_id": "my-board", "a_c": 1e-8, "b_c": 1e-10})
    write_json("tx2.json", {"device_id": "jetson-tx2", "a_c": 3e-8, "b_c": 2e-10, "a_f": 5e-9})
    monkeypatch.setenv("EDGEWATT_PROFILE_DIR", str(tmp_path))
    _, out, _ = run(capsys, "devices", "--format", "json")
    rows = {r["device_id"]: r for r in json.loads(out)}
    assert set(rows) == {"jetson-tx2", "jetson-xavier-nx", "my-board"}
    assert rows["jetson-tx2"]["a_c"] == 3e-8
    # bundled data itself is untouched
    monkeypatch.delenv("EDGEWATT_PROFILE_DIR")
    assert bundled_profiles()["jetson-tx2"].a_c == 2.6727e-08


# --- estimate ---

def test_estimate_table(capsys, lenet_path):
    code, out, _ = run(capsys, "estimate", lenet_path, "--device", "jetson-xavier-nx")
    assert code == 0
    body = [l for l in out.splitlines() if l[:1].isdigit()]
    assert len(body) == 5
    total = 14400 * (XAVIER["a_c"] + 6 * XAVIER["b_c"]) + 9600 * (XAVIER["a_c"] + 16 * XAVIER["b_c"]) \
        + (48000 + 10080 + 840) * XAVIER["a_f"]
    assert f"total_j: {total:.6g}" in out


def test_estimate_json_round_trips(capsys, lenet_path, lenet, xavier):
    code, out, _ = run(capsys, "estimate", lenet_path, "--device", "jetson-xavier-nx", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert NetworkEstimate.from_dict(doc) == estimate_network(lenet, xavier)
    assert len(doc["cumulative"]) == 5 and doc["cumulative"][-1] == doc["total_j"]


def test_estimate_csv(capsys, lenet_path):
    code, out, _ = run(capsys, "estimate", lenet_path, "--device", "jetson-xavier-nx", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "index,kind,load,energy_j,cumulative_j"
    assert len(lines) == 7 and lines[-1].startswith("total,")


def test_estimate_profile_file(capsys, lenet_path, write_json):
    path = write_json("p.json", {"device_id": "x", "a_c": 1e-8, "b_c": 0.0, "a_f": 1e-9})
    code, out, _ = run(capsys, "estimate", lenet_path, "--profile", path, "--format", "json")
    assert code == 0 and json.loads(out)["device_id"] == "x"


def test_estimate_uncalibrated_exit_3(capsys, lenet_path):
    code, out, err = run(capsys, "estimate", lenet_path, "--device", "jetson-tx2")
    assert code == 3
    assert out == "" and "layer 2" in err


def test_estimate_missing_file_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "estimate", tmp_path / "missing.json", "--device", "jetson-tx2")
    assert code == 2 and "missing.json" in err


def test_estimate_malformed_json_reports_line(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x",\n "layers": [}\n')
    code, _, err = run(capsys, "estimate", path, "--device", "jetson-tx2")
    assert code == 2 and "line 2" in err


def test_estimate_bad_field_exit_2(capsys, write_json):
    path = write_json("a.json", {"layers": [{"kind": "fc", "i_size": 0, "o_size": 3}]})
    code, _, err = run(capsys, "estimate", path, "--device", "jetson-xavier-nx")
    assert code == 2 and "layer 0" in err


def test_estimate_unknown_device_exit_2(capsys, lenet_path):
    code, _, err = run(capsys, "estimate", lenet_path, "--device", "nope")
    assert code == 2 and "nope" in err


def test_estimate_needs_a_profile(capsys, lenet_path):
    code, _, _ = run(capsys, "estimate", lenet_path)
    assert code == 1


def test_estimate_unknown_layer_kind(capsys, write_json):
    doc = {"name": "x", "layers": [{"kind": "conv2d", "i_size": 8, "ifm": 1, "ofm": 2, "ksize": 3, "stride": 1},
                                   {"kind": "maxpool", "size": 2},
                                   {"kind": "fc", "i_size": 4, "o_size": 2}]}
    path = write_json("a.json", doc)
    code, _, err = run(capsys, "estimate", path, "--device", "jetson-xavier-nx")
    assert code == 2 and "layer 1" in err
    code, out, err = run(capsys, "estimate", path, "--device", "jetson-xavier-nx",
                         "--skip-unknown", "--format", "json")
    assert code == 0 and "layer 1" in err
    report = json.loads(out)
    assert report["skipped"] == [{"index": 1, "kind": "maxpool"}]
    assert [l["index"] for l in report["layers"]] == [0, 2]
    code, out, _ = run(capsys, "estimate", path, "--device", "jetson-xavier-nx", "--skip-unknown")
    assert "skipped:maxpool" in out


def test_estimate_skip_unknown_gap_uses_file_index(capsys, write_json):
    doc = {"layers": [{"kind": "lstm"}, {"kind": "fc", "i_size": 4, "o_size": 2}]}
    path = write_json("a.json", doc)
    code, _, err = run(capsys, "estimate", path, "--device", "jetson-tx2", "--skip-unknown")
    assert code == 3 and "layer 1" in err


# --- load ---

def test_load_lenet(capsys, lenet_path):
    code, out, _ = run(capsys, "load", lenet_path, "--format", "json")
    doc = json.loads(out)
    assert [r["load"] for r in doc["layers"]] == [86400, 153600, 48000, 10080, 840]
    assert doc["total"] == 298920
    code, out, _ = run(capsys, "load", lenet_path)
    assert code == 0 and "total_mac: 298920" in out


def test_load_single_fc(capsys, write_json):
    path = write_json("a.json", {"layers": [{"kind": "fc", "i_size": 1, "o_size": 1}]})
    code, out, _ = run(capsys, "load", path, "--format", "csv")
    assert out.splitlines()[1] == "0,fc,,1"


def test_load_approx(capsys, write_json):
    conv = {"kind": "conv2d", "i_size": 32, "ifm": 16, "ofm": 64, "ksize": 3, "stride": 1}
    path = write_json("a.json", {"layers": [conv]})
    code, out, _ = run(capsys, "load", path, "--mode", "approx", "--format", "json")
    assert json.loads(out)["layers"][0]["load"] == 147456.0 * 64
    path = write_json("b.json", {"layers": [dict(conv, padding=1)]})
    code, _, err = run(capsys, "load", path, "--mode", "approx")
    assert code == 2 and "padding" in err


# --- trace-energy ---

def _manifest(write_json, configs, delta_s=1e-4):
    return write_json("m.json", {"device_id": "dev", "delta_s": delta_s, "configs": configs})


FC_CFG = {"kind": "fc", "i_size": 10, "o_size": 10}


def test_trace_energy_constant_power(capsys, tmp_path, write_json):
    manifest = _manifest(write_json, {"a": FC_CFG})
    traces = tmp_path / "t.csv"
    traces.write_text("config_id,run_id,slot_idx,power_mw\n"
                      + "".join(f"a,{r},{s},5000.0\n" for r in range(2) for s in range(20000)))
    code, out, _ = run(capsys, "trace-energy", traces, manifest)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "config_id,n_runs,load,mean_energy_j,std_energy_j,ci99_j"
    assert lines[1] == "a,2,100,10.0,0.0,0.0"


def test_trace_energy_gap_exit_2(capsys, tmp_path, write_json):
    manifest = _manifest(write_json, {"a": FC_CFG})
    traces = tmp_path / "t.csv"
    traces.write_text("config_id,run_id,slot_idx,power_mw\na,0,0,1.0\na,0,2,1.0\n")
    code, _, err = run(capsys, "trace-energy", traces, manifest)
    assert code == 2 and "gap" in err and "expected 1, got 2" in err


def test_trace_energy_out_file(capsys, tmp_path, write_json):
    manifest = _manifest(write_json, {"a": FC_CFG})
    traces = tmp_path / "t.csv"
    traces.write_text("config_id,run_id,slot_idx,power_mw\na,0,0,1000.0\n")
    out_path = tmp_path / "s.csv"
    code, _, err = run(capsys, "trace-energy", traces, manifest, "--out", out_path, "--baseline-mw", 500)
    assert code == 0 and "wrote 1" in err
    assert out_path.read_text().splitlines()[1].split(",")[3] == repr(1e-4 * 500.0 / 1000)


# --- synth + fit ---

def test_synth_deterministic(capsys, tmp_path):
    outs = []
    for name in ("a", "b"):
        t, m = tmp_path / f"{name}.csv", tmp_path / f"{name}.json"
        code, _, _ = run(capsys, "synth", "--device", "jetson-xavier-nx", "--traces", t, "--manifest", m,
                         "--runs", 3, "--power-std-mw", 100, "--seed", 9)
        assert code == 0
        outs.append((t.read_bytes(), m.read_bytes()))
    assert outs[0] == outs[1]


def test_synth_default_grid(capsys, tmp_path):
    t, m = tmp_path / "t.csv", tmp_path / "m.json"
    run(capsys, "synth", "--device", "jetson-xavier-nx", "--traces", t, "--manifest", m, "--runs", 1)
    manifest = json.loads(m.read_text())
    convs = [c for c in manifest["configs"].values() if c["kind"] == "conv2d"]
    by_ofm = {}
    for c in convs:
        load = ((c["i_size"] - c["ksize"]) // c["stride"] + 1) ** 2 * c["ifm"] * c["ksize"] ** 2
        by_ofm.setdefault(c["ofm"], set()).add(load)
    assert sorted(by_ofm) == [2**k for k in range(10)]
    assert all(len(loads) >= 2 for loads in by_ofm.values())


def test_synth_fit_noiseless_tx2(capsys, tmp_path):
    t, m, s, p = (tmp_path / n for n in ("t.csv", "m.json", "s.csv", "p.json"))
    assert run(capsys, "synth", "--device", "jetson-tx2", "--traces", t, "--manifest", m, "--runs", 2)[0] == 0
    assert run(capsys, "trace-energy", t, m, "--out", s)[0] == 0
    code, out, err = run(capsys, "fit", s, m, "--out", p, "--device-id", "tx2-fit")
    assert code == 0
    assert "a_f" in err  # conv-only campaign warns
    profile = json.loads(p.read_text())
    assert profile["device_id"] == "tx2-fit" and "a_f" not in profile
    assert profile["a_c"] == pytest.approx(2.6727e-08, rel=1e-6)
    assert profile["b_c"] == pytest.approx(1.21334e-10, rel=1e-6)
    report = json.loads(out)
    assert len(report["per_ofm"]) == 10 and "fc" not in report


def test_fit_single_ofm_exit_2(capsys, tmp_path):
    t, m, s = tmp_path / "t.csv", tmp_path / "m.json", tmp_path / "s.csv"
    run(capsys, "synth", "--device", "jetson-tx2", "--traces", t, "--manifest", m, "--runs", 1, "--ofm", "16")
    run(capsys, "trace-energy", t, m, "--out", s)
    code, _, err = run(capsys, "fit", s, m)
    assert code == 2 and "degenerate design" in err


# --- usage ---

def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["estimate"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["synth", "--device", "jetson-tx2", "--traces", "t", "--manifest", "m", "--ofm", "x"])
    assert info.value.code == 1


def test_version_and_help(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip() == __version__
    for cmd in ("estimate", "load", "trace-energy", "fit", "synth", "devices"):
        with pytest.raises(SystemExit):
            main([cmd, "--help"])
        assert "usage" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "edgewatt", "devices"], capture_output=True, text=True)
    assert proc.returncode == 0 and "jetson-xavier-nx" in proc.stdout
