import json
import subprocess
import sys

import pytest

from meyerlab.cli import main


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    return tmp_path


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def test_generate_and_manifest(work):
    assert main(["generate", "--preset", "fibonacci", "--size", "500", "--out", "fib.json"]) == 0
    doc = _load("fib.json")
    assert len(doc["points"]) == 500
    assert doc["scheme"]["m"] == 1
    man = doc["manifest"]
    assert man["command"] == "generate"
    assert man["timestamp"] == "1970-01-01T00:00:00Z"
    assert man["output_paths"] == ["fib.json"]
    assert man["params"]["preset"] == "fibonacci"
    assert set(man) == {"command", "params", "seed", "input_hashes", "output_paths",
                        "tool_version", "timestamp"}


def test_generate_presets(work):
    assert main(["generate", "--preset", "zd", "--size", "50", "--out", "z.json"]) == 0
    assert len(_load("z.json")["points"]) == 50
    assert main(["generate", "--preset", "zd", "--size", "5", "--dim", "2", "--out", "z2.json"]) == 0
    assert len(_load("z2.json")["points"]) == 25
    assert main(["generate", "--preset", "model", "--size", "300", "--out", "m.json"]) == 0
    assert abs(len(_load("m.json")["points"]) - 300) <= 2


def test_timestamp_from_environment(work, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "86400")
    main(["generate", "--preset", "zd", "--size", "10", "--out", "z.json"])
    assert _load("z.json")["manifest"]["timestamp"] == "1970-01-02T00:00:00Z"


def test_pipeline(work):
    main(["generate", "--preset", "fibonacci", "--size", "2000", "--out", "fib.json"])
    assert main(["diffract", "--in", "fib.json", "--estimator", "sf", "--out", "spec.json"]) == 0
    spec = _load("spec.json")
    assert spec["manifest"]["output_paths"] == ["spec.json", "spec.csv"]
    assert len(spec["manifest"]["input_hashes"][0]["sha256"]) == 64
    assert (work / "spec.csv").read_text().startswith("chi,intensity,stderr_proxy\n")
    assert main(["diffract", "--in", "fib.json", "--estimator", "eqhof", "--candidates",
                 "grid:0.5", "--freq-lo", "-2", "--freq-hi", "2", "--out", "eq.json"]) == 0
    assert len(_load("eq.json")["entries"]) == 9
    assert main(["peaks", "--spectrum", "spec.json", "--a", "0.2", "--out", "peaks.json"]) == 0
    assert len(_load("peaks.json")["peaks"]) > 0
    assert main(["peaks", "--spectrum", "spec.json", "--a", "0.2", "--b", "0.01",
                 "--out", "band.json"]) == 0
    assert _load("band.json")["lower"] == 0.01
    assert main(["dualset", "--in", "fib.json", "--eps", "0.1", "--radius", "50",
                 "--freq-lo", "-100", "--freq-hi", "100", "--out", "ds.json"]) == 0
    assert len(_load("ds.json")["members"]) == 9
    assert main(["deform", "--in", "fib.json", "--remove-frac", "0.1", "--seed", "3",
                 "--out", "def.json"]) == 0
    d = _load("def.json")["deformation"]
    assert d["n_original"] == d["n_deformed"] + d["n_removed"]
    assert main(["export", "--spectrum", "spec.json", "--format", "csv", "--out", "plot.csv"]) == 0
    assert (work / "plot.csv").read_text().startswith("chi,intensity\n")


def test_dual_candidates_need_scheme(work):
    (work / "bare.json").write_text(json.dumps(
        {"dim": 1, "region": {"lo": [0.0], "hi": [10.0]}, "points": [[float(i)] for i in range(10)]}))
    assert main(["diffract", "--in", "bare.json", "--out", "s.json"]) == 1
    assert main(["diffract", "--in", "bare.json", "--candidates", "grid:0.5",
                 "--freq-lo", "-1", "--freq-hi", "1", "--out", "s.json"]) == 0


def test_exit_codes(work):
    assert main(["generate", "--preset", "zd", "--size", "10", "--bogus"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["diffract", "--in", "missing.json"]) == 3
    assert main(["generate", "--preset", "zd", "--size", "10", "--out", "no/such/dir.json"]) == 3
    (work / "junk.json").write_text("{not json")
    assert main(["diffract", "--in", "junk.json"]) == 3
    assert main(["generate", "--preset", "zd", "--size", "1"]) == 1


def test_config_defaults_and_override(work):
    (work / "cfg.json").write_text(json.dumps({"preset": "zd", "size": 7}))
    assert main(["--config", "cfg.json", "generate", "--out", "a.json"]) == 0
    assert len(_load("a.json")["points"]) == 7
    assert main(["--config", "cfg.json", "generate", "--size", "9", "--out", "b.json"]) == 0
    assert len(_load("b.json")["points"]) == 9
    (work / "bad.json").write_text(json.dumps({"colour": "red"}))
    assert main(["--config", "bad.json", "generate", "--preset", "zd", "--size", "3"]) == 2
    assert main(["--config", "absent.json", "generate", "--preset", "zd", "--size", "3"]) == 3


def test_verify_lattice_suite_exit_code(work):
    (work / "p.json").write_text(json.dumps({"lattice_size": 60}))
    assert main(["verify", "--suite", "lattice", "--params", "p.json", "--out", "v.json"]) == 0
    doc = _load("v.json")
    assert doc["failures"] == 0 and len(doc["reports"]) == 4


def test_console_entry_point(work):
    out = subprocess.run([sys.executable, "-m", "meyerlab.cli", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.startswith("meyerlab ")


def test_documented_example_peaks_contain_origin(work):
    assert main(["generate", "--preset", "fibonacci", "--size", "10000", "--out", "fib.json"]) == 0
    assert len(_load("fib.json")["points"]) == 10_000
    assert main(["diffract", "--in", "fib.json", "--out", "spec.json"]) == 0
    assert main(["peaks", "--spectrum", "spec.json", "--a", "0.26", "--out", "p.json"]) == 0
    assert [0.0] in [p["chi"] for p in _load("p.json")["peaks"]]
