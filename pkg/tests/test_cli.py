import json

import pytest
import yaml

from cbnkit.cli import main

ESTIMANDS = [
    {"name": "parking", "treatment": "V7", "outcome": "Y", "control": "On-street", "treated": "Off-street",
     "outcome_state": "Already own electric car/van"},
    {"name": "income", "treatment": "V1", "outcome": "Y", "adjustment": ["V5"], "control": "< £6000",
     "treated": "> £40,000", "bands": {"low_bands": 6}},
]


def _config(tmp_path, **over):
    cfg = {"seed": 3, "paths": {"data": "sim.csv", "graph": "fig3", "output": "out"},
           "simulate": {"n": 3000}, "blacklist": [["Y", "V1"], ["Y", "V7"]],
           "estimands": ESTIMANDS, "refutation": {"iterations": 20}}
    for k, v in over.items():
        cfg[k] = v
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg, allow_unicode=True))
    return str(path)


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = _config(tmp)
    for cmd in ("simulate", "discover", "identify", "estimate", "refute", "report"):
        assert main([cmd, "-c", cfg]) == 0, cmd
    return tmp, cfg


def test_pipeline_outputs(run):
    tmp, _ = run
    out = tmp / "out"
    for name in ("mag.graph", "discovery_log.jsonl", "identify.json", "estimate.json", "effect_parking.csv",
                 "bands_income.csv", "refute.json", "report.md"):
        assert (out / name).exists(), name
    ident = json.loads((out / "identify.json").read_text())
    assert ident["estimands"][0]["adjustment"] == ["V8", "V9"]
    assert ident["estimands"][0]["n_backdoor_paths"] == 24
    ref = json.loads((out / "refute.json").read_text())
    assert set(ref["estimands"][0]["tests"]) == {"placebo", "subsample"}
    assert len(ref["estimands"][0]["tests"]["placebo"]["null_samples_pp"]) == 20


def test_provenance_everywhere(run):
    tmp, _ = run
    out = tmp / "out"
    sha = json.loads((out / "estimate.json").read_text())["provenance"]["config_sha256"]
    assert len(sha) == 64
    for name in ("identify.json", "refute.json"):
        assert json.loads((out / name).read_text())["provenance"] == {"config_sha256": sha, "seed": 3}
    for name in ("effect_parking.csv", "bands_income.csv", "mag.graph"):
        assert sha in (out / name).read_text().splitlines()[0]
    assert sha in (tmp / "sim.csv").read_text().splitlines()[0]
    assert json.loads((out / "discovery_log.jsonl").read_text().splitlines()[0])["provenance"]["seed"] == 3


def test_estimate_is_idempotent(run):
    tmp, cfg = run
    first = (tmp / "out" / "estimate.json").read_text()
    assert main(["estimate", "-c", cfg]) == 0
    assert (tmp / "out" / "estimate.json").read_text() == first


def test_flags_override_config_and_change_hash(run, tmp_path):
    tmp, cfg = run
    assert main(["identify", "-c", cfg, "--output", str(tmp_path / "o2"), "--seed", "9"]) == 0
    a = json.loads((tmp / "out" / "identify.json").read_text())["provenance"]
    b = json.loads((tmp_path / "o2" / "identify.json").read_text())["provenance"]
    assert b["seed"] == 9 and a["config_sha256"] != b["config_sha256"]


def test_identification_failure_exit_code(tmp_path):
    bad = [{"name": "p", "treatment": "V7", "outcome": "Y", "adjustment": ["V1"]}]
    cfg = _config(tmp_path, estimands=bad)
    assert main(["identify", "-c", cfg]) == 4
    rec = json.loads((tmp_path / "out" / "identify.json").read_text())["estimands"][0]
    assert rec["status"] == "rejected" and rec["witness"] == "V7 <- V8 <- U2 -> Y"


def test_config_errors_exit_2(tmp_path):
    assert main(["identify", "-c", str(tmp_path / "missing.yaml")]) == 2
    (tmp_path / "bad.yaml").write_text("seed: [unclosed\n")
    assert main(["identify", "-c", str(tmp_path / "bad.yaml")]) == 2
    cfg = _config(tmp_path, estimands=[{"name": "x", "treatment": "V7"}])
    assert main(["identify", "-c", cfg]) == 2
    cfg = _config(tmp_path, blacklist=[["Y", "NOPE"]])
    assert main(["estimate", "-c", cfg]) == 2


def test_data_error_exit_3(tmp_path):
    (tmp_path / "sim.csv").write_text("V7,Y\nNowhere,Thinking to buy one soon\n")
    assert main(["discover", "-c", _config(tmp_path)]) == 3


def test_numerical_error_exit_5(tmp_path):
    rows = ["V7,Y,V8,V9", "Off-street,Not considering to buy one,Detached house,< 1919",
            "On-street,Not considering to buy one,Detached house,< 1919"]
    (tmp_path / "sim.csv").write_text("\n".join(rows) + "\n")
    cfg = _config(tmp_path, alpha=0.0, estimands=ESTIMANDS[:1])
    assert main(["estimate", "-c", cfg]) == 5
