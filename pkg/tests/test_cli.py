import json

import pytest

from kahlervar.cli import main
from kahlervar.config import ConfigError, parse_config

from conftest import CONFIGS


def _write(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.mark.parametrize("doc", [
    {"n": 3},
    {"n": 1, "resolution": 12},
    {"n": 1, "phi": [{"mode": [1, 0], "amp": 0.5}]},
    {"n": 1, "resolution": 16, "phi": [{"mode": [9, 0], "amp": 0.01}]},
    {"n": 1, "bogus": 1},
    {"n": 1, "variations": [{"kind": "sideways"}]},
    {"n": 1, "flow": {"sign": 0}},
    {"n": 1, "tolerances": {"identities": -1}},
])
def test_schema_errors(doc, tmp_path):
    with pytest.raises(ConfigError):
        parse_config(doc)
    assert main(["identities", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2


def test_missing_and_malformed_config(tmp_path):
    assert main(["identities", "--config", str(tmp_path / "none.json")]) == 2
    (tmp_path / "bad.json").write_text("{")
    assert main(["identities", "--config", str(tmp_path / "bad.json")]) == 2


def test_shipped_configs_parse():
    for p in CONFIGS.glob("*.json"):
        parse_config(json.loads(p.read_text()))


def test_identities_flat(tmp_path):
    out = tmp_path / "o"
    assert main(["identities", "--config", str(CONFIGS / "identities_flat.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failed"] == [] and summary["total"] >= 20
    assert (out / "identities.csv").read_text().startswith("identity_id,anchor,")


def test_tolerance_scale_can_fail_a_passing_run(tmp_path):
    args = ["identities", "--config", str(CONFIGS / "identities_flat.json"), "--out", str(tmp_path)]
    assert main(args + ["--tolerance-scale", "1e-12"]) == 1
    assert main(args + ["--tolerance-scale", "-1"]) == 2


def test_flow_homothety_and_abort(tmp_path):
    assert main(["flow", "--config", str(CONFIGS / "flow_homothety.json"), "--out", str(tmp_path / "h")]) == 0
    assert (tmp_path / "h" / "trajectory" / "manifest.json").exists()
    code = main(["flow", "--config", str(CONFIGS / "flow_oversized_step.json"), "--out", str(tmp_path / "x")])
    assert code == 3
    assert json.loads((tmp_path / "x" / "abort.json").read_text())["command"] == "flow"
    assert (tmp_path / "x" / "trajectory" / "manifest.json").exists()


def test_projected_source_rows(tmp_path):
    doc = {"n": 1, "resolution": 16, "phi": [{"mode": [1, 0], "amp": 0.02}],
           "variations": [{"name": "proj", "kind": "projected", "amp": 0.02, "max_mode": 1}]}
    code = main(["variations", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")])
    rows = (tmp_path / "o" / "variations.csv").read_text().splitlines()
    assert code == 0 and rows[0].endswith("order,runtime") and len(rows) > 5
