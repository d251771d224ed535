import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardyscope.cli import main, run_config
from hardyscope.config import config_hash, validate_config
from hardyscope.errors import ConfigError
from hardyscope.plotting import emit_plotdata
from hardyscope.report import csv_text, dumps, to_jsonable

MINIMAL = {
    "name": "minimal",
    "seed": 0,
    "model": {"kind": "circle", "n": 32},
    "profiles": {"eta": {"kind": "bump-deriv", "N": 2}},
    "probes": [{"type": "band", "id": "band",
                "params": {"pairs": {"kind": "arcs", "length": 4, "gaps": [4, 10], "whole": True},
                           "times": [3.0, 4.0, 6.0]}}],
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return p


def test_minimal_band_run(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", str(_write(tmp_path, MINIMAL)), "--out", str(out), "--quiet"])
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["band.csv", "report.json"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] is True
    assert rep["configHash"] == config_hash(MINIMAL)
    with open(out / "band.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["form", "t", "s", "rho", "lhs", "bound", "margin", "pass"]
    # 3 times x (2 arc pairs + whole space)
    assert len(rows) == 1 + 9
    assert all(r[-1] == "true" for r in rows[1:])


def test_sector_z_is_config_error(tmp_path, capsys):
    cfg = {"name": "bad", "model": {"kind": "circle", "n": 32},
           "probes": [{"type": "resolvent", "id": "r", "params": {"pairs": {"gaps": [4]}, "zs": [[1.0, 0.1]]}}]}
    assert main(["run", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "/probes/0/params/zs/0" in err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("mutate,pointer", [
    (lambda c: c["model"].update(n="a"), "/model/n"),
    (lambda c: c["probes"].append(dict(c["probes"][0])), "/probes/1/id"),
    (lambda c: c["probes"][0].update(type="nope"), "/probes/0/type"),
    (lambda c: c.update(extra=1), "/"),
    (lambda c: c["profiles"].update(p={"kind": "partner", "of": "missing"}), "/profiles/p/of"),
    (lambda c: c["probes"][0]["params"].update(etaProfile="missing"), "/probes/0/params/etaProfile"),
])
def test_validation_pointers(mutate, pointer):
    cfg = json.loads(json.dumps(MINIMAL))
    mutate(cfg)
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    assert exc.value.pointer == pointer


def test_validate_command(tmp_path, capsys):
    assert main(["validate", str(_write(tmp_path, MINIMAL))]) == 0
    assert "valid" in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_failing_probe_exit_one(tmp_path, capsys):
    # a band probe with a speed below the true one must report violations
    cfg = json.loads(json.dumps(MINIMAL))
    cfg["probes"][0]["params"]["cD"] = 0.2
    code = main(["run", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 1
    assert "FAIL band" in capsys.readouterr().err


def test_byte_identical_outputs(tmp_path):
    cfg = _write(tmp_path, MINIMAL)
    for d in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / d), "--quiet", "--workers", "2"]) == 0
    for name in ("report.json", "band.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_count_does_not_change_report():
    cfg = json.loads(json.dumps(MINIMAL))
    cfg["probes"].append({"type": "propagation", "id": "prop", "params": {}})
    a, _ = run_config(cfg, workers=1)
    b, _ = run_config(cfg, workers=3)
    assert dumps(a) == dumps(b)


def test_out_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("HARDYSCOPE_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(_write(tmp_path, MINIMAL)), "--quiet"]) == 0
    assert (tmp_path / "env" / "minimal" / "report.json").exists()


def test_plotdata(tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(_write(tmp_path, MINIMAL)), "--out", str(out), "--quiet"])
    assert main(["plotdata", str(out / "report.json")]) == 0
    files = sorted(p.name for p in (out / "plotdata").iterdir())
    assert "band.png" in files
    assert any(f.startswith("band__lhs") and f.endswith(".csv") for f in files)
    assert any(f.startswith("band__bound") for f in files)


def test_plotdata_empty_report(tmp_path):
    rep = tmp_path / "report.json"
    rep.write_text(json.dumps({"probes": []}))
    assert main(["plotdata", str(rep), "--out", str(tmp_path / "plots")]) == 0
    assert not (tmp_path / "plots").exists()
    assert emit_plotdata({"probes": [{"id": "x", "type": "band", "series": {}}]}, tmp_path / "p2") == []


def test_plotdata_unreadable(tmp_path):
    assert main(["plotdata", str(tmp_path / "none.json")]) == 2


def test_jsonable_special_values():
    data = {"a": np.float64("nan"), "b": np.inf, "c": -np.inf, "d": 1 + 2j, "e": np.arange(2),
            "f": np.bool_(True), 3: (np.int64(4),)}
    out = to_jsonable(data)
    assert out == {"a": "nan", "b": "inf", "c": "-inf", "d": [1.0, 2.0], "e": [0, 1], "f": True, "3": [4]}
    text = dumps({"z": 1, "a": 2})
    assert text.index('"a"') < text.index('"z"')


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_csv_floats_roundtrip(xs):
    text = csv_text(["x"], [[x] for x in xs])
    assert text.endswith("\r\n")
    back = [float(r[0]) for r in list(csv.reader(text.splitlines()))[1:]]
    assert back == xs


def test_csv_cells():
    text = csv_text(["a", "b", "c", "d"], [[True, None, 3, "x,y"]])
    assert text == 'a,b,c,d\r\ntrue,,3,"x,y"\r\n'


def test_config_hash_ignores_key_order():
    a = {"name": "x", "model": {"kind": "circle", "n": 8}, "probes": []}
    b = {"probes": [], "model": {"n": 8, "kind": "circle"}, "name": "x"}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "seed": 1})


def test_shipped_criteria_validate():
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1] / "criteria"
    files = sorted(root.glob("*.json"))
    assert len(files) == 13
    names = []
    for f in files:
        cfg = json.loads(f.read_text())
        validate_config(cfg)
        names.append(cfg["name"])
    assert names == [f.stem for f in files]
