import csv
import json
import math

import numpy as np
import pytest

from isoscope.cli import main


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_meanwidth_example(capsys):
    code, out, _ = run(capsys, ["estimate", "meanwidth", "--body", '{"type":"ball","n":8,"r":1}', "--dirs", "10000",
                                "--seed", "7"])
    d = json.loads(out)
    assert code == 0 and d["value"] == pytest.approx(1.0) and d["stderr"] == 0.0
    assert d["seed"] == 7 and d["config"]["dirs"] == 10000


def test_section_radius_example(capsys):
    code, out, _ = run(capsys, ["radius", "section", "--body", '{"type":"cube","n":8}', "--subspace", "axes:3",
                                "--seed", "1"])
    assert code == 0 and json.loads(out)["value"] == pytest.approx(math.sqrt(3) / 2, rel=1e-4)


def test_other_radii(capsys, tmp_path):
    frame = tmp_path / "frame.json"
    frame.write_text(json.dumps({"frame": [[1, 0], [0, 1], [0, 0]]}))
    code, out, _ = run(capsys, ["radius", "projection", "--body", '{"type":"cube","n":3}', "--subspace", str(frame),
                                "--seed", "2"])
    assert code == 0 and json.loads(out)["value"] == pytest.approx(math.sqrt(2) / 2, rel=1e-6)
    code, out, _ = run(capsys, ["radius", "gelfand", "--body", '{"type":"ball","n":5,"r":2}', "--t", "2", "--seed", "3"])
    assert json.loads(out)["value"] == pytest.approx(2.0)
    code, out, _ = run(capsys, ["radius", "rotation", "--body", '{"type":"cube","n":2}', "--rotation",
                                "[[0.7071067811865476,-0.7071067811865476],[0.7071067811865476,0.7071067811865476]]",
                                "--seed", "4"])
    assert json.loads(out)["value"] == pytest.approx(0.5 / math.cos(math.pi / 8), rel=1e-4)


def test_empirical_centroid_radius(capsys):
    body = json.dumps({"type": "centroid", "q": 4, "samples": 1000, "seed": 1,
                       "measure": {"type": "isotropic", "body": {"type": "cube", "n": 4}}})
    code, out, _ = run(capsys, ["radius", "section", "--body", body, "--dim", "2", "--seed", "5", "--starts", "2",
                                "--coarse", "32"])
    assert code == 0 and json.loads(out)["value"] > 1.0


def test_isotropy(capsys):
    code, out, _ = run(capsys, ["isotropy", "--body", '{"type":"cube","n":6}', "--samples", "50000", "--seed", "3"])
    d = json.loads(out)
    assert code == 0 and d["L"] == pytest.approx(1 / math.sqrt(12), rel=0.02)
    assert np.asarray(d["transform"]).shape == (6, 6)


def test_estimates(capsys):
    g = '{"type":"gaussian","n":6}'
    code, out, _ = run(capsys, ["estimate", "centroid", "--measure", g, "--q", "4", "--method", "exact", "--seed", "1"])
    assert json.loads(out)["value"] == pytest.approx(3**0.25)
    code, out, _ = run(capsys, ["estimate", "psi", "--measure", g, "--dir", "[1,0,0,0,0,0]", "--samples", "20000",
                                "--seed", "1"])
    assert json.loads(out)["value"] == pytest.approx(math.sqrt(8 / 3), rel=0.05)
    code, out, _ = run(capsys, ["estimate", "moment", "--body", '{"type":"cube","n":12}', "--q", "2", "--seed", "1"])
    assert json.loads(out)["value"] == pytest.approx(1.0, rel=0.01)
    code, out, _ = run(capsys, ["estimate", "vrad", "--body", '{"type":"cube","n":4}', "--subspace", "axes:2",
                                "--dirs", "100000", "--seed", "1"])
    assert json.loads(out)["value"] == pytest.approx(1 / math.sqrt(math.pi), rel=0.03)
    code, out, _ = run(capsys, ["estimate", "psi2", "--measure", g, "--method", "exact", "--seed", "1"])
    assert 0.65 <= json.loads(out)["value"] <= 0.75
    code, out, _ = run(capsys, ["estimate", "centroid_meanwidth", "--measure", g, "--q", "2", "--dirs", "4",
                                "--samples", "5000", "--seed", "1"])
    assert json.loads(out)["value"] == pytest.approx(1.0, rel=0.05)


def test_seed_is_recorded_when_omitted(capsys):
    code, out, _ = run(capsys, ["estimate", "meanwidth", "--body", '{"type":"cube","n":3}', "--dirs", "100"])
    d = json.loads(out)
    assert code == 0 and isinstance(d["seed"], int)
    code, out2, _ = run(capsys, ["estimate", "meanwidth", "--body", '{"type":"cube","n":3}', "--dirs", "100",
                                 "--seed", str(d["seed"])])
    assert json.loads(out2)["value"] == d["value"]


@pytest.mark.parametrize("argv, key", [
    (["radius", "section", "--body", '{"type":"cube","n":8'], "--body"),
    (["radius", "section", "--body", '{"type":"blob","n":8}'], "body.type"),
    (["radius", "section", "--body", '{"type":"cube"}'], "body.n"),
    (["radius", "section", "--body", '{"type":"cube","n":4}', "--subspace", "axes:9"], "--subspace"),
    (["radius", "gelfand", "--body", '{"type":"cube","n":4}'], "--t"),
    (["estimate", "centroid", "--q", "2"], "--measure"),
    (["experiment", "run", "thm12_section", "--config", '{"dims":[8]}'], "grid"),
    (["experiment", "run", "nope", "--config", '{"dims":[8],"grid":[2]}'], "name"),
])
def test_configuration_errors_exit_2(capsys, argv, key):
    code, _, err = run(capsys, argv + ["--seed", "1"])
    assert code == 2
    assert f"configuration error: {key}:" in err


def test_experiment_run_writes_csv(capsys, tmp_path):
    out_path = tmp_path / "z.csv"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dims": [6], "grid": [2, 4], "trials": 1, "samples": 1000, "seed": 4,
                               "measure": {"type": "isotropic", "body": {"type": "cube"}},
                               "params": {"zq_samples": 1000, "method": "mc"}, "output": str(out_path)}))
    code, out, _ = run(capsys, ["experiment", "run", "thm13_zq_section", "--config", str(cfg)])
    assert code == 0 and json.loads(out)["rows"] == 2
    rows = list(csv.reader(open(out_path)))
    assert rows[0] == ["experiment", "n", "k_or_q", "trial", "seed", "estimate", "stderr", "reference_scale", "ratio",
                       "wall_ms"]
    assert len(rows) == 3
    meta = json.load(open(str(out_path) + ".json"))
    assert meta["spec"]["name"] == "thm13_zq_section"


def test_experiment_output_is_byte_identical(capsys, tmp_path, monkeypatch):
    cfg = json.dumps({"dims": [8], "grid": [0.5], "trials": 3, "seed": 11, "body": {"type": "cube"}})
    texts = []
    for threads in ("1", "4"):
        monkeypatch.setenv("ISOSCOPE_THREADS", threads)
        code, out, _ = run(capsys, ["experiment", "run", "thm12_section", "--config", cfg, "--no-timing"])
        assert code == 0
        texts.append(out)
    assert texts[0] == texts[1]


def test_experiment_list(capsys):
    code, out, _ = run(capsys, ["experiment", "list"])
    assert code == 0 and "thm12_section" in out.split() and len(out.split()) == 17
