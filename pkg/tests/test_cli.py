import csv
import json
from collections import Counter

import jsonschema
import numpy as np
import pytest

from frcalib.cli import main
from frcalib.curate import write_image

NUM = {"type": "number"}
RESULT_SCHEMA = {
    "type": "object",
    "required": ["format_version", "measure", "params", "objective", "cues", "assignments", "label_counts",
                 "degenerate", "wall_time", "grid_best", "refinement"],
    "properties": {
        "format_version": {"const": "1.0"},
        "measure": {"enum": list("abcde")},
        "params": {
            "type": "object",
            "required": ["pan", "roll", "tilt", "hfov", "focal_px", "width", "height"],
            "properties": {k: NUM for k in ("pan", "roll", "tilt", "hfov", "focal_px")},
        },
        "objective": NUM,
        "cues": {"type": "object", "required": ["min_segments", "grid_entropy", "mean_loglik"]},
        "assignments": {"type": "array",
                        "items": {"enum": ["vertical", "horizontal1", "horizontal2", "background"]}},
        "degenerate": {"type": "boolean"},
        "wall_time": NUM,
        "refinement": {"type": "array", "items": {"type": "object", "required": ["seed", "objective",
                                                                                 "iterations"]}},
    },
}


def run(*argv):
    return main([str(a) for a in argv])


def synth(tmp_path, name="scene", seed=0, params="10,3,-8,80", counts="30,30,30,5", noise=0.0):
    path = tmp_path / f"{name}.json"
    assert run("synth", f"--params={params}", "--counts", counts, "--noise", noise, "--seed", seed,
               "--out", path) == 0
    return path


def test_synth_calibrate_round_trip(tmp_path):
    seg_path = synth(tmp_path)
    out = tmp_path / "result.json"
    assert run("calibrate", "--segments", seg_path, "--out", out) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, RESULT_SCHEMA)
    assert len(doc["assignments"]) == 95
    p = doc["params"]
    assert abs(p["roll"] - 3) < 0.2 and abs(p["tilt"] + 8) < 0.2
    assert doc["ground_truth"]["hfov"] == 80


def test_calibrate_detector_csv(tmp_path):
    seg_doc = json.loads(synth(tmp_path).read_text())
    csv_path = tmp_path / "lines.txt"
    csv_path.write_text("\n".join(f"{s['x1']} {s['y1']} {s['x2']} {s['y2']} 1.0 0.5" for s in seg_doc["segments"]))
    out = tmp_path / "r.json"
    assert run("calibrate", "--segments", csv_path, "--width", 640, "--height", 480, "--out", out,
               "--fast") == 0
    assert abs(json.loads(out.read_text())["params"]["roll"] - 3) < 1.0


def test_calibrate_errors(tmp_path, capsys):
    assert run("calibrate", "--segments", tmp_path / "missing.json") == 1
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format_version": "3.0", "segments": []}))
    assert run("calibrate", "--segments", bad, "--width", 640, "--height", 480) == 1
    empty = tmp_path / "empty.json"
    empty.write_text("[]")
    assert run("calibrate", "--segments", empty, "--width", 640, "--height", 480) == 1
    nosize = tmp_path / "nosize.json"
    nosize.write_text(json.dumps([{"x1": 0, "y1": 0, "x2": 10, "y2": 10}]))
    assert run("calibrate", "--segments", nosize) == 1


def test_degenerate_scene_exit_code(tmp_path):
    seg_path = synth(tmp_path, counts="20,20,0,0")
    assert run("calibrate", "--segments", seg_path, "--out", tmp_path / "r.json", "--fast") == 2


def test_fast_flag_is_faster(tmp_path):
    seg_path = synth(tmp_path, noise=0.5)
    times = {}
    for flag in ("", "--fast"):
        out = tmp_path / f"r{flag}.json"
        assert run("calibrate", "--segments", seg_path, "--out", out, *([flag] if flag else [])) == 0
        doc = json.loads(out.read_text())
        times[flag] = doc["wall_time"]
        assert all(r["iterations"] <= 10 for r in doc["refinement"]) or not flag
    assert times["--fast"] <= 0.5 * times[""]


def test_config_file_and_measure(tmp_path):
    seg_path = synth(tmp_path, noise=0.5)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"format_version": "1.0", "measure": "c"}))
    out = tmp_path / "r.json"
    assert run("calibrate", "--segments", seg_path, "--config", cfg, "--out", out, "--fast") == 0
    assert json.loads(out.read_text())["measure"] == "c"
    assert run("calibrate", "--segments", seg_path, "--config", cfg, "--measure", "e", "--out", out,
               "--fast") == 0
    assert json.loads(out.read_text())["measure"] == "e"


def test_synth_is_deterministic(tmp_path):
    a = synth(tmp_path, "a", seed=3, noise=1.0).read_text()
    b = synth(tmp_path, "b", seed=3, noise=1.0).read_text()
    assert a == b
    assert run("synth", "--counts", "1,2", "--out", tmp_path / "x.json") == 1


def test_curate_command(tmp_path):
    pano_dir = tmp_path / "panos"
    rng = np.random.default_rng(1)
    for name in ("p1", "p2"):
        write_image(pano_dir / f"{name}.png", rng.integers(0, 256, (50, 100, 3)))
    out = tmp_path / "views"
    assert run("curate", "--pano-dir", pano_dir, "--out-dir", out, "--seed", 7, "--width", 32,
               "--height", 24) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["samples"]) == 30
    for pano in ("p1", "p2"):
        fovs = Counter(s["hfov"] for s in manifest["samples"] if s["panorama"] == pano)
        assert fovs == {60.0: 3, 75.0: 3, 90.0: 3, 105.0: 3, 120.0: 3}
    assert len(list((out / "images").glob("*.png"))) == 30
    out2 = tmp_path / "views2"
    assert run("curate", "--pano-dir", pano_dir, "--out-dir", out2, "--seed", 7, "--width", 32,
               "--height", 24, "--no-split") == 0
    assert json.loads((out2 / "manifest.json").read_text())["samples"] == manifest["samples"]
    assert not (out2 / "split.json").exists()
    assert run("curate", "--pano-dir", tmp_path / "nothing", "--out-dir", out2) == 1


def write_training(path, rows):
    cols = ["min_segments", "grid_entropy", "mean_loglik", "roll", "tilt", "focal"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows(rows)


def test_reliability_constant_targets(tmp_path):
    rng = np.random.default_rng(0)
    train = tmp_path / "train.csv"
    write_training(train, [[int(rng.integers(5, 30)), rng.uniform(0, 8), rng.uniform(-5, 0), 1.0, 2.0, 3.0]
                           for _ in range(20)])
    model = tmp_path / "model.json"
    assert run("reliability", "fit", "--training", train, "--out", model) == 0
    result = tmp_path / "r.json"
    assert run("calibrate", "--segments", synth(tmp_path, noise=1.0), "--out", result, "--fast") == 0
    assert run("reliability", "predict", "--model", model, "--results", result) == 0
    assert json.loads(result.read_text())["predicted_errors"] == {"roll": 1.0, "tilt": 2.0, "focal": 3.0}


def test_reliability_fit_errors(tmp_path):
    train = tmp_path / "few.csv"
    write_training(train, [[10, 1.0, -1.0, 1, 1, 1]] * 5)
    assert run("reliability", "fit", "--training", train, "--out", tmp_path / "m.json") == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert run("reliability", "fit", "--training", bad, "--out", tmp_path / "m.json") == 1


def test_evaluate_perfect_estimates(tmp_path):
    res_dir = tmp_path / "results"
    res_dir.mkdir()
    truth = {"pan": 5.0, "roll": 2.0, "tilt": -3.0, "hfov": 70.0, "width": 640, "height": 480}
    for i in range(3):
        (res_dir / f"s{i}.result.json").write_text(json.dumps(
            {"format_version": "1.0", "params": truth, "ground_truth": truth}))
    out = tmp_path / "eval"
    assert run("evaluate", "--results", res_dir, "--out-dir", out, "--histograms") == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["metric"] for r in rows} == {"roll", "tilt", "pan", "focal", "fov", "frame"}
    assert all(abs(float(r["mean"])) < 1e-5 for r in rows)
    assert (out / "hist_roll_estimated.csv").exists()
    # gating without predictions is an error
    assert run("evaluate", "--results", res_dir, "--out-dir", out, "--gated") == 1


def test_evaluate_with_separate_truth(tmp_path):
    res = tmp_path / "img7.result.json"
    res.write_text(json.dumps({"format_version": "1.0",
                               "params": {"roll": 1.0, "tilt": 0.0, "focal_px": 352.0}}))
    truth = tmp_path / "truth.json"
    truth.write_text(json.dumps({"items": {"img7": {"roll": 0.0, "tilt": 0.0, "focal_px": 320.0}}}))
    out = tmp_path / "eval"
    assert run("evaluate", "--results", res, "--truth", truth, "--out-dir", out, "--no-pan") == 0
    with open(out / "errors.csv") as fh:
        [row] = list(csv.DictReader(fh))
    assert float(row["roll"]) == pytest.approx(1.0)
    assert float(row["focal"]) == pytest.approx(10.0)
    assert row["pan"] == ""


@pytest.mark.slow
def test_full_pipeline(tmp_path):
    rng = np.random.default_rng(42)
    noises = (0.0, 1.0, 3.0)
    for split in ("train", "test"):
        for i in range(24):
            counts = ",".join(str(c) for c in [*rng.integers(5, 31, 3), rng.integers(0, 10)])
            params = ",".join(f"{v:.3f}" for v in (rng.uniform(-45, 45), rng.uniform(-15, 15),
                                                   rng.uniform(-35, 35), rng.uniform(50, 130)))
            (tmp_path / split).mkdir(exist_ok=True)
            synth(tmp_path / split, f"s{i:02d}", seed=1000 * (split == "test") + i, params=params,
                  counts=counts, noise=noises[i % 3])
        files = sorted((tmp_path / split).glob("s*.json"))
        code = run("calibrate", "--segments", *files, "--out-dir", tmp_path / f"{split}_res")
        assert code in (0, 2)
        assert run("evaluate", "--results", tmp_path / f"{split}_res", "--out-dir", tmp_path / f"{split}_eval") == 0
    assert run("reliability", "fit", "--training", tmp_path / "train_eval" / "errors.csv",
               "--out", tmp_path / "model.json") == 0
    assert run("reliability", "predict", "--model", tmp_path / "model.json",
               "--results", *sorted((tmp_path / "test_res").glob("*.json"))) == 0
    assert run("evaluate", "--results", tmp_path / "test_res", "--out-dir", tmp_path / "gated", "--gated") == 0
    with open(tmp_path / "gated" / "gated.csv") as fh:
        table = list(csv.DictReader(fh))
    assert [int(r["n"]) for r in table] == [6, 12, 18, 24]
    with open(tmp_path / "gated" / "summary.csv") as fh:
        summary = {r["metric"]: float(r["mean"]) for r in csv.DictReader(fh)}
    assert float(table[-1]["focal"]) == pytest.approx(summary["focal"], rel=1e-12)
