"""Command-line interface: ``frcalib {calibrate,synth,curate,reliability,evaluate}``.

Exit codes: 0 success, 1 error, 2 success with a degenerate-scene warning.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import curate as curate_mod
from . import evaluation
from .deviation import Measure
from .geometry import CameraParams
from .io import FormatError, check_version, read_json, read_segments, segments_to_json, write_json
from .likelihood import MixtureConfig, with_measure
from .reliability import CUE_NAMES, TARGET_NAMES, ReliabilityCues, ReliabilityModel, fit_model
from .search import RESULT_FORMAT_VERSION, SearchConfig, calibrate
from .synth import SynthConfig, generate

log = logging.getLogger("frcalib")

EXIT_OK, EXIT_ERROR, EXIT_DEGENERATE = 0, 1, 2


class CLIError(Exception):
    pass


def _floats(text, n=None, what="values"):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise CLIError(f"cannot parse {what}: {text!r}")
    if n is not None and len(vals) != n:
        raise CLIError(f"expected {n} {what}, got {len(vals)}")
    return vals


def truth_to_params(gt):
    width, height = int(gt.get("width", 640)), int(gt.get("height", 480))
    if gt.get("hfov") is not None:
        return CameraParams.from_values(gt.get("pan", 0.0), gt["roll"], gt["tilt"], hfov=gt["hfov"],
                                        width=width, height=height)
    return CameraParams.from_values(gt.get("pan", 0.0), gt["roll"], gt["tilt"], focal_px=gt["focal_px"],
                                    width=width, height=height)


def params_to_dict(p):
    return {"pan": p.angles.pan, "roll": p.angles.roll, "tilt": p.angles.tilt, "hfov": p.hfov,
            "focal_px": p.focal_px, "width": p.intrinsics.width, "height": p.intrinsics.height}


# -- calibrate ------------------------------------------------------------------


def _calibrate_one(path, width, height, measure, fast, config_path):
    segs, doc = read_segments(path)
    width = width or doc.get("width")
    height = height or doc.get("height")
    if not width or not height:
        raise CLIError(f"{path}: image size unknown; pass --width and --height")
    if width <= 0 or height <= 0:
        raise CLIError("image dimensions must be positive")
    if len(segs) == 0:
        raise CLIError(f"{path}: no segments")
    config = MixtureConfig.from_dict(read_json(config_path)) if config_path else MixtureConfig()
    if measure is not None and Measure(measure) is not config.measure:
        config = with_measure(config, measure)
    search = SearchConfig.fast() if fast else SearchConfig()
    result = calibrate(segs, int(width), int(height), config=config, search=search)
    out = result.to_dict()
    out["source"] = str(path)
    if "ground_truth" in doc:
        out["ground_truth"] = doc["ground_truth"]
    return out


def cmd_calibrate(args):
    paths = args.segments
    if len(paths) > 1 and not args.out_dir:
        raise CLIError("several segment files need --out-dir")
    jobs = [(p, args.width, args.height, args.measure, args.fast, args.config) for p in paths]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_calibrate_one, *zip(*jobs)))
    else:
        results = [_calibrate_one(*j) for j in jobs]
    degenerate = False
    for path, res in zip(paths, results):
        if args.out_dir:
            write_json(Path(args.out_dir) / (Path(path).stem + ".result.json"), res)
        elif args.out:
            write_json(args.out, res)
        else:
            import json

            print(json.dumps(res, indent=2))
        if res["degenerate"]:
            log.warning("%s: degenerate scene, a Manhattan direction has no segments", path)
            degenerate = True
    return EXIT_DEGENERATE if degenerate else EXIT_OK


# -- synth -------------------------------------------------------------------------


def cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    if args.params:
        pan, roll, tilt, hfov = _floats(args.params, 4, "params (pan,roll,tilt,hfov)")
    else:
        search = SearchConfig()
        pan, roll, tilt, hfov = (rng.uniform(lo, hi) for lo, hi in zip(search.lower, search.upper))
    try:
        params = CameraParams.from_values(pan, roll, tilt, hfov=hfov, width=args.width, height=args.height)
        counts = tuple(int(c) for c in _floats(args.counts, 4, "counts"))
        scene = generate(SynthConfig(params, counts, args.noise, args.seed))
    except ValueError as exc:
        raise CLIError(str(exc))
    gt = params_to_dict(params)
    gt["labels"] = [lab.name.lower() for lab in scene.labels]
    gt["noise"] = args.noise
    gt["seed"] = args.seed
    write_json(args.out, segments_to_json(scene.segments, args.width, args.height, ground_truth=gt))
    return EXIT_OK


# -- curate ------------------------------------------------------------------------


def cmd_curate(args):
    fovs = _floats(args.fovs, what="FOVs") if args.fovs else curate_mod.DEFAULT_FOVS
    try:
        manifest = curate_mod.curate(args.pano_dir, args.out_dir, seed=args.seed, per_scene=args.per_scene,
                                     fovs=fovs, uniform_fov=args.uniform_fov, split=args.split,
                                     width=args.width, height=args.height, jobs=args.jobs)
    except (ValueError, OSError) as exc:
        raise CLIError(str(exc))
    if not manifest["samples"]:
        raise CLIError(f"no usable panoramas in {args.pano_dir}")
    print(f"wrote {len(manifest['samples'])} views of "
          f"{len(manifest['samples']) // args.per_scene} panoramas to {args.out_dir}")
    return EXIT_OK


# -- reliability -----------------------------------------------------------------


def read_training_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in (*CUE_NAMES, *TARGET_NAMES) if c not in (reader.fieldnames or [])]
        if missing:
            raise CLIError(f"{path}: missing columns {missing}")
        rows = list(reader)
    try:
        cues = np.array([[float(r[c]) for c in CUE_NAMES] for r in rows]).reshape(-1, 3)
        targets = np.array([[float(r[c]) for c in TARGET_NAMES] for r in rows]).reshape(-1, 3)
    except ValueError as exc:
        raise CLIError(f"{path}: {exc}")
    return cues, targets


def cmd_reliability_fit(args):
    cues, targets = read_training_csv(args.training)
    try:
        model = fit_model(cues, targets, seed=args.seed)
    except ValueError as exc:
        raise CLIError(str(exc))
    write_json(args.out, model.to_dict())
    print("K per target: " + ", ".join(f"{n}={k}" for n, k in zip(TARGET_NAMES, model.ks)))
    return EXIT_OK


def cmd_reliability_predict(args):
    model = ReliabilityModel.from_dict(read_json(args.model))
    for path in args.results:
        doc = read_json(path)
        check_version(doc, RESULT_FORMAT_VERSION, "result")
        if not doc.get("cues"):
            raise CLIError(f"{path}: result has no reliability cues")
        doc["predicted_errors"] = model.predict(ReliabilityCues.from_dict(doc["cues"]))
        target = Path(args.out_dir) / Path(path).name if args.out_dir else Path(path)
        write_json(target, doc)
    return EXIT_OK


# -- evaluate ------------------------------------------------------------------------


def _collect_results(paths):
    files = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return files


def cmd_evaluate(args):
    truth_doc = read_json(args.truth) if args.truth else None
    files = _collect_results(args.results)
    if not files:
        raise CLIError("no result files")
    records, rows, preds = [], [], {m: [] for m in evaluation.GATED_METRICS}
    est_rows = []
    for path in files:
        doc = read_json(path)
        check_version(doc, RESULT_FORMAT_VERSION, "result")
        gt = doc.get("ground_truth")
        if truth_doc is not None:
            gt = truth_doc.get("items", truth_doc).get(path.name.split(".")[0], gt)
        if gt is None:
            raise CLIError(f"{path}: no ground truth")
        try:
            truth = truth_to_params(gt)
            est = truth_to_params(doc["params"])
        except (KeyError, ValueError) as exc:
            raise CLIError(f"{path}: {exc}")
        has_pan = args.pan and gt.get("pan") is not None
        rec = evaluation.per_image_errors(est, truth, has_pan=has_pan)
        records.append(rec)
        row = {"id": path.name.split(".")[0], **{k: v for k, v in evaluation.records_to_rows([rec])[0].items()}}
        if doc.get("cues"):
            row.update(doc["cues"])
        rows.append(row)
        est_rows.append((params_to_dict(est), params_to_dict(truth)))
        for m in evaluation.GATED_METRICS:
            preds[m].append((doc.get("predicted_errors") or {}).get(m))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = ["id", *evaluation.METRICS, *CUE_NAMES] if all(r.get("min_segments") is not None for r in rows) \
        else ["id", *evaluation.METRICS]
    (out / "errors.csv").write_text(evaluation.to_csv(rows, columns))
    summary = evaluation.aggregate(records)
    (out / "summary.csv").write_text(evaluation.to_csv(summary, evaluation.AGGREGATE_COLUMNS))
    text = evaluation.format_table(summary, evaluation.AGGREGATE_COLUMNS)
    if args.gated:
        if any(v is None for vals in preds.values() for v in vals):
            raise CLIError("--gated needs predicted_errors in every result (run 'reliability predict')")
        gated = evaluation.gated_table(records, {m: np.array(v) for m, v in preds.items()})
        cols = ["fraction", "n", *evaluation.GATED_METRICS]
        (out / "gated.csv").write_text(evaluation.to_csv(gated, cols))
        text += "\n\n" + evaluation.format_table(gated, cols)
    if args.histograms:
        for name, (lo, hi, width) in {"roll": (-20, 20, 1), "tilt": (-40, 40, 2), "hfov": (40, 140, 2.5)}.items():
            for which, idx in (("estimated", 0), ("truth", 1)):
                edges, counts = evaluation.histogram([r[idx][name] for r in est_rows], lo, hi, width)
                (out / f"hist_{name}_{which}.csv").write_text(
                    evaluation.to_csv(evaluation.histogram_rows(edges, counts), ("bin_lo", "bin_hi", "count")))
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="frcalib", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="estimate focal length and rotation from segments")
    p.add_argument("--segments", required=True, nargs="+", help="segment JSON or detector CSV file(s)")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--measure", choices=[m.value for m in Measure], default=None,
                   help="deviation measure (default: from --config, else b)")
    p.add_argument("--fast", action="store_true", help="cap refinement at 10 iterations")
    p.add_argument("--config", help="mixture config JSON")
    p.add_argument("--out", help="result JSON (single input)")
    p.add_argument("--out-dir", help="directory for <stem>.result.json files")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="generate a synthetic Manhattan scene")
    p.add_argument("--params", help="pan,roll,tilt,hfov in degrees (default: uniform in search bounds)")
    p.add_argument("--counts", default="30,30,30,5", help="vertical,horizontal1,horizontal2,background")
    p.add_argument("--noise", type=float, default=0.0, help="endpoint noise sigma in pixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("curate", help="sample planar views from equirectangular panoramas")
    p.add_argument("--pano-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-scene", type=int, default=15)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fovs", help="comma-separated horizontal FOVs (default 60,75,90,105,120)")
    g.add_argument("--uniform-fov", action="store_true", help="draw FOV uniformly from [60, 120]")
    p.add_argument("--split", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("reliability", help="fit or apply the error predictor")
    rsub = p.add_subparsers(dest="reliability_command", required=True)
    q = rsub.add_parser("fit", help="fit on a CSV of cues and absolute errors")
    q.add_argument("--training", required=True, help=f"CSV with columns {', '.join((*CUE_NAMES, *TARGET_NAMES))}")
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int, default=0, help="cross-validation fold seed")
    q.set_defaults(func=cmd_reliability_fit)
    q = rsub.add_parser("predict", help="add predicted_errors to result JSON files")
    q.add_argument("--model", required=True)
    q.add_argument("--results", required=True, nargs="+")
    q.add_argument("--out-dir", help="write annotated copies here instead of in place")
    q.set_defaults(func=cmd_reliability_predict)

    p = sub.add_parser("evaluate", help="error tables from result files with ground truth")
    p.add_argument("--results", required=True, nargs="+", help="result JSON files or directories")
    p.add_argument("--truth", help="JSON {'items': {id: {pan, roll, tilt, hfov|focal_px, width, height}}}")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--gated", action="store_true", help="also write the reliability-gated table")
    p.add_argument("--histograms", action="store_true", help="write parameter histograms")
    p.add_argument("--pan", action=argparse.BooleanOptionalAction, default=True,
                   help="report pan and frame errors (needs ground-truth pan)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, FormatError, OSError, ValueError, KeyError) as exc:
        print(f"frcalib {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
