import argparse
import json
import logging
import sys
from functools import partial
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from seamtrace_core import (Config, Curve, SeamtraceError, SynthSpec, ced, evaluate, extract_contour,
                            gen_corpus, load_image, parabola_fit_study, parse_annotation, read_landmarks,
                            resolve_config, write_overlay)
from seamtrace_core.errors import ConfigError, MetricsError, SynthError
from seamtrace_core.metrics import DEFAULT_CED_THRESHOLDS, landmarks_to_curve, resolve_normalizer, sme
from seamtrace_core.pipeline import init_path_for, load_corpus, run_item
from seamtrace_core.utils import configure_logging, dumps_stable, parallel_map, resolve_jobs

logger = logging.getLogger("seamtrace")

CONFIG_FLAGS = {
    "squares": "square_count",
    "size_factor": "square_size_factor",
    "alpha": "alpha",
    "window": "window",
    "h": "h",
    "knn": "K",
    "score_variant": "score_variant",
    "alpha_weighting": "alpha_weighting",
    "distance_mode": "distance_mode",
    "normalizer": "normalizer",
}


def _config(args):
    overrides = {key: getattr(args, flag, None) for flag, key in CONFIG_FLAGS.items()}
    config = resolve_config(args.config, overrides)
    print(f"config: {json.dumps(config.provenance(), sort_keys=True)}", file=sys.stderr)
    return config


def _write_csv(df, path, config):
    with open(path, "w", newline="") as f:
        f.write(f"# config: {json.dumps(config.provenance(), sort_keys=True)}\n")
        df.to_csv(f, index=False, lineterminator="\n")


def _read_json(path, error=MetricsError):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise error(f"{path}: {e}") from e


def _read_points(path):
    """(kind, points, runtime_ms) from a contour/annotation JSON ("contour" key) or a landmark text file."""
    if Path(path).suffix == ".txt":
        return "landmarks", read_landmarks(path), None
    raw = _read_json(path)
    if not isinstance(raw, dict) or "contour" not in raw:
        raise MetricsError(f"{path}: no contour in file")
    return "contour", raw["contour"], raw.get("runtime_ms")


def cmd_extract(args):
    config = _config(args)
    img = load_image(args.image)
    ann = parse_annotation(args.annotation)
    init_path = args.init or init_path_for(args.annotation)
    init = read_landmarks(init_path) if init_path else None
    if init_path:
        logger.info("initial landmarks from %s", init_path)
    result = extract_contour(img, ann, config, init, jobs=resolve_jobs(args.jobs))
    runtime = result.runtime_ms if args.record_timing else None

    out = {"config": config.provenance(), "contour": result.contour.to_json()}
    if ann.contour:
        try:
            norm = resolve_normalizer(ann, config.normalizer)
        except MetricsError as e:
            logger.warning("ground truth present but no report written: %s", e)
        else:
            out["report"] = evaluate(result.contour, ann, norm, runtime).to_json()
    if runtime is not None:
        out["runtime_ms"] = runtime
    Path(args.out).write_text(dumps_stable(out))
    if args.seams_out:
        seams = {"config": config.provenance(),
                 "seams": [s.global_points.tolist() for s in result.seams]}
        Path(args.seams_out).write_text(dumps_stable(seams))
    logger.info("wrote contour with %d points to %s", len(result.contour), args.out)
    return 0


def _stem(path):
    return Path(path).name.split(".", 1)[0]


def _index(path, suffixes):
    p = Path(path)
    if p.is_file():
        return {_stem(p): p}
    if not p.is_dir():
        raise MetricsError(f"{p}: no such file or directory")
    index = {}
    for f in sorted(p.iterdir()):
        if f.name == "manifest.json" or f.name.endswith(".init.txt") or f.suffix not in suffixes:
            continue
        key = _stem(f)
        if key in index:
            raise MetricsError(f"ambiguous predictions for {key}: {index[key].name} and {f.name}")
        index[key] = f
    return index


def _pairs(pred_path, truth_path):
    preds = _index(pred_path, (".json", ".txt"))
    truth = _index(truth_path, (".json",))
    pred_file, truth_file = Path(pred_path).is_file(), Path(truth_path).is_file()
    if pred_file and truth_file:
        return [(_stem(truth_path), next(iter(preds.values())), Path(truth_path))]
    if pred_file or truth_file:
        # one file against a directory: match by stem
        name = _stem(pred_path if pred_file else truth_path)
        if name not in preds or name not in truth:
            raise MetricsError(f"no counterpart for {name} in {truth_path if pred_file else pred_path}")
        return [(name, preds[name], truth[name])]
    unmatched = sorted(set(preds) ^ set(truth))
    if unmatched:
        raise MetricsError(f"unmatched pairs: {', '.join(unmatched)}")
    if not truth:
        raise MetricsError(f"{truth_path}: no annotations")
    return [(name, preds[name], truth[name]) for name in sorted(truth)]


def _score_prediction(pred_path, ann, normalizer):
    kind, points, runtime = _read_points(pred_path)
    if kind == "contour":
        return evaluate(np.asarray(points, dtype=np.float64), ann, normalizer, runtime)
    # landmark files: DME through their spline, SME on the landmarks themselves
    report = evaluate(landmarks_to_curve(points), ann, normalizer)
    report.sme = sme(points, ann.landmarks, normalizer)
    return report


def _parse_method(text):
    label, sep, path = text.partition("=")
    if sep and label and not Path(text).exists():
        return label, path
    return "seamtrace", text


def _eval_row(task, normalizer=None):
    label, name, pred_path, truth_path = task
    ann = parse_annotation(truth_path)
    report = _score_prediction(pred_path, ann, resolve_normalizer(ann, normalizer))
    return {"method": label, "image": name, "dme": report.dme, "sme": report.sme,
            "normalizer": report.normalizer, "runtime_ms": report.runtime_ms}


def cmd_eval(args):
    config = _config(args)
    tasks = [(label, name, pp, tp)
             for label, pred_path in (_parse_method(p) for p in args.pred)
             for name, pp, tp in _pairs(pred_path, args.truth)]
    rows = parallel_map(partial(_eval_row, normalizer=config.normalizer), tasks,
                        resolve_jobs(args.jobs), prefer="threads")
    df = pd.DataFrame(rows, columns=["method", "image", "dme", "sme", "normalizer", "runtime_ms"])
    df["runtime_ms"] = pd.to_numeric(df["runtime_ms"])
    means = df.groupby("method", sort=False)[["dme", "sme", "normalizer", "runtime_ms"]].mean().reset_index()
    means.insert(1, "image", "mean")
    _write_csv(pd.concat([df, means], ignore_index=True), args.out, config)

    if args.ced_out:
        table = {"threshold": [float(t) for t in DEFAULT_CED_THRESHOLDS]}
        for label, group in df.groupby("method", sort=False):
            table[label] = [frac for _, frac in ced(group[args.ced_metric].to_numpy())]
        _write_csv(pd.DataFrame(table), args.ced_out, config)
    for _, row in means.iterrows():
        logger.info("%s: mean DME %.4f, mean SME %.4f", row["method"], row["dme"], row["sme"])
    return 0


def cmd_overlay(args):
    config = _config(args)
    img = load_image(args.image)
    contours = [np.asarray(_read_points(p)[1], dtype=np.float64).reshape(-1, 2) for p in args.contours]
    seams = None
    if args.seams:
        raw = _read_json(args.seams)
        seams = [np.asarray(s, dtype=np.float64).reshape(-1, 2) for s in raw.get("seams", [])]
    comment = f"config: {json.dumps(config.provenance(), sort_keys=True)}"
    write_overlay(img, contours, args.out, seams, comment)
    return 0


def _parse_grid(text):
    field, sep, values = text.partition("=")
    if not sep or field not in Config.model_fields:
        raise ConfigError(f"grid must look like field=v1,v2 with a config field, got {text!r}")
    values = [v.strip() for v in values.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"empty grid for {field}")
    return field, values


def cmd_sweep(args):
    config = _config(args)
    field, values = _parse_grid(args.grid)
    items = load_corpus(args.corpus)
    jobs = resolve_jobs(args.jobs)
    rows = []
    for value in values:
        point = config.with_overrides(**{field: value})
        reports = [r for _, r in parallel_map(partial(run_item, config=point), items, jobs)]
        rows.append({
            "param": field,
            "value": value,
            "mean_dme": float(np.mean([r.dme for r in reports])),
            "mean_sme": float(np.mean([r.sme for r in reports])),
            "mean_runtime_ms": float(np.mean([r.runtime_ms for r in reports])) if args.record_timing else None,
        })
        logger.info("%s=%s: mean DME %.4f over %d images", field, value, rows[-1]["mean_dme"], len(reports))
    _write_csv(pd.DataFrame(rows), args.out, config)
    return 0


def cmd_synth(args):
    raw = _read_json(args.spec, SynthError) if args.spec else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        spec = SynthSpec.model_validate(raw)
    except ValidationError as e:
        raise SynthError(f"invalid synthetic spec: {e.errors()[0]['msg']}") from e
    gen_corpus(spec, args.count, args.out, resolve_jobs(args.jobs))
    return 0


def cmd_study(args):
    config = _config(args)
    truth = _index(args.corpus, (".json",))
    anns = [parse_annotation(p) for p in truth.values()]
    anns = [a for a in anns if a.contour and len(a.contour) >= 2]
    if not anns:
        raise MetricsError(f"{args.corpus}: no annotated contours")
    study = parabola_fit_study([Curve(a.contour) for a in anns], config, [a.bbox for a in anns])
    table = pd.DataFrame(study.table(), columns=["bin_lo", "bin_hi", "count", "cumulative"])
    _write_csv(table, args.out, config)
    logger.info("%d segments, %.3f within 0.05", study.errors.size, study.fraction_within(0.05))
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--jobs", type=int, default=None, help="worker count (default $SEAMTRACE_JOBS or 1)")
    common.add_argument("--normalizer", type=float, help="error normalizer in pixels instead of inter-ocular")
    common.add_argument("--squares", type=int, help="square count")
    common.add_argument("--size-factor", type=float, help="square side as a fraction of the bbox")
    common.add_argument("--alpha", type=float)
    common.add_argument("--window", type=int, help="parabola fit window")
    common.add_argument("--h", type=float, help="directionality kernel width")
    common.add_argument("--knn", type=int, help="neighbours considered by the walk")
    common.add_argument("--score-variant", choices=["corrected", "paper-literal"])
    common.add_argument("--alpha-weighting", choices=["eq4", "eq5-literal"])
    common.add_argument("--distance-mode", choices=["vertical", "exact"])
    common.add_argument("--seed", type=int, help="synthetic corpus seed")
    common.add_argument("--record-timing", action="store_true", help="write runtimes into outputs")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="seamtrace", description="Seam-cutting contour extraction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="extract one contour")
    p.add_argument("image")
    p.add_argument("annotation")
    p.add_argument("--init", help="landmark text file used instead of the annotation landmarks")
    p.add_argument("--seams-out", help="also write the local seams as JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("eval", parents=[common], help="score predictions against annotations")
    p.add_argument("truth", help="annotation file or directory")
    p.add_argument("pred", nargs="+", help="prediction file or directory, optionally label=path")
    p.add_argument("--ced-out")
    p.add_argument("--ced-metric", choices=["dme", "sme"], default="dme")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("overlay", parents=[common], help="draw contours onto the image")
    p.add_argument("image")
    p.add_argument("contours", nargs="*")
    p.add_argument("--seams", help="seams JSON written by extract --seams-out")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_overlay)

    p = sub.add_parser("sweep", parents=[common], help="mean errors over a parameter grid")
    p.add_argument("corpus")
    p.add_argument("--grid", required=True, help="field=v1,v2,...")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("spec", nargs="?", help="SynthSpec JSON (defaults if omitted)")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("study", parents=[common], help="parabola fit-error histogram of annotated contours")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_study)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except SeamtraceError as e:
        logger.error("%s stage failed: %s", e.stage, e)
        return e.exit_code
    except OSError as e:
        logger.error("io failed: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
