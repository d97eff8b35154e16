"""Command-line entry point: ``clickkit <subcommand> ...``.

Every subcommand accepts ``--config`` (YAML or JSON); explicit flags take
precedence over config values, which take precedence over defaults.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from collections import OrderedDict
from dataclasses import astuple
from pathlib import Path

from . import __version__
from .annotations import (annotations_to_dataset, export_scwtspec, read_audacity_labels,
                          read_wav, split_dataset, window_audio, write_audacity_labels,
                          write_training_labels, write_wav)
from .bench import label_boxes, synthetic_sequences
from .classifier import (FEATURE_NAMES, ContextFeatureVector, extract_all, train_classifier)
from .config import PipelineConfig, load_config, override
from .detections import PostprocessConfig, postprocess, read_detection_windows, write_detections
from .errors import ClickKitError, ConfigError, InvalidInputError, ModelLoadError, ParseError
from .evaluation import match_overlap, match_point, render_table
from .fod import detect
from .forest import CLASSES, load_model, save_model
from .pipeline import (EXIT_CLASSIFY, EXIT_CONFIG, EXIT_INPUT, classify_boxes,
                       evaluation_report, parse_grid, read_event_labels, render_sweep,
                       run_pipeline, run_sweep, write_event_labels)
from .synth import PRESET_NAMES, preset_scene, synth_scene

log = logging.getLogger("clickkit")


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def _config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    g = lambda name: getattr(args, name, None)  # noqa: E731
    return override(
        config,
        sample_rate=g("sample_rate"),
        window_length=g("window"),
        seed=g("seed"),
        fod={"ma_window": g("ma_window"), "max_gap": g("max_gap"), "pad": g("pad")},
        detection={"confidence_floor": g("conf")},
        classifier={"model_path": g("model"), "context_size": g("context"),
                    "n_trees": g("trees"), "bands": True if g("bands") else None},
        eval={"partial_frac": g("partial"), "full_frac": g("full"),
              "bin_seconds": g("bin_seconds")},
    )


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_bytes(text.encode("utf-8"))


# ---------------------------------------------------------------------------
# Feature / label CSV
# ---------------------------------------------------------------------------


def write_feature_csv(rows, path) -> None:
    """``rows``: iterable of (recording, ContextFeatureVector)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("recording",) + FEATURE_NAMES)
        for rec, vec in rows:
            w.writerow((rec,) + tuple(repr(float(v)) if isinstance(v, float) else v
                                      for v in astuple(vec)))


def write_label_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("recording", "label"))
        w.writerows(rows)


def _read_csv(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(first) != tuple(header):
            raise ParseError(f"expected header {','.join(header)}", path, 1)
        return [(i, row) for i, row in enumerate(reader, start=2) if row]


def read_feature_sequences(features_path, labels_path):
    """Pair the two CSVs row by row and group them per recording, in file order."""
    feats = _read_csv(features_path, ("recording",) + FEATURE_NAMES)
    labels = _read_csv(labels_path, ("recording", "label"))
    if len(feats) != len(labels):
        raise InvalidInputError(
            f"{features_path} has {len(feats)} rows but {labels_path} has {len(labels)}")
    groups: OrderedDict[str, tuple[list, list]] = OrderedDict()
    for (ln, frow), (_, lrow) in zip(feats, labels):
        if len(frow) != len(FEATURE_NAMES) + 1 or len(lrow) != 2:
            raise ParseError("wrong number of columns", features_path, ln)
        if frow[0] != lrow[0]:
            raise ParseError(f"recording {frow[0]!r} does not match label row {lrow[0]!r}",
                             labels_path, ln)
        try:
            vals = [float(v) for v in frow[1:]]
        except ValueError:
            raise ParseError("bad number", features_path, ln) from None
        vals[4], vals[9] = int(vals[4]), int(vals[9])
        if lrow[1] not in CLASSES:
            raise ParseError(f"unknown class {lrow[1]!r}", labels_path, ln)
        fv, lv = groups.setdefault(frow[0], ([], []))
        fv.append(ContextFeatureVector(*vals))
        lv.append(lrow[1])
    return list(groups.values())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = preset_scene(args.preset, args.seed)
    audio, truth = synth_scene(spec)
    write_wav(audio, args.out_audio)
    write_audacity_labels(truth, args.out_labels)
    return 0


def cmd_detect_fod(args) -> int:
    cfg = _config(args)
    audio = read_wav(args.input)
    boxes = detect(audio, cfg.fod)
    if args.format == "detections":
        write_detections(boxes, args.out, cfg.window_length)
    else:
        write_event_labels(boxes, args.out, audio.sample_rate)
    return 0


def cmd_transform(args) -> int:
    cfg = _config(args)
    audio = read_wav(args.audio)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    windows = window_audio(audio, cfg.window_length)
    if args.limit is not None:
        windows = windows[:args.limit]
    for win in windows:
        export_scwtspec(win.audio, out / f"{win.index:06d}.png", cfg.window_length)
    return 0


def cmd_dataset(args) -> int:
    cfg = _config(args)
    audio = read_wav(args.audio)
    truth = read_audacity_labels(args.labels)
    class_map = {name: k for k, name in enumerate(args.classes.split(","))} \
        if args.classes else None
    entries = annotations_to_dataset(truth, cfg.window_length, len(audio), audio.sample_rate,
                                     class_map)
    out = Path(args.out_dir)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    windows = window_audio(audio, cfg.window_length) if args.images else None
    if windows is not None:
        (out / "images").mkdir(exist_ok=True)
    for entry in entries:
        write_training_labels(entry, out / "labels" / f"{entry.window_index:06d}.txt")
        if windows is not None:
            export_scwtspec(windows[entry.window_index].audio,
                            out / "images" / f"{entry.window_index:06d}.png",
                            cfg.window_length)
    fractions = tuple(float(v) for v in args.split.split(","))
    if len(fractions) != 3:
        raise ConfigError("--split needs three comma-separated fractions")
    parts = split_dataset(entries, fractions, cfg.seed)
    for name, part in zip(("train", "val", "test"), parts):
        _write_text(out / f"{name}.txt", "".join(f"{e.window_index:06d}\n" for e in part))
    return 0


def cmd_postprocess(args) -> int:
    cfg = _config(args)
    audio = read_wav(args.audio)
    floor = cfg.detection.confidence_floor
    windows = read_detection_windows(args.detections, cfg.window_length, floor)
    boxes = postprocess(windows, audio, PostprocessConfig(cfg.fod, floor))
    write_event_labels(boxes, args.out, audio.sample_rate)
    return 0


def cmd_features(args) -> int:
    audio = read_wav(args.audio)
    boxes = read_event_labels(args.boxes, audio.sample_rate)
    feats = extract_all(boxes, audio)
    rec = args.recording or Path(args.audio).stem
    write_feature_csv([(rec, f) for f in feats], args.out)
    if args.truth:
        labels = label_boxes(sorted(boxes), read_audacity_labels(args.truth), audio.sample_rate)
        write_label_csv([(rec, lab) for lab in labels], args.out_labels)
    return 0


def cmd_train_forest(args) -> int:
    cfg = _config(args)
    if args.synthetic:
        sequences = synthetic_sequences(args.synthetic, cfg.seed)
    elif args.features and args.labels:
        sequences = read_feature_sequences(args.features, args.labels)
    else:
        raise ConfigError("give --features and --labels, or --synthetic N")
    c = cfg.classifier
    model = train_classifier(sequences, c.context_size, c.n_trees, cfg.seed)
    save_model(model, args.out)
    return 0


def cmd_classify(args) -> int:
    cfg = _config(args)
    audio = read_wav(args.audio)
    if not cfg.classifier.model_path:
        raise ConfigError("no model given (--model or classifier.model_path)")
    model = load_model(cfg.classifier.model_path)
    boxes = read_event_labels(args.boxes, audio.sample_rate)
    labelled = classify_boxes(boxes, audio, model, cfg.classifier.bands)
    write_event_labels(labelled, args.out, audio.sample_rate)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    pred = read_audacity_labels(args.pred)
    truth = read_audacity_labels(args.truth)
    if args.classes:
        from .evaluation import filter_by_class
        classes = args.classes.split(",")
        pred, truth = filter_by_class(pred, classes), filter_by_class(truth, classes)
    if args.mode == "point":
        report = match_point(pred, truth)
    elif args.mode == "overlap":
        report = match_overlap(pred, truth, cfg.eval.partial_frac, cfg.eval.full_frac)
    else:
        if args.duration is None:
            raise ConfigError("--mode full needs --duration")
        _write_text(args.out, evaluation_report(pred, truth, args.duration, cfg))
        return 0
    _write_text(args.out, render_table(report))
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    audio = read_wav(args.audio)
    truth = read_audacity_labels(args.truth)
    model = load_model(cfg.classifier.model_path) if cfg.classifier.model_path else None
    rows = run_sweep(cfg, audio, args.detections, truth, parse_grid(args.grid), model)
    _write_text(args.out, render_sweep(rows))
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    result = run_pipeline(cfg, args.audio, args.detections, args.out_dir, args.truth)
    if result.error:
        print(f"clickkit: {result.error}", file=sys.stderr)
    return result.exit_code


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_fod(p):
    p.add_argument("--ma-window", type=int, help="moving-average window (samples)")
    p.add_argument("--max-gap", type=int, help="largest peak gap inside one event (samples)")
    p.add_argument("--pad", type=int, help="padding added to each event side (samples)")


def _add_eval(p):
    p.add_argument("--partial", type=float, help="partial-overlap fraction")
    p.add_argument("--full", type=float, help="full-overlap fraction")
    p.add_argument("--bin-seconds", type=float, help="rate-correlation bin width")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clickkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON configuration file")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--window", type=int, help="analysis window length (samples)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="render a synthetic preset scene")
    p.add_argument("--preset", required=True, choices=PRESET_NAMES)
    p.add_argument("--out-audio", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect-fod", parents=[common], help="standalone gradient detector")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("labels", "detections"), default="labels")
    _add_fod(p)
    p.set_defaults(func=cmd_detect_fod)

    p = sub.add_parser("transform", parents=[common], help="write SCWTSPEC images per window")
    p.add_argument("--audio", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--limit", type=int, help="only the first N windows")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("dataset", parents=[common], help="windowed training labels + split")
    p.add_argument("--audio", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", help="comma-separated label names mapped to ids 0, 1, ...")
    p.add_argument("--split", default="0.7,0.15,0.15")
    p.add_argument("--images", action="store_true", help="also export SCWTSPEC images")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("postprocess", parents=[common], help="merge and re-slice detector boxes")
    p.add_argument("--audio", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--conf", type=float, help="confidence floor in [0, 1]")
    p.add_argument("--out", required=True)
    _add_fod(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("features", parents=[common], help="per-event feature CSV")
    p.add_argument("--audio", required=True)
    p.add_argument("--boxes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--recording", help="recording id column (default: audio file stem)")
    p.add_argument("--truth", help="annotations used to label each box")
    p.add_argument("--out-labels", help="label CSV written when --truth is given")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-forest", parents=[common], help="train the context classifier")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--synthetic", type=int, metavar="N", help="train on N synthetic scenes")
    p.add_argument("--trees", type=int)
    p.add_argument("--context", type=int, choices=(3, 5, 9))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_forest)

    p = sub.add_parser("classify", parents=[common], help="label events click/echo/other")
    p.add_argument("--audio", required=True)
    p.add_argument("--boxes", required=True)
    p.add_argument("--model")
    p.add_argument("--bands", action="store_true", help="relabel clicks as LF/HF/US")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", parents=[common], help="score labels against annotations")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mode", choices=("point", "overlap", "full"), default="overlap")
    p.add_argument("--classes", help="comma-separated classes to keep")
    p.add_argument("--duration", type=float, help="recording length for --mode full")
    p.add_argument("--out", default="-")
    _add_eval(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="confidence-threshold sweep")
    p.add_argument("--audio", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--conf", dest="grid", default="15..75:5",
                   help="thresholds in percent: 'lo..hi:step' or a comma list")
    p.add_argument("--model")
    p.add_argument("--out", default="-")
    _add_fod(p)
    _add_eval(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", parents=[common], help="detect, postprocess, classify, evaluate")
    p.add_argument("--audio", required=True)
    p.add_argument("--detections", help="detector output; the gradient detector is used if absent")
    p.add_argument("--truth")
    p.add_argument("--model")
    p.add_argument("--conf", type=float)
    p.add_argument("--bands", action="store_true")
    p.add_argument("--out-dir", required=True)
    _add_fod(p)
    _add_eval(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"clickkit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelLoadError as exc:
        print(f"clickkit: {exc}", file=sys.stderr)
        return EXIT_CLASSIFY
    except (ClickKitError, OSError, ValueError) as exc:
        print(f"clickkit: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
