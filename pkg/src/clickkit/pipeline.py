"""Batch orchestration: detect -> postprocess -> classify -> evaluate, and the
confidence-threshold sweep.

Stages exchange data only through files in the output directory, so any
stage can be swapped for an external tool writing the same format:

``detections.txt``   detector boxes (window records, see ``detections``)
``events.txt``       post-processed boxes, Audacity labels ``event:<conf>``
``classified.txt``   classified boxes, Audacity labels ``<class>:<conf>``
``report.txt``       evaluation tables (only when ground truth is given)
``effective_config.json``  the configuration actually used
``pipeline.log``     per-stage wall time
"""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .annotations import Annotation, read_audacity_labels, read_wav, write_audacity_labels
from .classifier import classify_events, classify_frequency_band, extract_all
from .config import PipelineConfig
from .detections import PostprocessConfig, postprocess, read_detection_windows, write_detections
from .errors import ClickKitError
from .evaluation import (MatchReport, RateReport, filter_by_class, match_overlap, match_point,
                         rate_correlation, render_rate_table, render_table)
from .events import EventBox, format_event_label, parse_event_label
from .fod import detect
from .forest import load_model
from .transforms import AudioBuffer

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_DETECT = 4
EXIT_POSTPROCESS = 5
EXIT_CLASSIFY = 6
EXIT_EVALUATE = 7


class StageError(ClickKitError):
    def __init__(self, stage: str, code: int, message: str):
        self.stage = stage
        self.code = code
        super().__init__(f"{stage} stage failed: {message}")


@contextmanager
def stage(name: str, code: int):
    t0 = time.perf_counter()
    log.info("stage %s: start", name)
    try:
        yield
    except StageError:
        raise
    except (ClickKitError, OSError, ValueError) as exc:
        raise StageError(name, code, str(exc)) from exc
    log.info("stage %s: done in %.3f s", name, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Event label files
# ---------------------------------------------------------------------------


def write_event_labels(boxes: Sequence[EventBox], path, sample_rate: int) -> None:
    write_audacity_labels(
        [Annotation(b.start_sample / sample_rate, b.end_sample / sample_rate,
                    format_event_label(b)) for b in boxes], path)


def read_event_labels(path, sample_rate: int) -> list[EventBox]:
    """Audacity labels -> EventBoxes; ``label:conf`` text restores confidence."""
    boxes = []
    for a in read_audacity_labels(path):
        label, conf = parse_event_label(a.label)
        start = int(round(a.start * sample_rate))
        end = max(int(round(a.end * sample_rate)), start + 1)
        boxes.append(EventBox(start, end, 1.0 if conf is None else conf, label or "event",
                              "external"))
    return sorted(boxes)


def read_truth(path) -> list[Annotation]:
    return read_audacity_labels(path)


# ---------------------------------------------------------------------------
# Stage helpers
# ---------------------------------------------------------------------------


def classify_boxes(boxes: Sequence[EventBox], audio: AudioBuffer, model,
                   bands: bool = False) -> list[EventBox]:
    """Forest labels; with ``bands`` clicks are relabelled LF / HF / US."""
    labelled = [b for b, _ in classify_events(boxes, audio, model)]
    if not bands:
        return labelled
    feats = extract_all(labelled, audio)
    return [b.with_(label=classify_frequency_band(f.strongest_frequency))
            if b.label == "click" else b for b, f in zip(labelled, feats)]


def evaluation_report(pred: Sequence, truth: Sequence[Annotation], duration: float,
                      config: PipelineConfig) -> str:
    """Point and overlap tables plus rate correlations, as text."""
    e = config.eval
    fs = config.sample_rate
    parts = ["Point matching (all events)\n", render_table(match_point(pred, truth, fs)), "\n",
             "Overlap matching (all events)\n",
             render_table(match_overlap(pred, truth, e.partial_frac, e.full_frac, fs)), "\n"]
    classified = any(parse_event_label(p.label)[0] in ("click", "echo") for p in pred)
    if classified:
        for cls in ("click", "echo"):
            rep = match_overlap(filter_by_class(pred, cls), filter_by_class(truth, cls),
                                e.partial_frac, e.full_frac, fs)
            parts += [f"Overlap matching ({cls})\n", render_table(rep), "\n"]
    rates = _rates(pred, truth, duration, config)
    parts += ["Rate correlation\n", render_rate_table([("-", rates)])]
    return "".join(parts)


def _rates(pred, truth, duration, config) -> list[RateReport]:
    e = config.eval
    fs = config.sample_rate
    return [rate_correlation(pred, truth, duration, cls, e.bin_seconds, fs)
            for cls in (None, "click", "echo")]


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass
class PipelineResult:
    exit_code: int
    outputs: dict
    error: str | None = None


def run_pipeline(config: PipelineConfig, audio_path, detections_path, out_dir,
                 truth_path=None) -> PipelineResult:
    """Run every enabled stage; a failing stage maps to its own exit code.

    With no ``detections_path`` the standalone gradient detector supplies
    the boxes. Classification runs when ``classifier.model_path`` is set,
    evaluation when ``truth_path`` is given.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create %s: %s", out, exc)
        return PipelineResult(EXIT_INPUT, {}, str(exc))
    handler = logging.FileHandler(out / "pipeline.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    pkg_log = logging.getLogger("clickkit")
    pkg_log.addHandler(handler)
    old_level = pkg_log.level
    pkg_log.setLevel(logging.INFO)
    try:
        return _run_stages(config, audio_path, detections_path, out, truth_path)
    finally:
        pkg_log.removeHandler(handler)
        pkg_log.setLevel(old_level)
        handler.close()


def _run_stages(config, audio_path, detections_path, out: Path, truth_path) -> PipelineResult:
    outputs: dict[str, Path] = {}
    try:
        (out / "effective_config.json").write_text(config.dumps(), encoding="utf-8")
        with stage("input", EXIT_INPUT):
            audio = read_wav(audio_path)
            if audio.sample_rate != config.sample_rate:
                log.warning("audio sample rate %d differs from config %d; using the file's",
                            audio.sample_rate, config.sample_rate)
                config = _with_rate(config, audio.sample_rate)
            truth = read_truth(truth_path) if truth_path is not None else None

        with stage("detect", EXIT_DETECT):
            if detections_path is None:
                det_path = out / "detections.txt"
                write_detections(detect(audio, config.fod), det_path, config.window_length)
                outputs["detections"] = det_path
            else:
                det_path = Path(detections_path)
            windows = read_detection_windows(det_path, config.window_length,
                                             config.detection.confidence_floor)

        with stage("postprocess", EXIT_POSTPROCESS):
            boxes = postprocess(windows, audio,
                                PostprocessConfig(config.fod, config.detection.confidence_floor))
            outputs["events"] = out / "events.txt"
            write_event_labels(boxes, outputs["events"], audio.sample_rate)

        final = read_event_labels(outputs["events"], audio.sample_rate)
        if config.classifier.model_path:
            with stage("classify", EXIT_CLASSIFY):
                model = load_model(config.classifier.model_path)
                final = classify_boxes(final, audio, model, config.classifier.bands)
                outputs["classified"] = out / "classified.txt"
                write_event_labels(final, outputs["classified"], audio.sample_rate)

        if truth is not None:
            with stage("evaluate", EXIT_EVALUATE):
                outputs["report"] = out / "report.txt"
                outputs["report"].write_text(
                    evaluation_report(final, truth, audio.duration, config), encoding="utf-8")
    except StageError as exc:
        log.error("%s", exc)
        return PipelineResult(exc.code, outputs, str(exc))
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return PipelineResult(EXIT_INPUT, outputs, str(exc))
    return PipelineResult(EXIT_OK, outputs)


def _with_rate(config: PipelineConfig, rate: int) -> PipelineConfig:
    from dataclasses import replace
    return replace(config, sample_rate=rate)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    threshold: float  # percent
    raw_detections: int
    events: list[EventBox]
    overlap: MatchReport
    rates: list[RateReport]


def run_sweep(config: PipelineConfig, audio: AudioBuffer, detections_path,
              truth: Sequence[Annotation], grid: Sequence[float], model=None) -> list[SweepRow]:
    """Repeat post-processing (and classification) at each confidence threshold.

    ``grid`` is in percent, e.g. 15..75. The raw box count after
    thresholding must be non-increasing along an ascending grid.
    """
    if not grid:
        raise ValueError("sweep grid is empty")
    e = config.eval
    rows = []
    for thr in grid:
        floor = thr / 100.0
        windows = read_detection_windows(detections_path, config.window_length, floor)
        raw = sum(len(w.boxes) for w in windows)
        boxes = postprocess(windows, audio, PostprocessConfig(config.fod, floor))
        if model is not None:
            boxes = classify_boxes(boxes, audio, model)
        overlap = match_overlap(boxes, truth, e.partial_frac, e.full_frac, audio.sample_rate)
        rows.append(SweepRow(thr, raw, boxes, overlap,
                             _rates(boxes, truth, audio.duration, config)))
    ordered = sorted(rows, key=lambda r: r.threshold)
    for a, b in zip(ordered, ordered[1:]):
        if b.raw_detections > a.raw_detections:
            raise RuntimeError(f"detections rose from {a.raw_detections} to "
                               f"{b.raw_detections} between thresholds {a.threshold} "
                               f"and {b.threshold}")
    return rows


def render_sweep(rows: Sequence[SweepRow]) -> str:
    labels = [f"{r.threshold:g}" for r in rows]
    raw = "Raw boxes  | " + " | ".join(f"{r.raw_detections}" for r in rows) + "\n"
    return ("Confidence thresholds: " + ", ".join(labels) + "\n" + raw + "\n"
            + render_table([r.overlap for r in rows], labels) + "\n"
            + render_rate_table([(lab, r.rates) for lab, r in zip(labels, rows)]))


def parse_grid(text: str) -> list[float]:
    """``15..75:5`` -> [15, 20, ..., 75]; ``15,30,75`` -> [15, 30, 75]."""
    text = text.strip()
    if ".." in text:
        span, _, step = text.partition(":")
        lo, _, hi = span.partition("..")
        lo_f, hi_f, step_f = float(lo), float(hi), float(step or 1)
        if step_f <= 0 or hi_f < lo_f:
            raise ValueError(f"bad grid {text!r}")
        n = int(round((hi_f - lo_f) / step_f))
        return [lo_f + k * step_f for k in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]
