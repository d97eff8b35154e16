"""Post-processing of external detector boxes.

Detector output arrives as one text record per box::

    <window_index> <class_id> <x> <y> <w> <h> <confidence>

with ``x``/``w`` normalized to the analysis window (the frequency terms
``y``/``h`` are carried but ignored). Boxes are converted to absolute
samples, merged along the time axis and re-cut into individual events
using gated gradient peaks found inside each merged box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidInputError, ParseError
from .events import EventBox
from .fod import FodConfig, extract_peaks, filter_events, group_peaks, pad_events
from .transforms import DEFAULT_WINDOW, AudioBuffer

_EPS = 1e-6


@dataclass(frozen=True)
class DetectionWindow:
    window_index: int
    window_start_sample: int
    boxes: tuple[EventBox, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class PostprocessConfig:
    fod: FodConfig = field(default_factory=FodConfig)
    confidence_floor: float = 0.0


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def _parse_record(line: str, lineno: int, path, window_length: int, class_names):
    parts = line.split()
    if len(parts) != 7:
        raise ParseError(f"expected 7 fields, got {len(parts)}", path, lineno)
    try:
        window_index = int(parts[0])
        class_id = int(parts[1])
        x, y, w, h, conf = (float(p) for p in parts[2:])
    except ValueError as exc:
        raise ParseError(f"bad number: {exc}", path, lineno) from None
    if window_index < 0 or class_id < 0:
        raise ParseError("window_index and class_id must be non-negative", path, lineno)
    for name, v in (("x", x), ("y", y), ("w", w), ("h", h), ("confidence", conf)):
        if not (0.0 <= v <= 1.0) or math.isnan(v):
            raise ParseError(f"{name}={v} outside [0, 1]", path, lineno)
    if w <= 0.0:
        raise ParseError("box width must be positive", path, lineno)
    if x - w / 2 < -_EPS or x + w / 2 > 1.0 + _EPS:
        raise ParseError(f"box x={x} w={w} extends outside its window", path, lineno)

    window_start = window_index * window_length
    start_f = window_start + (x - w / 2) * window_length
    end_f = start_f + w * window_length
    start = max(_round(start_f), window_start)
    end = min(_round(end_f), window_start + window_length)
    if end <= start:
        end = start + 1
    if class_names is None:
        label = "event"
    elif class_id < len(class_names):
        label = class_names[class_id]
    else:
        raise ParseError(f"class_id {class_id} has no name", path, lineno)
    return window_index, EventBox(start, end, conf, label, "external")


def read_detection_windows(path, window_length: int = DEFAULT_WINDOW,
                           confidence_floor: float = 0.0,
                           class_names: Sequence[str] | None = None) -> list[DetectionWindow]:
    """Parse a detections file into per-window groups, sorted by window index.

    Blank lines and ``#`` comments are skipped.
    """
    if not 0.0 <= confidence_floor <= 1.0:
        raise InvalidInputError(f"confidence_floor {confidence_floor} outside [0, 1]")
    grouped: dict[int, list[EventBox]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            wi, box = _parse_record(line, lineno, path, window_length, class_names)
            if box.confidence < confidence_floor:
                continue
            grouped.setdefault(wi, []).append(box)
    return [DetectionWindow(wi, wi * window_length, tuple(grouped[wi]))
            for wi in sorted(grouped)]


def ingest_detections(path, window_length: int = DEFAULT_WINDOW,
                      confidence_floor: float = 0.0,
                      class_names: Sequence[str] | None = None) -> list[EventBox]:
    """Detections file -> absolute-sample boxes at or above ``confidence_floor``."""
    windows = read_detection_windows(path, window_length, confidence_floor, class_names)
    return [box for win in windows for box in win.boxes]


def write_detections(boxes: Iterable[EventBox], path, window_length: int = DEFAULT_WINDOW,
                     class_id: int = 0) -> None:
    """Write boxes in the detections format, cutting them at window borders.

    A box crossing a border becomes one record per window it touches,
    which is what a window-by-window detector would have produced.
    """
    lines = []
    for box in sorted(boxes):
        s = box.start_sample
        while s < box.end_sample:
            wi = s // window_length
            ws = wi * window_length
            e = min(box.end_sample, ws + window_length)
            x = ((s + e) / 2 - ws) / window_length
            w = (e - s) / window_length
            lines.append(f"{wi} {class_id} {x:.6f} 0.500000 {w:.6f} 1.000000 "
                         f"{box.confidence:.6f}\n")
            s = e
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def merge_boxes(boxes: Iterable[EventBox]) -> list[EventBox]:
    """Union overlapping or touching boxes; merged confidence is the maximum.

    Members sharing one label keep it, mixed groups become ``"event"``.
    """
    ordered = sorted(boxes)
    merged: list[EventBox] = []
    for box in ordered:
        if merged and box.start_sample <= merged[-1].end_sample:
            cur = merged[-1]
            merged[-1] = EventBox(
                cur.start_sample,
                max(cur.end_sample, box.end_sample),
                max(cur.confidence, box.confidence),
                cur.label if cur.label == box.label else "event",
                cur.provenance,
            )
        else:
            merged.append(box)
    return merged


def slice_merged_box(box: EventBox, audio: AudioBuffer,
                     config: FodConfig | None = None) -> list[EventBox]:
    """Split one box into the peak groups found inside it.

    The gate's moving average spans the whole box. Groups are padded but
    never past the box edges or the midpoint to a neighbouring group.
    Children inherit the parent's confidence and label; a box without any
    surviving group yields nothing.
    """
    config = config or FodConfig()
    n = len(audio.samples)
    if box.start_sample < 0 or box.end_sample > n:
        raise InvalidInputError(
            f"box [{box.start_sample}, {box.end_sample}) outside audio of {n} samples")
    if box.length < 2:
        return []
    seg = audio.samples[box.start_sample:box.end_sample]
    peaks = extract_peaks(seg, ma_window=box.length, offset=box.start_sample)
    events = filter_events(group_peaks(peaks, config.max_gap), config)
    events = pad_events(events, config.pad, box.end_sample, lower=box.start_sample)
    return [EventBox(ev.start_sample, ev.end_sample, box.confidence, box.label, "sliced")
            for ev in events]


def postprocess(windows: Iterable[DetectionWindow | EventBox], audio: AudioBuffer,
                config: PostprocessConfig | None = None) -> list[EventBox]:
    """Floor -> merge -> slice; output sorted and non-overlapping."""
    config = config or PostprocessConfig()
    flat: list[EventBox] = []
    for item in windows:
        flat.extend(item.boxes if isinstance(item, DetectionWindow) else (item,))
    flat = [b for b in flat if b.confidence >= config.confidence_floor]
    out: list[EventBox] = []
    for parent in merge_boxes(flat):
        out.extend(slice_merged_box(parent, audio, config.fod))
    return sorted(out)
