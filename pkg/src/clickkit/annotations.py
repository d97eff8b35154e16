"""Label files, audio windowing and training-set export.

Formats
-------
Audacity label track
    ``<start>\\t<end>\\t<label>\\n`` with times in seconds. Written with six
    decimals (sub-sample at 192 kHz), UTF-8, LF line endings.
Training labels
    One file per window, one ``<class_id> <x> <y> <w> <h>`` line per box,
    all normalized to the window. Events span the full frequency axis, so
    ``y = 0.5`` and ``h = 1.0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .errors import InvalidInputError, ParseError
from .transforms import DEFAULT_WINDOW, AudioBuffer, ImagePlane, scwtspec_planes

TIME_DECIMALS = 6


@dataclass(frozen=True)
class Annotation:
    start: float
    end: float
    label: str = ""

    @property
    def duration(self) -> float:
        return self.end - self.start


class AudioWindow(NamedTuple):
    index: int
    audio: AudioBuffer
    padded: bool = False


@dataclass(frozen=True)
class DatasetEntry:
    window_index: int
    label_lines: tuple[tuple[int, float, float, float, float], ...] = ()
    image_ref: object = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# Audacity labels
# ---------------------------------------------------------------------------


def read_audacity_labels(path) -> list[Annotation]:
    """Read an Audacity label track.

    Spectral-selection continuation lines (starting with a backslash) are
    skipped. A missing label column yields an empty label.

    Raises
    ------
    ParseError
        If a line does not start with two numeric time fields.
    """
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("\\"):
                continue
            parts = line.split("\t", 2)
            if len(parts) < 2:
                raise ParseError("expected <start>\\t<end>[\\t<label>]", path, lineno)
            try:
                start, end = float(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"non-numeric time in {line!r}", path, lineno) from None
            if not (math.isfinite(start) and math.isfinite(end)):
                raise ParseError("times must be finite", path, lineno)
            out.append(Annotation(start, end, parts[2] if len(parts) == 3 else ""))
    return out


def format_audacity_labels(annotations: Iterable[Annotation]) -> str:
    return "".join(f"{a.start:.{TIME_DECIMALS}f}\t{a.end:.{TIME_DECIMALS}f}\t{a.label}\n"
                   for a in annotations)


def write_audacity_labels(annotations: Iterable[Annotation], path) -> None:
    Path(path).write_bytes(format_audacity_labels(annotations).encode("utf-8"))


def boxes_to_annotations(boxes, sample_rate: int, label_fn=None) -> list[Annotation]:
    """EventBoxes -> Annotations in seconds; ``label_fn(box)`` picks the text."""
    label_fn = label_fn or (lambda b: b.label)
    return [Annotation(b.start_sample / sample_rate, b.end_sample / sample_rate, label_fn(b))
            for b in boxes]


# ---------------------------------------------------------------------------
# Audio
# ---------------------------------------------------------------------------


def read_wav(path) -> AudioBuffer:
    """Mono PCM wave (16/32-bit int or 32-bit float) scaled to [-1, 1]."""
    sr, data = wavfile.read(path)
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise InvalidInputError(f"{path}: unsupported sample type {data.dtype}")
    return AudioBuffer(x, int(sr))


def write_wav(audio: AudioBuffer, path) -> None:
    """Write 32-bit float PCM."""
    wavfile.write(path, audio.sample_rate, audio.samples.astype(np.float32))


def window_audio(audio: AudioBuffer, window_length: int = DEFAULT_WINDOW) -> list[AudioWindow]:
    """Consecutive non-overlapping windows; a short tail is zero-padded and flagged."""
    if window_length < 2:
        raise InvalidInputError(f"window_length must be >= 2, got {window_length}")
    x = audio.samples
    out = []
    for k, start in enumerate(range(0, x.size, window_length)):
        chunk = x[start:start + window_length]
        padded = chunk.size < window_length
        if padded:
            chunk = np.concatenate([chunk, np.zeros(window_length - chunk.size)])
        out.append(AudioWindow(k, AudioBuffer(chunk, audio.sample_rate), padded))
    return out


# ---------------------------------------------------------------------------
# Training labels
# ---------------------------------------------------------------------------


def annotations_to_dataset(annotations: Sequence[Annotation], window_length: int,
                           total_length: int, sample_rate: int = 192_000,
                           class_map: Mapping[str, int] | None = None) -> list[DatasetEntry]:
    """Clip every annotation into each window it touches.

    Returns one entry per window of the recording (``ceil(total_length /
    window_length)`` entries), empty label tuples included. Without a
    ``class_map`` every box gets class 0.
    """
    win_dur = window_length / sample_rate
    total_dur = total_length / sample_rate
    n_windows = max(math.ceil(total_length / window_length), 0)
    lines: list[list] = [[] for _ in range(n_windows)]
    for ann in annotations:
        if ann.start < 0 or ann.end > total_dur + 1e-12 or ann.end < ann.start:
            raise InvalidInputError(
                f"annotation [{ann.start}, {ann.end}] outside audio of {total_dur} s")
        if class_map is None:
            cid = 0
        else:
            try:
                cid = class_map[ann.label]
            except KeyError:
                raise InvalidInputError(f"label {ann.label!r} missing from class_map") from None
        first = int(ann.start // win_dur)
        last = min(int(math.ceil(ann.end / win_dur)), n_windows)
        for k in range(first, max(last, first + 1)):
            w0 = k * win_dur
            lo = max(ann.start, w0)
            hi = min(ann.end, w0 + win_dur)
            if hi <= lo and not (ann.end == ann.start and k == first):
                continue
            x = ((lo + hi) / 2 - w0) / win_dur
            w = (hi - lo) / win_dur
            lines[min(k, n_windows - 1)].append((cid, x, 0.5, w, 1.0))
    return [DatasetEntry(k, tuple(lines[k])) for k in range(n_windows)]


def format_training_labels(entry: DatasetEntry) -> str:
    return "".join(f"{c} {x:.6f} {y:.6f} {w:.6f} {h:.6f}\n" for c, x, y, w, h in entry.label_lines)


def write_training_labels(entry: DatasetEntry, path) -> None:
    Path(path).write_bytes(format_training_labels(entry).encode("utf-8"))


def read_training_labels(path) -> list[tuple[int, float, float, float, float]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 5:
                raise ParseError(f"expected 5 fields, got {len(parts)}", path, lineno)
            try:
                cid = int(parts[0])
                vals = [float(p) for p in parts[1:]]
            except ValueError:
                raise ParseError("bad number", path, lineno) from None
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ParseError("normalized values must be in [0, 1]", path, lineno)
            out.append((cid, *vals))
    return out


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def scwtspec_image(window: AudioBuffer, size: int = DEFAULT_WINDOW) -> np.ndarray:
    """``[size, size, 3]`` uint8: waveform, scalogram, spectrogram as R, G, B."""
    if len(window) != size:
        raise InvalidInputError(f"window has {len(window)} samples, expected {size}")
    planes: tuple[ImagePlane, ...] = scwtspec_planes(window, size)
    return np.stack([p.pixels for p in planes], axis=-1)


def export_scwtspec(window: AudioBuffer, out_path, size: int = DEFAULT_WINDOW) -> None:
    """Write the composite image as a PNG (lossless, deterministic)."""
    Image.fromarray(scwtspec_image(window, size), mode="RGB").save(out_path, format="PNG")


# ---------------------------------------------------------------------------
# Split
# ---------------------------------------------------------------------------


def split_counts(n: int, fractions=(0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    """Train = floor(n * f_train); the rest is divided val/test, val floored."""
    f_train, f_val, f_test = fractions
    if abs(f_train + f_val + f_test - 1.0) > 1e-9 or min(fractions) < 0:
        raise InvalidInputError(f"fractions {fractions} must be non-negative and sum to 1")
    n_train = math.floor(n * f_train + 1e-9)
    rest = n - n_train
    tail = f_val + f_test
    n_val = math.floor(rest * f_val / tail + 1e-9) if tail > 0 else 0
    return n_train, n_val, rest - n_val


def split_dataset(entries: Sequence, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    """Seeded shuffle, then cut into (train, val, test) lists."""
    n_train, n_val, _ = split_counts(len(entries), fractions)
    order = np.random.default_rng(seed).permutation(len(entries))
    shuffled = [entries[i] for i in order]
    return (shuffled[:n_train], shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])
