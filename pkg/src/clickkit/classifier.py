"""Per-event features, context windows and click/echo/other classification.

Each event box is summarized by twelve numbers (timing, detector
confidence, gated-gradient statistics, amplitude statistics, dominant
frequency, gap to the next box). Events are then judged together with
their neighbours: a context window stacks the current event with a fixed
set of past (and optionally future) events, padding with zero vectors
where the recording has none and marking which slots are real.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .events import EventBox
from .fod import extract_peaks
from .forest import CLASSES, ForestModel, train_forest
from .transforms import AudioBuffer

FEATURE_NAMES = (
    "start", "end", "confidence", "length", "number_fod", "minimum_energy",
    "maximum_energy", "mean_energy", "max_fod", "fod_direction",
    "strongest_frequency", "interarrival",
)
N_FEATURES = len(FEATURE_NAMES)
NO_NEXT = -1.0
MIN_FFT = 512

# slots relative to the current event
CONTEXT_LAYOUTS = {
    3: (-1, 0, 1),
    5: (-4, -3, -2, -1, 0),
    9: (-4, -3, -2, -1, 0, 1, 2, 3, 4),
}


@dataclass(frozen=True)
class ContextFeatureVector:
    start: float
    end: float
    confidence: float
    length: float
    number_fod: int
    minimum_energy: float
    maximum_energy: float
    mean_energy: float
    max_fod: float
    fod_direction: int
    strongest_frequency: float
    interarrival: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def shifted(self, origin: float) -> "ContextFeatureVector":
        return ContextFeatureVector(self.start - origin, self.end - origin,
                                    *astuple(self)[2:])


SENTINEL = ContextFeatureVector(0.0, 0.0, 0.0, 0.0, 0, 0.0, 0.0, 0.0, 0.0, 0, 0.0, 0.0)


@dataclass(frozen=True)
class ContextWindow:
    vectors: tuple[ContextFeatureVector, ...]
    presence: tuple[bool, ...]

    def as_array(self) -> np.ndarray:
        feats = np.concatenate([v.as_array() for v in self.vectors])
        return np.concatenate([feats, np.array(self.presence, dtype=np.float64)])


def feature_count(context_size: int) -> int:
    return context_size * (N_FEATURES + 1)


def strongest_frequency(samples: np.ndarray, sample_rate: int) -> float:
    """Peak bin of a zero-padded one-sided DFT.

    The transform is 512 points, or the next power of two for longer
    segments so no samples are dropped.
    """
    n_fft = MIN_FFT if len(samples) <= MIN_FFT else 1 << (len(samples) - 1).bit_length()
    mags = np.abs(np.fft.rfft(samples, n_fft))
    return float(np.argmax(mags)) * sample_rate / n_fft


def extract_features(box: EventBox, next_box: EventBox | None,
                     audio: AudioBuffer) -> ContextFeatureVector:
    n = len(audio.samples)
    if box.start_sample < 0 or box.end_sample > n:
        raise InvalidInputError(
            f"box [{box.start_sample}, {box.end_sample}) outside audio of {n} samples")
    fs = audio.sample_rate
    seg = audio.samples[box.start_sample:box.end_sample]
    peaks = extract_peaks(seg, ma_window=box.length) if box.length >= 2 else []
    if peaks:
        mags = np.array([p.magnitude for p in peaks])
        strongest = peaks[int(np.argmax(mags))]
        max_fod = strongest.magnitude
        direction = 1 if strongest.gradient_value > 0 else -1
    else:
        max_fod, direction = 0.0, 1
    start, end = box.start_sample / fs, box.end_sample / fs
    gap = NO_NEXT if next_box is None else next_box.start_sample / fs - end
    return ContextFeatureVector(
        start=start,
        end=end,
        confidence=float(box.confidence),
        length=end - start,
        number_fod=len(peaks),
        minimum_energy=float(seg.min()),
        maximum_energy=float(seg.max()),
        mean_energy=float(np.mean(np.abs(seg))),
        max_fod=float(max_fod),
        fod_direction=direction,
        strongest_frequency=strongest_frequency(seg, fs),
        interarrival=gap,
    )


def extract_all(boxes: Sequence[EventBox], audio: AudioBuffer) -> list[ContextFeatureVector]:
    """Features for time-sorted boxes, each paired with its successor."""
    boxes = sorted(boxes)
    return [extract_features(b, boxes[i + 1] if i + 1 < len(boxes) else None, audio)
            for i, b in enumerate(boxes)]


def assemble_context(events: Sequence[ContextFeatureVector],
                     context_size: int = 5) -> list[ContextWindow]:
    """One window per event, times re-based to the current event's start."""
    try:
        layout = CONTEXT_LAYOUTS[context_size]
    except KeyError:
        raise InvalidInputError(
            f"context_size must be one of {sorted(CONTEXT_LAYOUTS)}, got {context_size}") from None
    out = []
    for i, cur in enumerate(events):
        vecs, present = [], []
        for off in layout:
            j = i + off
            if 0 <= j < len(events):
                vecs.append(events[j].shifted(cur.start))
                present.append(True)
            else:
                vecs.append(SENTINEL)
                present.append(False)
        out.append(ContextWindow(tuple(vecs), tuple(present)))
    return out


def context_matrix(events: Sequence[ContextFeatureVector], context_size: int = 5) -> np.ndarray:
    windows = assemble_context(events, context_size)
    if not windows:
        return np.zeros((0, feature_count(context_size)))
    return np.stack([w.as_array() for w in windows])


def build_training_matrix(sequences: Iterable[tuple[Sequence[ContextFeatureVector], Sequence[str]]],
                          context_size: int = 5, classes: Sequence[str] = CLASSES):
    """Stack per-recording sequences into ``(X, y)``; context never crosses recordings."""
    xs, ys = [], []
    index = {c: k for k, c in enumerate(classes)}
    for feats, labels in sequences:
        if len(feats) != len(labels):
            raise InvalidInputError("features and labels differ in length")
        if not feats:
            continue
        xs.append(context_matrix(feats, context_size))
        try:
            ys.append(np.array([index[lab] for lab in labels], dtype=np.int64))
        except KeyError as exc:
            raise InvalidInputError(f"unknown class label {exc}") from None
    if not xs:
        return np.zeros((0, feature_count(context_size))), np.zeros(0, dtype=np.int64)
    return np.concatenate(xs), np.concatenate(ys)


def train_classifier(sequences, context_size: int = 5, n_trees: int = 10,
                     seed: int = 0) -> ForestModel:
    X, y = build_training_matrix(sequences, context_size)
    return train_forest(X, y, n_trees=n_trees, seed=seed, context_size=context_size)


def predict(model: ForestModel, window: ContextWindow) -> tuple[str, float]:
    labels, scores = model.predict(window.as_array()[None, :])
    return labels[0], float(scores[0])


def classify_events(boxes: Sequence[EventBox], audio: AudioBuffer,
                    model: ForestModel) -> list[tuple[EventBox, float]]:
    """Relabel time-sorted boxes with the model's class; returns (box, score)."""
    boxes = sorted(boxes)
    if not boxes:
        return []
    X = context_matrix(extract_all(boxes, audio), model.context_size)
    labels, scores = model.predict(X)
    return [(b.with_(label=lab), float(s)) for b, lab, s in zip(boxes, labels, scores)]


def classify_frequency_band(frequency: float) -> str:
    """LF below 5 kHz, HF up to and including 40 kHz, US above."""
    if frequency < 0:
        raise InvalidInputError("frequency must be non-negative")
    if frequency < 5_000.0:
        return "LF"
    if frequency <= 40_000.0:
        return "HF"
    return "US"


def accuracy(model: ForestModel, X: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return math.nan
    idx, _ = model.predict_index(X)
    return float(np.mean(idx == y))


def context_ablation(train_seqs, test_seqs, sizes=(3, 5, 9), n_trees: int = 10,
                     seed: int = 0) -> dict[int, float]:
    """Held-out accuracy for each context layout on the same recordings."""
    out = {}
    for size in sizes:
        model = train_classifier(train_seqs, size, n_trees, seed)
        X, y = build_training_matrix(test_seqs, size)
        out[size] = accuracy(model, X, y)
    return out
