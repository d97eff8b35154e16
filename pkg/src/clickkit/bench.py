"""Synthetic labeled event sequences for classifier training and benchmarks.

Ground-truth events from randomized scenes are turned into detector-like
boxes: edges are widened by a random margin (never across a neighbour),
each box gets a confidence drawn per class, and a few boxes are placed
over empty noise as false alarms labeled ``other``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .annotations import Annotation
from .classifier import ContextFeatureVector, extract_all
from .events import EventBox
from .synth import random_training_scene, synth_scene

# detector confidence ranges per true class
CONFIDENCE_RANGES = {"click": (0.35, 1.0), "echo": (0.2, 0.9), "other": (0.1, 0.6)}
MAX_MARGIN = 0.0005
FALSE_ALARM_LENGTH = (0.0003, 0.0012)


def label_boxes(boxes: Sequence[EventBox], truth: Sequence[Annotation],
                sample_rate: int) -> list[str]:
    """Label of the annotation overlapping each box most; ``other`` if none."""
    out = []
    for b in boxes:
        s, e = b.start_sample / sample_rate, b.end_sample / sample_rate
        best, label = 0.0, "other"
        for a in truth:
            ov = min(e, a.end) - max(s, a.start)
            if ov > best:
                best, label = ov, a.label
        out.append(label if label in ("click", "echo") else "other")
    return out


def detector_like_boxes(truth: Sequence[Annotation], n_samples: int, sample_rate: int,
                        rng: np.random.Generator,
                        n_false_alarms: int = 2) -> tuple[list[EventBox], list[str]]:
    """Jittered, non-overlapping boxes around ``truth`` plus false alarms."""
    spans = []
    for a in truth:
        lo = int(round(a.start * sample_rate))
        hi = max(int(round(a.end * sample_rate)), lo + 1)
        spans.append((lo, hi, a.label))
    for _ in range(n_false_alarms):
        length = int(rng.uniform(*FALSE_ALARM_LENGTH) * sample_rate)
        lo = int(rng.integers(0, max(n_samples - length, 1)))
        hi = lo + length
        if all(hi + 96 <= s or lo >= e + 96 for s, e, _ in spans):
            spans.append((lo, hi, "other"))
    spans.sort()
    margin = int(MAX_MARGIN * sample_rate)
    boxes, labels = [], []
    for i, (lo, hi, lab) in enumerate(spans):
        start = lo - int(rng.integers(0, margin + 1))
        end = hi + int(rng.integers(0, margin + 1))
        if i > 0:
            start = max(start, (spans[i - 1][1] + lo) // 2)
        if i + 1 < len(spans):
            end = min(end, (hi + spans[i + 1][0]) // 2)
        start, end = max(start, 0), min(end, n_samples)
        if end <= start:
            continue
        lab = lab if lab in CONFIDENCE_RANGES else "other"
        conf = float(rng.uniform(*CONFIDENCE_RANGES[lab]))
        boxes.append(EventBox(start, end, round(conf, 4), "event", "external"))
        labels.append(lab)
    return boxes, labels


def synthetic_sequences(n_scenes: int, seed: int = 0
                        ) -> list[tuple[list[ContextFeatureVector], list[str]]]:
    """``n_scenes`` recordings worth of (feature vectors, labels)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_scenes):
        spec = random_training_scene(rng)
        audio, truth = synth_scene(spec)
        boxes, labels = detector_like_boxes(truth, len(audio), audio.sample_rate, rng,
                                            n_false_alarms=int(rng.integers(0, 4)))
        out.append((extract_all(boxes, audio), labels))
    return out
