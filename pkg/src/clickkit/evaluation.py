"""Scoring detections against hand annotations.

Two matching protocols are provided. The point protocol counts a
detection as correct when its midpoint falls inside an annotation. The
overlap protocol grades each side independently by the fraction of its
own duration covered by the best-overlapping interval of the other side
(partial at >= 20 %, full at >= 90 % by default). Neither protocol does
one-to-one assignment.

Rate correlation bins both sets by event midpoint and reports the Pearson
correlation of the per-bin counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .annotations import Annotation
from .errors import ConfigError
from .events import EventBox, parse_event_label

_BLOCK = 2048


def as_intervals(items, sample_rate: int | None = None) -> np.ndarray:
    """``[n, 2]`` float array of (start, end) seconds.

    Accepts Annotations, EventBoxes (``sample_rate`` required), or pairs.
    """
    rows = []
    for it in items:
        if isinstance(it, EventBox):
            if sample_rate is None:
                raise ConfigError("sample_rate is required to score EventBoxes")
            rows.append((it.start_sample / sample_rate, it.end_sample / sample_rate))
        elif isinstance(it, Annotation):
            rows.append((it.start, it.end))
        else:
            s, e = it
            rows.append((float(s), float(e)))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 2)


def _label_of(item) -> str:
    if isinstance(item, (EventBox, Annotation)):
        return parse_event_label(item.label)[0]
    return ""


def filter_by_class(items: Iterable, classes: Sequence[str] | str | None):
    if classes is None:
        return list(items)
    wanted = {classes} if isinstance(classes, str) else set(classes)
    return [it for it in items if _label_of(it) in wanted]


@dataclass
class MatchReport:
    mode: str
    detections: int = 0
    tp_partial: int = 0
    tp_full: int = 0
    fp: int = 0
    all_annotations: int = 0
    found_partial: int = 0
    found_full: int = 0
    missed: int = 0
    flags: tuple[str, ...] = field(default_factory=tuple)

    @staticmethod
    def _pct(num, den):
        return 100.0 * num / den if den else 0.0

    @property
    def precision_partial(self) -> float:
        return self._pct(self.tp_partial, self.detections)

    @property
    def precision_full(self) -> float:
        return self._pct(self.tp_full, self.detections)

    @property
    def fp_pct(self) -> float:
        return self._pct(self.fp, self.detections)

    @property
    def recall_partial(self) -> float:
        return self._pct(self.found_partial, self.all_annotations)

    @property
    def recall_full(self) -> float:
        return self._pct(self.found_full, self.all_annotations)

    @property
    def missed_pct(self) -> float:
        return self._pct(self.missed, self.all_annotations)

    # point-protocol aliases
    @property
    def tp(self) -> int:
        return self.tp_partial

    @property
    def found(self) -> int:
        return self.found_partial

    @property
    def precision(self) -> float:
        return self.precision_partial

    @property
    def recall(self) -> float:
        return self.recall_partial


def _degenerate_flags(n_det, n_ann):
    flags = []
    if n_det == 0:
        flags.append("precision-undefined")
    if n_ann == 0:
        flags.append("recall-undefined")
    return tuple(flags)


def match_point(detections, annotations, sample_rate: int | None = None) -> MatchReport:
    """Midpoint-containment matching.

    Zero detections report precision 0 and carry a ``precision-undefined``
    flag instead of raising.
    """
    det = as_intervals(detections, sample_rate)
    ann = as_intervals(annotations, sample_rate)
    found = np.zeros(len(ann), dtype=bool)
    tp = 0
    for lo in range(0, len(det), _BLOCK):
        mid = det[lo:lo + _BLOCK].mean(axis=1)
        inside = (mid[:, None] >= ann[None, :, 0]) & (mid[:, None] <= ann[None, :, 1])
        tp += int(inside.any(axis=1).sum())
        found |= inside.any(axis=0)
    n_found = int(found.sum())
    return MatchReport("point", len(det), tp, tp, len(det) - tp, len(ann), n_found, n_found,
                       len(ann) - n_found, _degenerate_flags(len(det), len(ann)))


def _coverage(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each interval in ``a``, the best fraction of it covered by one of ``b``.

    Zero-length intervals count as fully covered when they lie inside
    some interval of ``b``.
    """
    best = np.zeros(len(a))
    if len(a) == 0 or len(b) == 0:
        return best
    for lo in range(0, len(a), _BLOCK):
        blk = a[lo:lo + _BLOCK]
        inter = (np.minimum(blk[:, None, 1], b[None, :, 1])
                 - np.maximum(blk[:, None, 0], b[None, :, 0]))
        dur = blk[:, 1] - blk[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(dur[:, None] > 0, np.clip(inter, 0.0, None) / dur[:, None],
                            (inter >= 0).astype(float))
        best[lo:lo + _BLOCK] = frac.max(axis=1)
    return best


def match_overlap(detections, annotations, partial_frac: float = 0.20,
                  full_frac: float = 0.90, sample_rate: int | None = None) -> MatchReport:
    if not (0.0 < partial_frac <= full_frac <= 1.0):
        raise ConfigError(
            f"need 0 < partial_frac <= full_frac <= 1, got {partial_frac}, {full_frac}")
    det = as_intervals(detections, sample_rate)
    ann = as_intervals(annotations, sample_rate)
    det_cov = _coverage(det, ann)
    ann_cov = _coverage(ann, det)
    tp_p = int((det_cov >= partial_frac).sum())
    tp_f = int((det_cov >= full_frac).sum())
    fo_p = int((ann_cov >= partial_frac).sum())
    fo_f = int((ann_cov >= full_frac).sum())
    return MatchReport("overlap", len(det), tp_p, tp_f, len(det) - tp_p, len(ann), fo_p, fo_f,
                       len(ann) - fo_p, _degenerate_flags(len(det), len(ann)))


@dataclass
class RateReport:
    bin_seconds: float
    detected_counts: np.ndarray
    annotated_counts: np.ndarray
    correlation: float  # Pearson r in [-1, 1]; 0 when undefined
    flags: tuple[str, ...] = ()

    @property
    def correlation_pct(self) -> float:
        return 100.0 * self.correlation


def bin_counts(intervals: np.ndarray, bin_seconds: float, n_bins: int) -> np.ndarray:
    if len(intervals) == 0:
        return np.zeros(n_bins, dtype=np.int64)
    mids = intervals.mean(axis=1)
    idx = np.clip(np.floor(mids / bin_seconds).astype(np.int64), 0, n_bins - 1)
    return np.bincount(idx, minlength=n_bins)


def rate_correlation(detections, annotations, total_duration: float,
                     class_filter: Sequence[str] | str | None = None,
                     bin_seconds: float = 1.0, sample_rate: int | None = None) -> RateReport:
    if total_duration <= 0:
        raise ConfigError("total_duration must be positive")
    if bin_seconds <= 0:
        raise ConfigError("bin_seconds must be positive")
    det = as_intervals(filter_by_class(detections, class_filter), sample_rate)
    ann = as_intervals(filter_by_class(annotations, class_filter), sample_rate)
    n_bins = max(int(math.ceil(total_duration / bin_seconds - 1e-9)), 1)
    dc = bin_counts(det, bin_seconds, n_bins)
    ac = bin_counts(ann, bin_seconds, n_bins)
    if n_bins < 2 or dc.std() == 0 or ac.std() == 0:
        return RateReport(bin_seconds, dc, ac, 0.0, ("correlation-undefined",))
    r = float(np.corrcoef(dc.astype(float), ac.astype(float))[0, 1])
    return RateReport(bin_seconds, dc, ac, max(-1.0, min(1.0, r)))


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

POINT_ROWS = (
    ("Detection", "detections", "d"),
    ("TP", "tp", "d"),
    ("FP", "fp", "d"),
    ("Precision", "precision", "f"),
    ("All", "all_annotations", "d"),
    ("Found", "found", "d"),
    ("Missed", "missed", "d"),
    ("Recall", "recall", "f"),
)

OVERLAP_ROWS = (
    ("Detection", "detections", "d"),
    ("TP Partial", "tp_partial", "d"),
    ("TP Full", "tp_full", "d"),
    ("TP Partial%", "precision_partial", "f"),
    ("TP Full%", "precision_full", "f"),
    ("FP", "fp", "d"),
    ("FP%", "fp_pct", "f"),
    ("All", "all_annotations", "d"),
    ("Partial", "found_partial", "d"),
    ("Full", "found_full", "d"),
    ("Partial%", "recall_partial", "f"),
    ("Full%", "recall_full", "f"),
    ("Missed", "missed", "d"),
    ("Missed%", "missed_pct", "f"),
)


def _cell(value, kind) -> str:
    return f"{value:.2f}" if kind == "f" else str(value)


def render_table(reports: MatchReport | Sequence[MatchReport] | None,
                 columns: Sequence[str] | None = None, mode: str = "overlap") -> str:
    """Fixed-width table, one metric per row and one report per column.

    An empty report list renders the header line only.
    """
    if isinstance(reports, MatchReport):
        reports = [reports]
    reports = list(reports or [])
    if reports:
        mode = reports[0].mode
    rows = POINT_ROWS if mode == "point" else OVERLAP_ROWS
    columns = list(columns) if columns is not None else (
        ["Value"] if len(reports) == 1 else [str(i) for i in range(len(reports))])
    width0 = max(len(r[0]) for r in rows)
    cells = [[_cell(getattr(rep, attr), kind) for rep in reports] for _, attr, kind in rows]
    widths = [max([len(c)] + [len(row[j]) for row in cells]) for j, c in enumerate(columns)]
    if not reports:
        columns, widths = [], []
    header = " | ".join(["Metric".ljust(width0)] + [c.rjust(w) for c, w in zip(columns, widths)])
    lines = [header.rstrip()]
    if reports:
        lines.append("-" * len(header))
        for (name, _, _), row in zip(rows, cells):
            lines.append(" | ".join([name.ljust(width0)]
                                    + [v.rjust(w) for v, w in zip(row, widths)]))
    return "\n".join(lines) + "\n"


def render_rate_table(rows: Sequence[tuple[str, Sequence[RateReport]]],
                      names: Sequence[str] = ("Event", "Click", "Echo")) -> str:
    """Rows of ``(threshold label, [rate reports...])`` as a correlation table."""
    head = ["Confidence"] + [f"{n} correlation" for n in names]
    body = [[lab] + [f"{r.correlation_pct:.2f}" for r in reps] for lab, reps in rows]
    widths = [max([len(h)] + [len(b[j]) for b in body]) for j, h in enumerate(head)]
    lines = [" | ".join(h.rjust(w) for h, w in zip(head, widths))]
    lines.append("-" * len(lines[0]))
    lines += [" | ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"
